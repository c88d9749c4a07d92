#include "resorb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "resorb/config.hpp"
#include "resorb/constants.hpp"
#include "resorb/diagnostics.hpp"
#include "resorb/errors.hpp"

namespace resorb {

namespace {

const double PI = 3.14159265358979323846;

double deg2rad(double d) { return d * PI / 180.0; }
double rad2deg(double r) { return r * 180.0 / PI; }

// ---------------------------------------------------------------- sha1 ----

struct Sha1 {
    uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u,
                     0xC3D2E1F0u};
    unsigned char buf[64];
    size_t fill = 0;
    uint64_t total = 0;

    static uint32_t rol(uint32_t x, int s) { return (x << s) | (x >> (32 - s)); }

    void block(const unsigned char* p) {
        uint32_t w[80];
        for (int i = 0; i < 16; ++i)
            w[i] = (uint32_t)p[4 * i] << 24 | (uint32_t)p[4 * i + 1] << 16 |
                   (uint32_t)p[4 * i + 2] << 8 | (uint32_t)p[4 * i + 3];
        for (int i = 16; i < 80; ++i)
            w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
        uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
        for (int i = 0; i < 80; ++i) {
            uint32_t f, k;
            if (i < 20) {
                f = (b & c) | (~b & d);
                k = 0x5A827999u;
            } else if (i < 40) {
                f = b ^ c ^ d;
                k = 0x6ED9EBA1u;
            } else if (i < 60) {
                f = (b & c) | (b & d) | (c & d);
                k = 0x8F1BBCDCu;
            } else {
                f = b ^ c ^ d;
                k = 0xCA62C1D6u;
            }
            uint32_t t = rol(a, 5) + f + e + k + w[i];
            e = d;
            d = c;
            c = rol(b, 30);
            b = a;
            a = t;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
    }

    void update(const void* data, size_t n) {
        const unsigned char* p = (const unsigned char*)data;
        total += n;
        while (n > 0) {
            size_t take = std::min(n, sizeof(buf) - fill);
            std::memcpy(buf + fill, p, take);
            fill += take;
            p += take;
            n -= take;
            if (fill == sizeof(buf)) {
                block(buf);
                fill = 0;
            }
        }
    }

    std::string hex() {
        uint64_t bits = total * 8;
        unsigned char pad = 0x80;
        update(&pad, 1);
        unsigned char zero = 0;
        while (fill != 56) update(&zero, 1);
        unsigned char len[8];
        for (int i = 0; i < 8; ++i) len[i] = (unsigned char)(bits >> (56 - 8 * i));
        update(len, 8);
        char out[41];
        for (int i = 0; i < 5; ++i) std::snprintf(out + 8 * i, 9, "%08x", h[i]);
        return std::string(out, 40);
    }
};

// ------------------------------------------------------------- registry ----

struct KeyDoc {
    const char* key;
    const char* def; // printed default, or (required)/(unset)
    const char* unit;
    const char* doc;
};

// Single source of truth: unknown-key validation, the config echo ordering,
// and the config-reference sheet all walk this table.
const KeyDoc kKeys[] = {
    {"run.out", "\"out\"", "-", "output directory; the --out flag overrides it"},
    {"run.threads", "0", "-", "worker threads for quadrature and ensembles; 0 uses the machine parallelism"},
    {"run.seed", "0", "-", "seed for synthetic fixture generation (reserved; commands here are deterministic)"},
    {"ephemeris.table", "(unset)", "-", "CSV element table: mjd, planet, a, e, i_deg, Omega_deg, omega_deg, ell_deg"},
    {"ephemeris.model", "(unset)", "-", "quasi-periodic model config file"},
    {"ephemeris.builtin", "false", "-", "use the built-in venus..saturn quasi-periodic model"},
    {"planets.names", "(required)", "-", "perturbing planets; each must exist in the ephemeris"},
    {"resonance.h_ast", "(required)", "-", "asteroid coefficient of the critical combination, >= 1"},
    {"resonance.h_pl", "(required)", "-", "planet coefficient, nonzero, coprime with h_ast"},
    {"resonance.planet", "(required)", "-", "resonant planet; must appear in planets.names"},
    {"asteroid.a", "(required)", "au", "initial semimajor axis"},
    {"asteroid.e", "(required)", "-", "initial eccentricity in [0, 1)"},
    {"asteroid.i_deg", "(required)", "deg", "initial inclination"},
    {"asteroid.Omega_deg", "(required)", "deg", "initial longitude of node"},
    {"asteroid.omega_deg", "(required)", "deg", "initial argument of perihelion"},
    {"asteroid.ell_deg", "(required)", "deg", "initial mean anomaly"},
    {"integrator.t0_mjd", "(required)", "MJD", "start epoch; asteroid elements are osculating here"},
    {"integrator.span_yr", "(required)", "yr", "propagation span; must fit inside a table ephemeris"},
    {"integrator.dt_yr", "0.5", "yr", "collocation step of the averaged propagation"},
    {"integrator.dt_min_yr", "0.001", "yr", "smallest event-splitting step"},
    {"integrator.stages", "2", "-", "collocation points per step: 2 (order 4) or 3 (order 6)"},
    {"integrator.fp_tol", "1e-13", "-", "scaled fixed-point tolerance of the stage solve"},
    {"integrator.out_step_yr", "0.5", "yr", "output sampling step for series CSVs"},
    {"normal_form.n_max", "3", "-", "harmonic order kept for the resonant planet (0: secular average)"},
    {"normal_form.m_far", "192", "-", "tensor grid in the far regime"},
    {"normal_form.m_cap", "640", "-", "largest plain tensor grid before extraction takes over"},
    {"normal_form.m_band", "512", "-", "tensor grid under the extracted path"},
    {"normal_form.n_theta", "128", "-", "polar angular nodes of the extraction"},
    {"normal_form.panels", "22", "-", "geometric radial panels of the extraction"},
    {"normal_form.gl", "6", "-", "Gauss order per radial panel"},
    {"normal_form.mask_radius", "0.45", "rad", "outer radius of the extraction mask in the wrapped-anomaly metric"},
    {"normal_form.taper_frac", "0.066666666666666666", "-", "erfc taper width as a fraction of the mask radius"},
    {"full.tol", "1e-10", "-", "relative per-step error target of the full-model integrator"},
    {"ensemble.count", "64", "-", "ensemble members for the statistical comparison"},
    {"ensemble.phase_step_deg", "2.8125", "deg", "planet anomaly shift between consecutive members"},
    {"diagnose.samples", "240", "-", "midpoint sigma grid for the averaged-kernel profile"},
    {"diagnose.orders", "[0, 3, 15]", "-", "harmonic orders for partial-sum and jump profiles"},
    {"diagnose.y_index", "1", "-", "gradient component scanned by the jump profile: 0..4 over (S, G, Z, g, z)"},
    {"diagnose.m_sigma", "512", "-", "midpoint sigma grid of the jump profile"},
};

const KeyDoc* find_key(const std::string& key) {
    for (const KeyDoc& k : kKeys)
        if (key == k.key) return &k;
    return nullptr;
}

// ---------------------------------------------------------- config read ----

std::string fmt_num(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.17g", v);
    return b;
}

// Reads typed values, collecting the resolved assignment for the manifest
// echo in registry order.
struct Reader {
    const TomlTable& t;
    std::map<std::string, std::string> echo;

    void note(const std::string& key, const std::string& shown) { echo[key] = shown; }

    double num(const char* key, double def) {
        double v = t.num_or(key, def);
        note(key, fmt_num(v));
        return v;
    }
    double num_req(const char* key) {
        if (!t.has(key)) throw ConfigError(std::string(key) + ": required key missing");
        double v = t.num(key);
        note(key, fmt_num(v));
        return v;
    }
    int integer(const char* key, int def) {
        double v = num(key, def);
        if (v != std::floor(v))
            throw ConfigError(std::string(key) + ": expected an integer, got " + fmt_num(v));
        return (int)v;
    }
    int integer_req(const char* key) {
        double v = num_req(key);
        if (v != std::floor(v))
            throw ConfigError(std::string(key) + ": expected an integer, got " + fmt_num(v));
        return (int)v;
    }
    std::string str(const char* key, const std::string& def) {
        std::string v = t.str_or(key, def);
        note(key, "\"" + v + "\"");
        return v;
    }
    bool boolean(const char* key, bool def) {
        bool v = t.boolean_or(key, def);
        note(key, v ? "true" : "false");
        return v;
    }
    std::vector<std::string> strs_req(const char* key) {
        if (!t.has(key)) throw ConfigError(std::string(key) + ": required key missing");
        std::vector<std::string> v = t.str_array(key);
        std::string shown = "[";
        for (size_t i = 0; i < v.size(); ++i)
            shown += (i ? ", \"" : "\"") + v[i] + "\"";
        note(key, shown + "]");
        return v;
    }
    std::vector<int> ints(const char* key, std::vector<int> def) {
        std::vector<int> v = def;
        if (t.has(key)) {
            v.clear();
            for (double x : t.num_array(key)) {
                if (x != std::floor(x))
                    throw ConfigError(std::string(key) + ": expected integers, got " + fmt_num(x));
                v.push_back((int)x);
            }
        }
        std::string shown = "[";
        for (size_t i = 0; i < v.size(); ++i)
            shown += (i ? ", " : "") + std::to_string(v[i]);
        note(key, shown + "]");
        return v;
    }
};

void check_recognized(const TomlTable& t) {
    static const char* sections[] = {"run",        "ephemeris", "planets",
                                     "resonance",  "asteroid",  "integrator",
                                     "normal_form", "full",      "ensemble",
                                     "diagnose"};
    for (const std::string& s : t.sections()) {
        bool ok = false;
        for (const char* name : sections) ok = ok || s == name;
        if (!ok) throw ConfigError(s + ": unknown section");
    }
    for (const std::string& k : t.keys())
        if (!find_key(k)) throw ConfigError(k + ": unknown key");
}

// --------------------------------------------------------------- wiring ----

struct WiredRun {
    ResonantState y0;
    double t0 = 0, t1 = 0; // MJD
    LongTermConfig cfg;
    OrbitShape ast_shape;                   // at t0
    std::vector<OrbitShape> planet_shapes;  // index-aligned with planet_names
    int resonant_index = 0;
};

WiredRun wire(const RunConfig& rc) {
    WiredRun w;
    w.t0 = rc.t0_mjd;
    w.t1 = rc.t0_mjd + rc.span_yr * DAYS_PER_YEAR;
    const EphemerisSource& eph = *rc.ephemeris;

    w.cfg.spec = rc.spec;
    w.cfg.quad = rc.quad;
    w.cfg.dt = rc.dt_yr * DAYS_PER_YEAR;
    w.cfg.dt_min = rc.dt_min_yr * DAYS_PER_YEAR;
    w.cfg.stages = rc.stages;
    w.cfg.fp_tol = rc.fp_tol;
    for (size_t j = 0; j < rc.planet_names.size(); ++j) {
        const std::string& name = rc.planet_names[j];
        OrbitShape sh(eph.elements(name, w.t0));
        w.planet_shapes.push_back(sh);
        int nk = name == rc.resonant_planet ? rc.n_max : 0;
        if (name == rc.resonant_planet) w.resonant_index = (int)j;
        w.cfg.planets.push_back({name, sh, eph.mu(name), nk});
    }
    w.cfg.n_planet = eph.mean_motion(rc.resonant_planet, w.t0);

    DelaunayElements d = keplerian_to_delaunay(rc.asteroid, GAUSS_K);
    KeplerianElements pl = eph.elements(rc.resonant_planet, w.t0);
    w.y0 = delaunay_to_resonant(d, pl.ell, rc.spec);
    w.cfg.S5 = s5_constant(d.L, GAUSS_K * std::sqrt(pl.a), rc.spec);
    w.ast_shape = OrbitShape(rc.asteroid);
    return w;
}

// ------------------------------------------------------------ csv files ----

struct Csv {
    std::FILE* f = nullptr;
    std::string name;

    Csv(const std::string& dir, const std::string& base) : name(base) {
        std::string path = dir + "/" + base;
        f = std::fopen(path.c_str(), "wb");
        if (!f) throw Error("cannot open output file " + path);
    }
    ~Csv() {
        if (f) std::fclose(f);
    }
    void line(const std::string& s) { std::fprintf(f, "%s\n", s.c_str()); }
    void cell(double v, bool last = false) {
        std::fprintf(f, "%.17g%c", v, last ? '\n' : ',');
    }
    void cell(const std::string& s, bool last = false) {
        std::fprintf(f, "%s%c", s.c_str(), last ? '\n' : ',');
    }
};

std::string out_dir_for(const RunConfig& rc, const std::string& out_override) {
    std::string dir = out_override.empty() ? rc.out_dir : out_override;
    std::filesystem::create_directories(dir);
    return dir;
}

int resolve_threads(const RunConfig& rc) {
    if (rc.threads > 0) return rc.threads;
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? (int)hc : 1;
}

void write_manifest(const RunConfig& rc, const std::string& dir,
                    const std::string& command,
                    const std::vector<std::string>& outputs,
                    const std::vector<std::string>& extra = {}) {
    Csv m(dir, "manifest.txt");
    std::fprintf(m.f, "command: %s\n", command.c_str());
    std::fprintf(m.f, "config: %s\n", rc.config_path.c_str());
    std::fprintf(m.f, "%s", rc.input_hash.c_str());
    std::fprintf(m.f, "threads: %d\n", resolve_threads(rc));
    std::fprintf(m.f, "outputs:");
    for (const std::string& o : outputs) std::fprintf(m.f, " %s", o.c_str());
    std::fprintf(m.f, "\n");
    for (const std::string& e : extra) std::fprintf(m.f, "%s\n", e.c_str());
    std::fprintf(m.f, "resolved configuration:\n");
    std::fprintf(m.f, "%s", rc.config_echo.c_str());
}

// Signed separation of the asteroid shape from each planet shape; the
// headline value is the one closest to crossing (smallest |d_tilde|).
std::vector<double> dtilde_row(const OrbitShape& ast,
                               const std::vector<OrbitShape>& planets) {
    std::vector<double> out;
    double best = 0, best_abs = 1e30;
    for (const OrbitShape& p : planets) {
        double dt = min_distance({ast, p}).d_tilde;
        out.push_back(dt);
        if (std::fabs(dt) < best_abs) {
            best_abs = std::fabs(dt);
            best = dt;
        }
    }
    out.insert(out.begin(), best);
    return out;
}

void write_series(Csv& c, const GeneralizedSolution& sol, const WiredRun& w,
                  const RunConfig& rc) {
    std::string units = "# units: yr,au,-,deg,deg,deg,deg,au";
    std::string head = "t_yr,a,e,i_deg,Omega_deg,omega_deg,sigma_deg,dtilde_min_au";
    for (const std::string& n : rc.planet_names) {
        units += ",au";
        head += ",dtilde_" + n + "_au";
    }
    c.line(units);
    c.line(head);
    double step = rc.out_step_yr * DAYS_PER_YEAR;
    long n_out = (long)std::floor((w.t1 - w.t0) / step + 1e-9);
    for (long i = 0; i <= n_out; ++i) {
        double t = w.t0 + (double)i * step;
        ResonantState y = from_y6(sol.at(t));
        OrbitShape sh = shape_from_resonant(y, rc.spec);
        std::vector<double> dts = dtilde_row(sh, w.planet_shapes);
        c.cell((t - w.t0) / DAYS_PER_YEAR);
        c.cell(sh.a());
        c.cell(sh.e());
        c.cell(rad2deg(sh.I()));
        c.cell(rad2deg(sh.Omega()));
        c.cell(rad2deg(sh.omega()));
        c.cell(rad2deg(y.sigma));
        for (size_t k = 0; k < dts.size(); ++k) c.cell(dts[k], k + 1 == dts.size());
    }
}

void write_events(Csv& c, const GeneralizedSolution& sol, const WiredRun& w) {
    c.line("# units: yr,-,-,deg,1/day,1/day,1/day,au^2/day^2,au^2/day^2");
    c.line("t_c,planet,h,sigma_c_deg,diff_S,diff_G,diff_Z,diff_g,diff_z");
    for (const CrossingEvent& ev : sol.events) {
        c.cell((ev.t - w.t0) / DAYS_PER_YEAR);
        c.cell(w.cfg.planets[ev.planet].name);
        c.cell((double)ev.branch);
        c.cell(rad2deg(ev.sigma_c));
        for (int k = 0; k < 5; ++k) c.cell(ev.diff[k], k == 4);
    }
}

// ------------------------------------------------------ ensemble running ----

std::shared_ptr<EphemerisSource> clone_source(const EphemerisSource& eph) {
    if (auto* t = dynamic_cast<const EphemerisTable*>(&eph))
        return std::make_shared<EphemerisTable>(*t);
    if (auto* m = dynamic_cast<const QuasiPeriodicModel*>(&eph))
        return std::make_shared<QuasiPeriodicModel>(*m);
    return nullptr;
}

// Same member set as run_ensemble, fanned over a worker pool with one
// ephemeris copy per worker so the phase offsets never race. Member order,
// and therefore every downstream reduction, is fixed by index.
std::vector<FullTrajectory> run_ensemble_parallel(const KeplerianElements& base,
                                                  double t0, double t1,
                                                  const FullIntegration& fi,
                                                  const EphemerisSource& eph,
                                                  const EnsembleSpec& es,
                                                  int threads) {
    std::vector<double> planet_ell;
    for (const std::string& n : fi.planets) planet_ell.push_back(eph.elements(n, t0).ell);
    std::vector<EnsembleMember> mem = ensemble_shifts(base, planet_ell, es);
    std::vector<FullTrajectory> out(mem.size());
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex err_mu;
    auto worker = [&] {
        std::shared_ptr<EphemerisSource> copy = clone_source(eph);
        while (!failed) {
            size_t k = next.fetch_add(1);
            if (k >= mem.size()) break;
            try {
                for (const std::string& n : fi.planets)
                    copy->set_phase_shift(n, mem[k].shift);
                out[k] = integrate_full(cartesian_state(mem[k].ast), t0, t1, fi, *copy);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!failed) first_error = "ensemble member " + std::to_string(k) +
                                           ": " + e.what();
                failed = true;
            }
        }
    };
    int nw = std::min<int>(threads, (int)mem.size());
    std::vector<std::thread> pool;
    for (int i = 1; i < nw; ++i) pool.emplace_back(worker);
    worker();
    for (std::thread& th : pool) th.join();
    if (failed) throw NumericalFailure(first_error);
    return out;
}

} // namespace

// ------------------------------------------------------------------ api ----

std::string git_blob_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string bytes = ss.str();
    Sha1 h;
    char head[64];
    int n = std::snprintf(head, sizeof head, "blob %zu", bytes.size());
    h.update(head, (size_t)n + 1); // includes the terminating NUL
    h.update(bytes.data(), bytes.size());
    return h.hex();
}

std::string config_reference_text() {
    std::string out;
    out += "# run configuration reference\n";
    out += "# angles in files are degrees, internal angles radians; times are MJD or years\n";
    out += "# exactly one of ephemeris.table / ephemeris.model / ephemeris.builtin must be set\n";
    std::string section;
    for (const KeyDoc& k : kKeys) {
        std::string key = k.key;
        std::string sec = key.substr(0, key.find('.'));
        if (sec != section) {
            out += "\n[" + sec + "]\n";
            section = sec;
        }
        char line[256];
        std::snprintf(line, sizeof line, "%-18s = %-22s # [%s] %s\n",
                      key.substr(key.find('.') + 1).c_str(), k.def, k.unit, k.doc);
        out += line;
    }
    return out;
}

RunConfig load_run_config(const std::string& path) {
    TomlTable t = TomlTable::parse_file(path);
    check_recognized(t);
    Reader r{t, {}};
    RunConfig rc;
    rc.config_path = path;

    rc.out_dir = r.str("run.out", "out");
    rc.threads = r.integer("run.threads", 0);
    if (rc.threads < 0) throw ConfigError("run.threads: must be >= 0");
    rc.seed = r.integer("run.seed", 0);

    rc.table_path = r.str("ephemeris.table", "");
    rc.model_path = r.str("ephemeris.model", "");
    rc.use_builtin = r.boolean("ephemeris.builtin", false);
    int sources = (!rc.table_path.empty()) + (!rc.model_path.empty()) + rc.use_builtin;
    if (sources != 1)
        throw ConfigError(
            "ephemeris: exactly one of table, model, builtin must be set");
    std::string eph_hash;
    if (!rc.table_path.empty()) {
        try {
            rc.ephemeris = std::make_shared<EphemerisTable>(
                EphemerisTable::load(rc.table_path));
        } catch (const Error& e) {
            throw ConfigError("ephemeris.table: " + rc.table_path + ": " + e.what());
        }
        eph_hash = "hash ephemeris " + git_blob_hash(rc.table_path) + "\n";
    } else if (!rc.model_path.empty()) {
        try {
            rc.ephemeris = std::make_shared<QuasiPeriodicModel>(
                QuasiPeriodicModel::load(rc.model_path));
        } catch (const Error& e) {
            throw ConfigError("ephemeris.model: " + rc.model_path + ": " + e.what());
        }
        eph_hash = "hash ephemeris " + git_blob_hash(rc.model_path) + "\n";
    } else {
        rc.ephemeris = std::make_shared<QuasiPeriodicModel>(builtin_model());
        eph_hash = "hash ephemeris builtin\n";
    }

    rc.planet_names = r.strs_req("planets.names");
    if (rc.planet_names.empty())
        throw ConfigError("planets.names: must list at least one planet");
    for (const std::string& n : rc.planet_names)
        if (!rc.ephemeris->has(n))
            throw ConfigError("planets.names: planet '" + n +
                              "' not in the ephemeris source");

    rc.spec.h_ast = r.integer_req("resonance.h_ast");
    rc.spec.h_pl = r.integer_req("resonance.h_pl");
    try {
        validate(rc.spec);
    } catch (const Error& e) {
        throw ConfigError(std::string("resonance: ") + e.what());
    }
    rc.resonant_planet = r.str("resonance.planet", "");
    if (rc.resonant_planet.empty())
        throw ConfigError("resonance.planet: required key missing");
    if (std::find(rc.planet_names.begin(), rc.planet_names.end(),
                  rc.resonant_planet) == rc.planet_names.end())
        throw ConfigError("resonance.planet: '" + rc.resonant_planet +
                          "' is not in planets.names");

    rc.asteroid.a = r.num_req("asteroid.a");
    rc.asteroid.e = r.num_req("asteroid.e");
    rc.asteroid.I = deg2rad(r.num_req("asteroid.i_deg"));
    rc.asteroid.Omega = deg2rad(r.num_req("asteroid.Omega_deg"));
    rc.asteroid.omega = deg2rad(r.num_req("asteroid.omega_deg"));
    rc.asteroid.ell = deg2rad(r.num_req("asteroid.ell_deg"));
    try {
        validate(rc.asteroid);
    } catch (const Error& e) {
        throw ConfigError(std::string("asteroid: ") + e.what());
    }

    rc.t0_mjd = r.num_req("integrator.t0_mjd");
    rc.span_yr = r.num_req("integrator.span_yr");
    if (!(rc.span_yr > 0)) throw ConfigError("integrator.span_yr: must be > 0");
    rc.dt_yr = r.num("integrator.dt_yr", 0.5);
    if (!(rc.dt_yr > 0)) throw ConfigError("integrator.dt_yr: must be > 0");
    rc.dt_min_yr = r.num("integrator.dt_min_yr", 1e-3);
    if (!(rc.dt_min_yr > 0)) throw ConfigError("integrator.dt_min_yr: must be > 0");
    rc.stages = r.integer("integrator.stages", 2);
    if (rc.stages != 2 && rc.stages != 3)
        throw ConfigError("integrator.stages: must be 2 or 3");
    rc.fp_tol = r.num("integrator.fp_tol", 1e-13);
    if (!(rc.fp_tol > 0)) throw ConfigError("integrator.fp_tol: must be > 0");
    rc.out_step_yr = r.num("integrator.out_step_yr", 0.5);
    if (!(rc.out_step_yr > 0)) throw ConfigError("integrator.out_step_yr: must be > 0");

    rc.n_max = r.integer("normal_form.n_max", 3);
    if (rc.n_max < 0) throw ConfigError("normal_form.n_max: must be >= 0");
    rc.quad.m_far = r.integer("normal_form.m_far", 192);
    rc.quad.m_cap = r.integer("normal_form.m_cap", 640);
    rc.quad.m_band = r.integer("normal_form.m_band", 512);
    rc.quad.n_theta = r.integer("normal_form.n_theta", 128);
    rc.quad.panels = r.integer("normal_form.panels", 22);
    rc.quad.gl = r.integer("normal_form.gl", 6);
    if (rc.quad.m_far < 8 || rc.quad.m_cap < 8 || rc.quad.m_band < 8 ||
        rc.quad.n_theta < 8 || rc.quad.panels < 2 || rc.quad.gl < 2)
        throw ConfigError("normal_form: quadrature grid too small to be meaningful");
    rc.quad.R = r.num("normal_form.mask_radius", 0.45);
    if (!(rc.quad.R > 0 && rc.quad.R < PI))
        throw ConfigError("normal_form.mask_radius: must lie in (0, pi)");
    rc.quad.taper_frac = r.num("normal_form.taper_frac", 1.0 / 15.0);
    if (!(rc.quad.taper_frac > 0 && rc.quad.taper_frac < 1))
        throw ConfigError("normal_form.taper_frac: must lie in (0, 1)");

    rc.full_tol = r.num("full.tol", 1e-10);
    if (!(rc.full_tol > 0)) throw ConfigError("full.tol: must be > 0");

    rc.ensemble_count = r.integer("ensemble.count", 64);
    if (rc.ensemble_count < 1) throw ConfigError("ensemble.count: must be >= 1");
    double ps_deg = r.num("ensemble.phase_step_deg", 2.8125);
    if (!(ps_deg > 0)) throw ConfigError("ensemble.phase_step_deg: must be > 0");
    rc.phase_step = deg2rad(ps_deg);

    rc.diag_samples = r.integer("diagnose.samples", 240);
    if (rc.diag_samples < 2) throw ConfigError("diagnose.samples: must be >= 2");
    rc.diag_orders = r.ints("diagnose.orders", {0, 3, 15});
    if (rc.diag_orders.empty())
        throw ConfigError("diagnose.orders: must list at least one order");
    for (int N : rc.diag_orders)
        if (N < 0) throw ConfigError("diagnose.orders: orders must be >= 0");
    rc.diag_y_index = r.integer("diagnose.y_index", 1);
    if (rc.diag_y_index < 0 || rc.diag_y_index >= 5)
        throw ConfigError("diagnose.y_index: must lie in 0..4");
    rc.diag_m_sigma = r.integer("diagnose.m_sigma", 512);
    if (rc.diag_m_sigma < 8) throw ConfigError("diagnose.m_sigma: must be >= 8");

    // span check only when the source cannot extrapolate
    if (auto* tab = dynamic_cast<const EphemerisTable*>(rc.ephemeris.get())) {
        double t1 = rc.t0_mjd + rc.span_yr * DAYS_PER_YEAR;
        if (rc.t0_mjd < tab->t_min() || t1 > tab->t_max()) {
            char msg[256];
            std::snprintf(msg, sizeof msg,
                          "integrator.span_yr: run span [%.6f, %.6f] MJD exceeds the "
                          "ephemeris table span [%.6f, %.6f]",
                          rc.t0_mjd, t1, tab->t_min(), tab->t_max());
            throw ConfigError(msg);
        }
    }

    for (const KeyDoc& k : kKeys) {
        auto it = r.echo.find(k.key);
        if (it != r.echo.end())
            rc.config_echo += std::string(k.key) + " = " + it->second + "\n";
    }
    rc.input_hash = "hash config " + git_blob_hash(path) + "\n" + eph_hash;
    return rc;
}

void run_propagate(RunConfig& rc, const std::string& out_override) {
    std::string dir = out_dir_for(rc, out_override);
    rc.quad.threads = resolve_threads(rc);
    WiredRun w = wire(rc);
    LongTermPropagator prop(w.cfg);
    GeneralizedSolution sol;
    try {
        sol = prop.run(w.y0, w.t0, w.t1);
    } catch (const Error& e) {
        throw Error("propagate: " + std::string(e.what()));
    }
    {
        Csv c(dir, "series.csv");
        write_series(c, sol, w, rc);
    }
    {
        Csv c(dir, "events.csv");
        write_events(c, sol, w);
    }
    write_manifest(rc, dir, "propagate", {"series.csv", "events.csv"});
}

void run_compare(RunConfig& rc, const std::string& out_override) {
    std::string dir = out_dir_for(rc, out_override);
    int threads = resolve_threads(rc);
    rc.quad.threads = threads;
    WiredRun w = wire(rc);

    LongTermPropagator prop(w.cfg);
    GeneralizedSolution sol;
    try {
        sol = prop.run(w.y0, w.t0, w.t1);
    } catch (const Error& e) {
        throw Error("compare (long-term leg): " + std::string(e.what()));
    }
    {
        Csv c(dir, "longterm.csv");
        write_series(c, sol, w, rc);
    }

    FullIntegration fi;
    fi.planets = rc.planet_names;
    fi.resonant_planet = rc.resonant_planet;
    fi.spec = rc.spec;
    fi.tol = rc.full_tol;
    fi.out_step = rc.out_step_yr * DAYS_PER_YEAR;
    EnsembleSpec es;
    es.count = rc.ensemble_count;
    es.phase_step = rc.phase_step;
    es.resonance = rc.spec;

    std::vector<FullTrajectory> members;
    try {
        if (threads > 1 && clone_source(*rc.ephemeris))
            members = run_ensemble_parallel(rc.asteroid, w.t0, w.t1, fi,
                                            *rc.ephemeris, es, threads);
        else
            members = run_ensemble(rc.asteroid, w.t0, w.t1, fi, *rc.ephemeris, es);
    } catch (const Error& e) {
        throw Error("compare (ensemble leg): " + std::string(e.what()));
    }
    EnsembleStats st = ensemble_stats(members);

    for (int which = 0; which < 2; ++which) {
        Csv c(dir, which == 0 ? "ensemble_mean.csv" : "ensemble_std.csv");
        c.line("# units: yr,au,-,deg,deg,deg,deg");
        c.line("t_yr,a,e,i_deg,Omega_deg,omega_deg,sigma_deg");
        const std::vector<std::array<double, 6>>& rows =
            which == 0 ? st.mean : st.stdev;
        for (size_t i = 0; i < st.t.size(); ++i) {
            c.cell((st.t[i] - w.t0) / DAYS_PER_YEAR);
            c.cell(rows[i][0]);
            c.cell(rows[i][1]);
            for (int k = 2; k < 6; ++k) c.cell(rad2deg(rows[i][k]), k == 5);
        }
    }
    char members_line[64];
    std::snprintf(members_line, sizeof members_line, "members: %d", es.count);
    write_manifest(rc, dir, "compare",
                   {"longterm.csv", "ensemble_mean.csv", "ensemble_std.csv"},
                   {members_line});
}

void run_crossings(RunConfig& rc, const std::string& out_override) {
    std::string dir = out_dir_for(rc, out_override);
    rc.quad.threads = resolve_threads(rc);
    WiredRun w = wire(rc);
    std::vector<std::string> outputs;
    for (size_t j = 0; j < rc.planet_names.size(); ++j) {
        std::string base = "crossings_" + rc.planet_names[j] + ".csv";
        Csv c(dir, base);
        c.line("# units: -,deg,deg,au,au,au^2,-");
        c.line("h,v_h,vp_h,d_h,d_tilde,detA,morse_index");
        std::vector<CriticalPoint> cps;
        try {
            cps = critical_points({w.ast_shape, w.planet_shapes[j]});
        } catch (const Error& e) {
            throw Error("crossings: planet " + rc.planet_names[j] + ": " +
                        std::string(e.what()));
        }
        for (size_t h = 0; h < cps.size(); ++h) {
            const CriticalPoint& cp = cps[h];
            c.cell((double)h);
            c.cell(rad2deg(cp.V.u));
            c.cell(rad2deg(cp.V.v));
            c.cell(cp.d);
            c.cell(cp.signed_ok ? cp.d_tilde
                                : std::numeric_limits<double>::quiet_NaN());
            c.cell(cp.A.det());
            c.cell((double)cp.morse_index, true);
        }
        outputs.push_back(base);
    }
    write_manifest(rc, dir, "crossings", outputs);
}

void run_coeffs(RunConfig& rc, const std::string& out_override) {
    std::string dir = out_dir_for(rc, out_override);
    rc.quad.threads = resolve_threads(rc);
    WiredRun w = wire(rc);

    Csv sec(dir, "coeffs_secular.csv");
    sec.line("# units: -,Msun,1/au,au^2/day^2");
    sec.line("planet,mu,I0,Hbar1");
    KernelCoeffs resonant_kc;
    for (size_t j = 0; j < rc.planet_names.size(); ++j) {
        CoeffOpts co;
        co.n_max = (int)j == w.resonant_index ? rc.n_max : 0;
        co.indirect = true;
        KernelCoeffs kc;
        try {
            kc = resonant_coeffs({w.ast_shape, w.planet_shapes[j]}, rc.spec, co,
                                 rc.quad);
        } catch (const Error& e) {
            throw Error("coeffs: planet " + rc.planet_names[j] + ": " +
                        std::string(e.what()));
        }
        double mu = rc.ephemeris->mu(rc.planet_names[j]);
        sec.cell(rc.planet_names[j]);
        sec.cell(mu);
        sec.cell(kc.I0);
        sec.cell(-mu * GAUSS_K2 * kc.I0, true);
        if ((int)j == w.resonant_index) resonant_kc = kc;
    }

    Csv har(dir, "coeffs_harmonics.csv");
    har.line("# units: -,1/au,1/au");
    har.line("n,Ic,Is");
    for (int n = 1; n <= rc.n_max; ++n) {
        har.cell((double)n);
        har.cell(resonant_kc.Ic[n - 1]);
        har.cell(resonant_kc.Is[n - 1], true);
    }
    write_manifest(rc, dir, "coeffs",
                   {"coeffs_secular.csv", "coeffs_harmonics.csv"});
}

void run_diagnose(RunConfig& rc, const std::string& out_override) {
    std::string dir = out_dir_for(rc, out_override);
    rc.quad.threads = resolve_threads(rc);
    WiredRun w = wire(rc);
    UnimodularChart chart = make_chart(rc.spec);
    TwoOrbitConfig pair{w.ast_shape, w.planet_shapes[w.resonant_index]};

    {
        Csv c(dir, "diagnose_average.csv");
        c.line("# units: deg,1/au");
        c.line("sigma_deg,kbar");
        for (int i = 0; i < rc.diag_samples; ++i) {
            double sig = 2.0 * PI * (i + 0.5) / rc.diag_samples;
            double v;
            try {
                v = averaged_inverse_distance(sig, pair, chart);
            } catch (const Error& e) {
                throw Error("diagnose: kernel average at sigma = " +
                            fmt_num(rad2deg(sig)) + " deg: " + std::string(e.what()));
            }
            c.cell(rad2deg(sig));
            c.cell(v, true);
        }
    }

    int n_top = *std::max_element(rc.diag_orders.begin(), rc.diag_orders.end());
    CoeffOpts co;
    co.n_max = n_top;
    co.indirect = false;
    KernelCoeffs kc;
    try {
        kc = resonant_coeffs(pair, rc.spec, co, rc.quad);
    } catch (const Error& e) {
        throw Error("diagnose: kernel coefficients: " + std::string(e.what()));
    }
    {
        Csv c(dir, "diagnose_partial.csv");
        std::string units = "# units: deg";
        std::string head = "sigma_deg";
        for (int N : rc.diag_orders) {
            units += ",1/au";
            head += ",K_" + std::to_string(N);
        }
        c.line(units);
        c.line(head);
        for (int i = 0; i < rc.diag_samples; ++i) {
            double sig = 2.0 * PI * (i + 0.5) / rc.diag_samples;
            c.cell(rad2deg(sig));
            for (size_t q = 0; q < rc.diag_orders.size(); ++q) {
                double s = kc.I0;
                for (int n = 1; n <= rc.diag_orders[q]; ++n)
                    s += 2.0 * (kc.Ic[n - 1] * std::cos(n * sig) +
                                kc.Is[n - 1] * std::sin(n * sig));
                c.cell(s, q + 1 == rc.diag_orders.size());
            }
        }
    }

    JumpScan scan;
    try {
        scan = jump_delta_scan(w.y0, rc.spec,
                               w.planet_shapes[w.resonant_index],
                               rc.ephemeris->mu(rc.resonant_planet),
                               rc.diag_y_index, rc.diag_orders, rc.diag_m_sigma);
    } catch (const Error& e) {
        throw Error("diagnose: jump scan: " + std::string(e.what()));
    }
    {
        Csv c(dir, "diagnose_jump.csv");
        std::string unit = rc.diag_y_index < 3 ? "1/day" : "au^2/day^2";
        std::string units = "# units: deg";
        std::string head = "sigma_deg";
        for (int N : rc.diag_orders) {
            units += "," + unit;
            head += ",diff_N" + std::to_string(N);
        }
        c.line(units);
        c.line(head);
        for (size_t i = 0; i < scan.sigma.size(); ++i) {
            c.cell(rad2deg(scan.sigma[i]));
            for (size_t q = 0; q < scan.profile.size(); ++q)
                c.cell(scan.profile[q][i], q + 1 == scan.profile.size());
        }
    }
    char l1[64], l2[64];
    std::snprintf(l1, sizeof l1, "sigma_c_deg: %.17g", rad2deg(scan.sigma_c));
    std::snprintf(l2, sizeof l2, "jump_mass: %.17g", scan.mass);
    write_manifest(rc, dir, "diagnose",
                   {"diagnose_average.csv", "diagnose_partial.csv",
                    "diagnose_jump.csv"},
                   {l1, l2});
}

} // namespace resorb
