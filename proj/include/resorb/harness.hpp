#ifndef RESORB_HARNESS_HPP
#define RESORB_HARNESS_HPP

#include <memory>
#include <string>
#include <vector>

#include "resorb/elements.hpp"
#include "resorb/ephemeris.hpp"
#include "resorb/hamiltonian.hpp"
#include "resorb/nbody.hpp"
#include "resorb/propagator.hpp"

namespace resorb {

// Fully resolved run description: the config file with defaults applied, the
// ephemeris opened, and every cross-reference checked. Angles arrive in
// degrees from the file and live in radians here. Validation failures throw
// ConfigError whose message names the offending field path.
struct RunConfig {
    // [ephemeris] exactly one source
    std::string table_path;
    std::string model_path;
    bool use_builtin = false;
    std::shared_ptr<EphemerisSource> ephemeris;

    // [planets]
    std::vector<std::string> planet_names;

    // [resonance]
    ResonanceSpec spec;
    std::string resonant_planet;

    // [asteroid] osculating elements at integrator.t0_mjd
    KeplerianElements asteroid;

    // [integrator]
    double t0_mjd = 0;
    double span_yr = 0;
    double dt_yr = 0.5;
    double dt_min_yr = 1e-3;
    int stages = 2;
    double fp_tol = 1e-13;
    double out_step_yr = 0.5;

    // [normal_form]
    int n_max = 3;
    QuadSpec quad;

    // [full]
    double full_tol = 1e-10;

    // [ensemble]
    int ensemble_count = 64;
    double phase_step = 0; // rad

    // [diagnose]
    int diag_samples = 240;
    std::vector<int> diag_orders;
    int diag_y_index = 1;
    int diag_m_sigma = 512;

    // [run]
    std::string out_dir = "out";
    int threads = 0; // 0: machine parallelism
    long seed = 0;

    std::string config_path;
    std::string config_echo; // resolved key = value listing, for the manifest
    std::string input_hash;  // content hashes of the config and ephemeris files
};

RunConfig load_run_config(const std::string& path);

// Reference sheet for every recognized key: default, unit, meaning.
std::string config_reference_text();

// Subcommand bodies. `out_override` (when nonempty) replaces run.out. Each
// writes its CSVs plus manifest.txt; identical inputs give bit-identical
// files. Runtime failures are rethrown with command context prepended.
void run_propagate(RunConfig& rc, const std::string& out_override);
void run_compare(RunConfig& rc, const std::string& out_override);
void run_crossings(RunConfig& rc, const std::string& out_override);
void run_coeffs(RunConfig& rc, const std::string& out_override);
void run_diagnose(RunConfig& rc, const std::string& out_override);

// git blob hash (sha1 of "blob <size>\0" + bytes) of a file's contents.
std::string git_blob_hash(const std::string& path);

} // namespace resorb

#endif
