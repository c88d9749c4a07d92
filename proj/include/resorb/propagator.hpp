#ifndef RESORB_PROPAGATOR_HPP
#define RESORB_PROPAGATOR_HPP

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "resorb/constants.hpp"
#include "resorb/distance.hpp"
#include "resorb/elements.hpp"
#include "resorb/hamiltonian.hpp"
#include "resorb/kepler.hpp"

namespace resorb {

// Integration state layout: (S, sigma, G, g, Z, z). Angles run unwrapped.
using Y6 = std::array<double, 6>;

Y6 to_y6(const ResonantState& y);
ResonantState from_y6(const Y6& y);

using FieldFn = std::function<Y6(double t, const Y6& y)>;

// One accepted Gauss collocation step: start state plus converged stage
// derivatives. The collocation polynomial they span is the dense output.
struct StageData {
    double t0 = 0.0, dt = 0.0;
    Y6 y0{};
    int s = 2;
    std::array<Y6, 3> g{};
};

struct StepControls {
    int stages = 2;        // collocation points: 2 (order 4) or 3 (order 6)
    double fp_tol = 1e-13; // scaled stage-increment tolerance
    int fp_max_iter = 50;
    std::array<double, 6> scale{1, 1, 1, 1, 1, 1};
};

// Solves the implicit stage equations by fixed-point sweeps, warm-started
// from `guess` when given. Throws NumericalFailure when fp_max_iter sweeps
// do not converge; callers halve dt and retry.
StageData collocation_stages(const FieldFn& f, double t, const Y6& y, double dt,
                             const StepControls& c,
                             const std::array<Y6, 3>* guess = nullptr);

Y6 step_endpoint(const StageData& st);
// The collocation polynomial and its derivative; `time` may sit anywhere in
// the step (and slightly outside, where it extrapolates).
Y6 dense_state(const StageData& st, double time);
Y6 dense_derivative(const StageData& st, double time);

struct PlanetModel {
    std::string name;
    OrbitShape shape;
    double mu = 0.0;
    int n_kernel = 0; // harmonic order of the kernel; 0 = secular average only
};

struct LongTermConfig {
    ResonanceSpec spec;
    std::vector<PlanetModel> planets;
    double n_planet = 0.0; // mean motion of the resonant partner [rad/day]
    double S5 = 0.0;       // conserved companion action (constant energy shift)
    QuadSpec quad;
    double dt = 0.5 * DAYS_PER_YEAR;
    double dt_min = 1e-3 * DAYS_PER_YEAR; // event-spacing floor
    int stages = 2;
    double fp_tol = 1e-13;
    int fp_max_iter = 50;
    int census_stride = 64; // accepted steps between full minima censuses
    int check_stride = 8;   // extracted-vs-plain audit cadence in the window
    double check_lo = 0.08; // au; window where both paths stay accurate
    double check_hi = 0.30;
    double check_tol = 1e-6;
    int grid_override = 0; // force every plain grid to this size (tests)
};

struct CrossingEvent {
    double t = 0.0; // days
    int planet = -1;
    int branch = 0;               // index of the crossed minimum
    double sigma_c = 0.0;         // critical phase of that minimum
    std::array<double, 5> diff{}; // energy-gradient jump over (S,G,Z,g,z)
    double dsigma_jump = 0.0;
    ResonantState state; // state on the singular set
};

struct GeneralizedSolution {
    std::vector<double> t;            // accepted endpoint times, t[0] = start
    std::vector<ResonantState> state; // matching states
    std::vector<StageData> steps;     // dense output, one per accepted step
    std::vector<CrossingEvent> events;

    const StageData& step_containing(double time) const;
    Y6 at(double time) const; // dense lookup, clamped to the covered span
};

class LongTermPropagator {
  public:
    explicit LongTermPropagator(LongTermConfig cfg);

    GeneralizedSolution run(const ResonantState& y0, double t0, double t1);

    // Derivative field under the currently frozen per-planet plans; exposed
    // so tests can probe one-sided limits around an event state.
    Y6 field(double t, const Y6& y) const;
    double energy(const Y6& y) const;

    struct Branch {
        Vec2 V;
        double d = 0.0, d_tilde = 0.0;
        int side = +1;
        bool active = false; // masked out of the band grid
    };
    struct Plan {
        int m = 0; // > 0: plain tensor grid; 0: extraction
        double d_min = 1e30;
        std::vector<Branch> branches;
    };
    const std::vector<Plan>& plans() const { return plans_; }

    void prepare(const ResonantState& y); // fresh census for every planet
    void flip_side(int planet, int branch);

  private:
    TwoOrbitConfig pair_config(const ResonantState& y, int j) const;
    void census(const ResonantState& y, int j);
    void refresh(const ResonantState& y, int j);
    void rebuild_policy(const ResonantState& y, int j);
    void audit_extraction(const ResonantState& y, int j) const;
    // Earliest sign change toward the opposite side along a step's dense
    // output; theta in step units, slope in au/day near the root.
    bool scan_events(const StageData& st, double& theta, double& slope, int& planet,
                     int& branch) const;

    LongTermConfig cfg_;
    std::vector<Plan> plans_;
};

// Signed separations of every tracked minimum of one planet sampled along
// the dense output: a fresh census at the start, warm Newton continuation
// afterwards. Tracking stops early when a branch bifurcates away.
struct DistanceSeries {
    std::vector<double> t;                     // days
    std::vector<std::vector<double>> branch_d; // [branch][sample]
    bool truncated = false;
};

DistanceSeries distance_history(const GeneralizedSolution& sol, const LongTermConfig& cfg,
                                int planet, int per_step = 4);

} // namespace resorb

#endif
