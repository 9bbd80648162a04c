#ifndef MFLAB_CONVERGENCE_HPP
#define MFLAB_CONVERGENCE_HPP

#include "mflab/coupling.hpp"
#include "mflab/mf_solver.hpp"
#include "mflab/sgd.hpp"
#include "mflab/state.hpp"

#include <cstdint>
#include <functional>

namespace mflab {

// Two- and three-layer training testbeds: no biases, no input-bias weight,
// nonlinear output map, labels produced by a teacher of the same class.
struct ConvergenceConfig {
    enum class Which { TwoLayer, ThreeLayer };
    Which which = Which::TwoLayer;
    int d1 = 3;                   // input dimension; inputs carry a trailing 1
    std::vector<int> widths;      // n_1 (two-layer) or n_1, n_2 (three-layer)
    std::string act1 = "tanh";    // universal-approximation slot: tanh|sigmoid|gauss
    std::string act2 = "tanh";    // two-layer: output map; three-layer: hidden
    std::string act3 = "sleaky(0.2)"; // three-layer output map
    std::string loss = "huber(1)";
    int teacher_width = 3;
    double label_noise = 0.0;     // 0 keeps the teacher realizable
    int dataset_size = 128;
    double T = 50.0;
    bool freeze_w3 = false;       // three-layer: xi_3^w = 0
    LawSpec w1_law = LawSpec::gaussian(0.0, 1.0);
    LawSpec w2_law = LawSpec::epigraph(-1.0, 2.0);
    LawSpec w3_law = LawSpec::uniform(0.5, 1.5);

    int layers() const { return which == Which::TwoLayer ? 2 : 3; }
    void validate() const;
};

struct ConvergenceSystem {
    ParticleState init;
    ArchitectureSpec spec;
    Dataset data;
    ParamState teacher;         // label generator, a small net of the same class
    double baseline_loss = 0.0; // E_Z[loss(Y, phi_out(0))]
};

ConvergenceSystem build_convergence_system(const ConvergenceConfig& cfg,
                                           std::uint64_t seed);

struct ConvergenceReport {
    std::vector<double> times;
    std::vector<double> loss_curve;
    double final_loss = 0.0;
    double baseline_loss = 0.0;
    std::vector<double> drift; // max over particles of |d/dt w_2| per snapshot
    double support_coverage = 1.0; // fraction of probe balls holding >= 1 particle
    bool loss_monotone = false;    // nonincreasing within per-step tolerance
    double max_loss_increase = 0.0;
};

// Loss curve, baseline, the layer-2 drift statistic and a first-layer support
// probe over a deterministic grid of balls. The monotonicity tolerance is per
// integrator step; a positive dt converts snapshot spans into step counts.
ConvergenceReport convergence_diagnostics(const TrajectoryLog& log,
                                          const ArchitectureSpec& spec,
                                          const Dataset& data, double baseline,
                                          double monotone_tol = 1e-8, double dt = 0.0);

// Coverage of the w_1 point cloud at one state: fraction of `ball_count`
// keyed-random centers within `center_radius` whose `ball_radius`-ball holds
// at least one particle.
double support_probe(const ParamState& state, double center_radius, double ball_radius,
                     int ball_count, std::uint64_t seed);

// Test function on (w1, w2) pairs with its gradient, for the weak-form check.
struct PairTestFunction {
    std::function<double(const Vec&, double)> value;
    std::function<void(const Vec&, double, Vec&, double&)> gradient;
};

PairTestFunction gaussian_bump(const Vec& center_w1, double center_w2, double width);

// Weak-form residual of the two-layer distributional equation at time t:
// | d/dt mean_j psi(w1, w2) + mean_j <grad psi, G> | with the time derivative
// taken by central difference at dt_probe and G evaluated on the empirical
// particle measure.
double weak_pde_residual(const TrajectoryLog& log, const ArchitectureSpec& spec,
                         const Dataset& data, const PairTestFunction& psi, double t,
                         double dt_probe);

} // namespace mflab

#endif
