#ifndef MFLAB_EXPERIMENTS_HPP
#define MFLAB_EXPERIMENTS_HPP

#include "mflab/convergence.hpp"
#include "mflab/coupling.hpp"
#include "mflab/mf_solver.hpp"
#include "mflab/reduced.hpp"
#include "mflab/sgd.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mflab {

inline constexpr const char* kVersion = "0.1.0";

struct MetricRow {
    std::string experiment;
    std::uint64_t seed = 0;
    std::string knob;
    double knob_value = 0.0;
    std::string metric;
    double value = 0.0;
};

struct MetricReport {
    std::vector<MetricRow> rows;

    void add(const std::string& exp, std::uint64_t seed, const std::string& knob,
             double knob_value, const std::string& metric, double value) {
        rows.push_back({exp, seed, knob, knob_value, metric, value});
    }
};

struct SlopeFit {
    double slope = 0.0;
    double stderr_ = 0.0;
};

// Ordinary least squares on (log knob, log metric). Needs at least three
// distinct knob values and strictly positive metrics.
SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& rows);

double median(std::vector<double> values);

// ---------------------------------------------------------------------------
// named systems shared by experiments, tests and the acceptance suite

// Two-layer tanh/huber teacher-labelled system for the scaling experiments:
// plain fully-connected architecture, gaussian first-layer law, bounded
// second-layer law, point-mass bias.
struct ScalingSystem {
    ArchitectureSpec spec;
    InitLawSpec laws;
    Dataset data;
    int d = 3;
};

ScalingSystem make_scaling_system(int dataset_size = 64, int d = 3,
                                  std::uint64_t data_seed = 777);

// Scalar linear-decay system: single first-layer weight row under a unit
// quadratic penalty and a constant-zero loss chain, so every coordinate obeys
// dw/dt = -w exactly.
struct DecaySystem {
    ArchitectureSpec spec;
    Dataset data;
    ParamState init;
};

DecaySystem make_decay_system();

// Five-layer constant-bias tanh system for the translation / reduced-dynamics
// experiments.
struct DeepSystem {
    ArchitectureSpec spec;
    InitLawSpec laws;                       // i.i.d. laws, constant biases
    std::vector<QuadratureMeasure> measures; // atomized variant of the laws
    std::vector<double> bias_consts;
    Dataset data;
};

DeepSystem make_deep_system(bool atomized, int dataset_size = 16,
                            std::uint64_t data_seed = 778);

// ---------------------------------------------------------------------------
// experiment drivers (also the acceptance-criteria entry points)

struct GradcheckOutcome {
    std::vector<double> max_rel_errors; // one per instance
};
GradcheckOutcome run_gradcheck(int instances, std::uint64_t seed, double step = 1e-5);

struct PicardOutcome {
    PicardReport report;
    double sup_err_vs_exact = 0.0;  // against e^{-t} on the decay system
    double sup_err_vs_rk4 = 0.0;    // against integrate_particle
    bool ratios_decreasing = true;  // residual ratio test on the tail
};
PicardOutcome run_picard_decay(double T, double dt, double tol, int k_max);

struct EpsScalingOutcome {
    std::vector<double> eps;
    std::vector<std::vector<double>> distances; // [eps][seed]
    std::vector<double> medians;
    bool has_slope = false; // needs >= 3 distinct step sizes
    SlopeFit slope;
};
EpsScalingOutcome run_eps_scaling(int n, const std::vector<double>& eps_list,
                                  const std::vector<std::uint64_t>& seeds, double T,
                                  int dataset_size, int threads = 1);

struct WidthScalingOutcome {
    std::vector<int> widths;
    std::vector<std::vector<double>> distances; // [width][seed]
    std::vector<std::vector<double>> psi_gaps;  // clamped-identity gap per run
    std::vector<double> median_distance;
    std::vector<double> median_gap;
    bool has_slope = false;
    SlopeFit slope;
};
WidthScalingOutcome run_width_scaling(const std::vector<int>& widths, int n_ref,
                                      const std::vector<std::uint64_t>& seeds, double T,
                                      double dt, int dataset_size, int stride = 10,
                                      int threads = 1);

struct TranslationOutcome {
    std::vector<int> widths;
    // [width][seed] spreads of the layer-2 and layer-3 displacement tables
    std::vector<std::vector<double>> spread_layer2;
    std::vector<std::vector<double>> spread_layer3;
};
TranslationOutcome run_translation(const std::vector<int>& widths,
                                   const std::vector<std::uint64_t>& seeds, double t,
                                   double dt, int threads = 1);

struct MeasurabilityOutcome {
    std::vector<int> widths;
    std::vector<std::vector<double>> gaps; // [width][seed], layer 3
    double duplication_asymmetry = 0.0;    // exact-symmetry probe
};
MeasurabilityOutcome run_measurability(const std::vector<int>& widths,
                                       const std::vector<std::uint64_t>& seeds, double T,
                                       double dt, int threads = 1);

struct GlobalConvOutcome {
    ConvergenceReport report;
    TrajectoryLog log;
    double drift_tail_first = 0.0;  // mean drift over [T/2, 3T/4]
    double drift_tail_second = 0.0; // mean drift over [3T/4, T]
    bool barrier_held = true;       // loss stays under the baseline once below
};
GlobalConvOutcome run_global_conv(const ConvergenceConfig& cfg, std::uint64_t seed,
                                  double dt, int stride);

struct PdeResidualOutcome {
    std::vector<double> dt_probes;
    std::vector<double> residuals;
};
PdeResidualOutcome run_pde_residual(int particles, double T, double dt, double t_eval,
                                    const std::vector<double>& dt_probes,
                                    std::uint64_t seed);

// ---------------------------------------------------------------------------
// config-driven entry point used by the CLI: parses the JSON experiment
// config, dispatches, writes results.csv / manifest.json (and per-trajectory
// summaries where the experiment produces them) into out_dir.
MetricReport run_experiment(const std::string& config_json, const std::string& out_dir,
                            int seed_offset = 0, int threads = 1);

void write_results_csv(const MetricReport& report, const std::string& path);

} // namespace mflab

#endif
