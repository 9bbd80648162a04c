#ifndef MFLAB_REDUCED_HPP
#define MFLAB_REDUCED_HPP

#include "mflab/coupling.hpp"
#include "mflab/mf_solver.hpp"
#include "mflab/state.hpp"

#include <cstdint>

namespace mflab {

// Finite quadrature representation of a per-layer initialization measure.
struct QuadratureMeasure {
    std::vector<Vec> atoms;      // layerformat: vectors at layer 1, scalars above
    std::vector<double> weights; // nonnegative, summing to 1

    std::size_t size() const { return atoms.size(); }
    void validate() const;

    static QuadratureMeasure equal_weight(std::vector<Vec> atoms);
    static QuadratureMeasure scalar_atoms(std::vector<double> values,
                                          std::vector<double> weights = {});
    LawSpec to_law() const; // discrete law with the same atoms and weights
};

// State of the simplified i.i.d./constant-bias dynamics: starred tables
// indexed by initialization atoms instead of neuron indices. Requires L >= 5
// so the three index bands (2, middle, L-1) are distinct.
struct ReducedState {
    int L = 5;
    int w1_dim = 0;
    std::vector<Vec> w1_star;                // over rho_w^1 atoms
    std::vector<double> w2_star;             // (a1, a2) at [a2 * m1 + a1]
    std::vector<std::vector<double>> wi_star; // layers 3..L-2, each over rho_w^i atoms
    std::vector<double> wLm1_star;           // (a_{L-1}, a_L) at [aL * m_{L-1} + a_{L-1}]
    std::vector<double> wL_star;             // over rho_w^L atoms
    std::vector<double> b_star;              // b_i for i in {2..L}\{L-1}, index i-2 skipping L-1
    std::vector<double> bLm1_star;           // over rho_w^L atoms
    double time = 0.0;

    double& bi_star(int i);
    double bi_star(int i) const;
    double max_abs() const;
};

struct ReducedTrajectory {
    std::vector<double> times;
    std::vector<ReducedState> states;
};

// Starred dynamics: quadrature measures rho_w^1..rho_w^L plus constant
// initial biases B_2..B_L. Integrals over the measures become weighted sums
// over the atoms.
ReducedTrajectory integrate_reduced(const std::vector<QuadratureMeasure>& w_measures,
                                    const std::vector<double>& bias_consts,
                                    const ArchitectureSpec& spec, const Dataset& data,
                                    const TimeGrid& grid);

// Particle system initialized i.i.d. from the quadrature atoms, with the
// atom assignment of every entry kept for later grouping.
struct AtomizedSystem {
    ParticleState init;
    std::vector<int> w1_atoms;
    std::vector<std::vector<int>> w_atoms; // layers 2..L
};

AtomizedSystem sample_atomized_system(const std::vector<QuadratureMeasure>& w_measures,
                                      const std::vector<double>& bias_consts,
                                      const std::vector<int>& widths, int w1_dim,
                                      std::uint64_t seed);

// Sup over times <= T and over layer-i atoms of |group mean of the particle
// trajectory - starred prediction|, where particles are grouped by their own
// initialization atom. Valid for the middle band 3 <= i <= L-2.
double reduced_vs_particle_gap(const ReducedTrajectory& reduced,
                               const TrajectoryLog& particle_log,
                               const AtomizedSystem& system, int layer, double T);

// Displacement statistics of one layer's weight table at time t: every entry's
// move from its initialization, summarized by (mean, max - min). Requires the
// probed layer to carry no weight regularizer.
struct TranslationProfile {
    double mean_displacement = 0.0;
    double spread = 0.0;
};

TranslationProfile translation_profile(const TrajectoryLog& particle_log,
                                       const ArchitectureSpec& spec, int layer, double t);

} // namespace mflab

#endif
