#ifndef MFLAB_COUPLING_HPP
#define MFLAB_COUPLING_HPP

#include "mflab/state.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace mflab {

// One per-entry initialization law. Laws at layers >= 2 must have bounded
// support (the embedding's sup-norm condition); layer 1 may be unbounded but
// stays within the sub-Gaussian family. "Epigraph" draws uniformly from a
// slab of height `slab` sitting on the graph of the constant function
// u -> level, which realizes a support containing that graph.
struct LawSpec {
    enum class Kind { Gaussian, Uniform, Point, Epigraph, Discrete };
    Kind kind = Kind::Point;
    double mu = 0.0, sigma = 1.0;  // gaussian
    double a = 0.0, b = 1.0;       // uniform
    double c = 0.0;                // point mass
    double level = 0.0, slab = 1.0; // epigraph slab
    std::vector<Vec> atoms;        // discrete support (vectors for layer 1)
    std::vector<double> probs;     // empty = uniform over atoms

    std::string name() const;
    bool bounded() const { return kind != Kind::Gaussian; }

    static LawSpec gaussian(double mu, double sigma);
    static LawSpec uniform(double a, double b);
    static LawSpec point(double c);
    static LawSpec epigraph(double level, double slab);
    static LawSpec discrete(std::vector<Vec> atoms, std::vector<double> probs = {});
};

struct InitLawSpec {
    std::vector<LawSpec> w_laws; // size L
    std::vector<LawSpec> b_laws; // size L-1, for layers 2..L; last must be a point mass
    bool enforce_bounded = true;

    void validate(int L) const;
};

// Finite-resolution realization of a neuronal embedding: every entry is
// generated by a stream keyed on (master_seed, layer, j, k) only, so the
// table restricted to a sub-block coincides with the table generated directly
// at the smaller resolution.
struct EmbeddingTable {
    std::uint64_t master_seed = 0;
    std::vector<int> resolution; // widths of the realized tables
    int w1_dim = 0;
    InitLawSpec laws;
    ParamState tables;

    // atom index per entry when the matching law is Discrete, else empty
    std::vector<int> w1_atoms;
    std::vector<std::vector<int>> w_atoms;
    std::vector<std::vector<int>> b_atoms;
};

EmbeddingTable sample_embedding(const InitLawSpec& laws,
                                const std::vector<int>& resolution, int w1_dim,
                                std::uint64_t master_seed);

// Network and particle-system initializations sliced from one table; the
// index map is the identity on the shared sub-block, so the network initial
// state equals the restriction of the particle one exactly.
struct CoupledPair {
    NetworkState nn_init;
    ParticleState mf_init;
};

CoupledPair couple(const EmbeddingTable& table, const std::vector<int>& nn_widths);

void dump_embedding(const EmbeddingTable& table, const std::string& path);

// ---------------------------------------------------------------------------
// trajectory distance of the coupling experiments: sup over shared snapshot
// times and over the shared index block of per-entry deviations (rows of the
// first layer compared in the Hilbert norm). epsilon > 0 additionally checks
// that the first log lives on the step grid of that step size; pass 0 when
// both trajectories are continuous-time.
double traj_distance(const TrajectoryLog& nn_log, const TrajectoryLog& mf_log,
                     const CoupledPair& pair, double epsilon, double T);

// Sup over shared snapshot times of the gap between the two sides' empirical
// neuron averages of E_Z[psi(H_layer)].
double test_function_gap(const TrajectoryLog& nn_log, const TrajectoryLog& mf_log,
                         const CoupledPair& pair, int layer,
                         const std::function<double(double)>& psi, const Dataset& data,
                         const ArchitectureSpec& spec, double T);

// Same for test functions of (Y, yhat).
double output_function_gap(const TrajectoryLog& nn_log, const TrajectoryLog& mf_log,
                           const std::function<double(double, double)>& psi,
                           const Dataset& data, const ArchitectureSpec& spec, double T);

} // namespace mflab

#endif
