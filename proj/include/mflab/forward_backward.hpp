#ifndef MFLAB_FORWARD_BACKWARD_HPP
#define MFLAB_FORWARD_BACKWARD_HPP

#include "mflab/architecture.hpp"
#include "mflab/state.hpp"

#include <cstdint>

namespace mflab {

// Per-input forward values: H[i-1] is the layer-i table, act[i-1] caches the
// activation applied to it (feeding layer i+1). yhat is the network output.
struct ForwardCache {
    std::vector<std::vector<double>> H;
    std::vector<std::vector<double>> act; // act[i-1] = varphi_i(H_i), i = 1..L-1
    double yhat = 0.0;
};

// Per-sample backward values, shaped like the parameter tables.
struct BackwardBundle {
    std::vector<std::vector<double>> delta_H; // delta_H[i-1] = layer-i table
    std::vector<double> delta_w1;             // n_1 x w1_dim
    std::vector<std::vector<double>> delta_w; // layer i in 2..L at [i-2]
    std::vector<std::vector<double>> delta_b;

    double max_abs() const;
};

void forward(const ParamState& state, const ArchitectureSpec& spec, const Vec& x,
             ForwardCache& cache);

inline ForwardCache forward(const ParamState& state, const ArchitectureSpec& spec,
                            const Vec& x) {
    ForwardCache c;
    forward(state, spec, x, c);
    return c;
}

void backward(const ParamState& state, const ArchitectureSpec& spec, const Vec& x,
              double y, const ForwardCache& cache, BackwardBundle& bundle);

inline BackwardBundle backward(const ParamState& state, const ArchitectureSpec& spec,
                               const Vec& x, double y, const ForwardCache& cache) {
    BackwardBundle b;
    backward(state, spec, x, y, cache, b);
    return b;
}

// The per-sample objective the backward recursion differentiates: the loss at
// (x, y) plus all regularizer terms with their 1/n normalizations.
double sample_loss(const ParamState& state, const ArchitectureSpec& spec, const Vec& x,
                   double y);

// Maximum relative error between the backward bundle (rescaled to plain
// partial derivatives) and central finite differences of sample_loss, over a
// sampled set of parameters. step must be positive.
double grad_check(const ParamState& state, const ArchitectureSpec& spec, const Vec& x,
                  double y, double step, int max_params = 512,
                  std::uint64_t rng_seed = 17);

} // namespace mflab

#endif
