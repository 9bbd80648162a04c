#ifndef MFLAB_SGD_HPP
#define MFLAB_SGD_HPP

#include "mflab/forward_backward.hpp"
#include "mflab/state.hpp"

#include <cstdint>

namespace mflab {

struct SgdConfig {
    double epsilon = 1e-3;   // step size, <= 1
    double horizon_T = 1.0;  // terminal continuous time; steps = floor(T/eps)
    int record_stride = 0;   // 0 = auto: max(1, floor(0.01 * T/eps))
    std::uint64_t data_seed = 0;

    void validate() const;
    long long steps() const;
    int effective_stride(long long steps) const;
};

// One update of every parameter with its schedule evaluated at t = step*eps.
// The input state is left untouched.
ParamState sgd_step(const ParamState& state, const ArchitectureSpec& spec, const Vec& x,
                    double y, long long t_step, const SgdConfig& cfg);

// Runs floor(T/eps) steps, drawing one sample per step uniformly (with
// replacement) from the dataset. Snapshot times are step * eps.
TrajectoryLog train_sgd(const ParamState& init, const ArchitectureSpec& spec,
                        const Dataset& data, const SgdConfig& cfg);

double population_loss(const ParamState& state, const ArchitectureSpec& spec,
                       const Dataset& data);

} // namespace mflab

#endif
