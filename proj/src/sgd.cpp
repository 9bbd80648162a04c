#include "mflab/sgd.hpp"
#include "mflab/keyed_rng.hpp"
#include "mflab/norms.hpp"

#include <cmath>
#include <stdexcept>

namespace mflab {

void SgdConfig::validate() const {
    if (epsilon <= 0.0 || epsilon > 1.0)
        throw std::invalid_argument("step size must lie in (0, 1]");
    if (horizon_T < 0.0) throw std::invalid_argument("horizon must be nonnegative");
    if (record_stride < 0) throw std::invalid_argument("record stride must be nonnegative");
}

long long SgdConfig::steps() const {
    return static_cast<long long>(std::floor(horizon_T / epsilon + 1e-9));
}

int SgdConfig::effective_stride(long long steps) const {
    if (record_stride > 0) return record_stride;
    return static_cast<int>(std::max<long long>(1, steps / 100));
}

namespace {

// applies one update in place; returns max |change|
double apply_update(ParamState& s, const ArchitectureSpec& spec, const BackwardBundle& g,
                    double eps, double t_cont) {
    double max_change = 0.0;
    const double lr1 = eps * spec.xi_w(1, t_cont);
    for (std::size_t i = 0; i < s.w1.size(); ++i) {
        double d = lr1 * g.delta_w1[i];
        s.w1[i] -= d;
        max_change = std::max(max_change, std::abs(d));
    }
    for (int i = 2; i <= spec.L; ++i) {
        const double lrw = eps * spec.xi_w(i, t_cont);
        auto& tw = s.w[static_cast<std::size_t>(i) - 2];
        const auto& gw = g.delta_w[static_cast<std::size_t>(i) - 2];
        for (std::size_t k = 0; k < tw.size(); ++k) {
            double d = lrw * gw[k];
            tw[k] -= d;
            max_change = std::max(max_change, std::abs(d));
        }
        const double lrb = eps * spec.xi_b(i, t_cont);
        auto& tb = s.b[static_cast<std::size_t>(i) - 2];
        const auto& gb = g.delta_b[static_cast<std::size_t>(i) - 2];
        for (std::size_t k = 0; k < tb.size(); ++k) {
            double d = lrb * gb[k];
            tb[k] -= d;
            max_change = std::max(max_change, std::abs(d));
        }
    }
    return max_change;
}

} // namespace

ParamState sgd_step(const ParamState& state, const ArchitectureSpec& spec, const Vec& x,
                    double y, long long t_step, const SgdConfig& cfg) {
    cfg.validate();
    ParamState next = state;
    ForwardCache cache;
    forward(state, spec, x, cache);
    BackwardBundle bundle;
    backward(state, spec, x, y, cache, bundle);
    const double t_cont = static_cast<double>(t_step) * cfg.epsilon;
    apply_update(next, spec, bundle, cfg.epsilon, t_cont);
    if (!next.finite()) throw std::runtime_error("non-finite parameter after SGD step");
    next.time = t_cont + cfg.epsilon;
    return next;
}

double population_loss(const ParamState& state, const ArchitectureSpec& spec,
                       const Dataset& data) {
    data.validate(spec.x_dim);
    ForwardCache cache;
    double s = 0.0;
    for (std::size_t k = 0; k < data.size(); ++k) {
        forward(state, spec, data.xs[k], cache);
        s += spec.loss.value(data.ys[k], cache.yhat);
    }
    return s / static_cast<double>(data.size());
}

TrajectoryLog train_sgd(const ParamState& init, const ArchitectureSpec& spec,
                        const Dataset& data, const SgdConfig& cfg) {
    cfg.validate();
    data.validate(spec.x_dim);
    spec.validate();

    const long long steps = cfg.steps();
    const int stride = cfg.effective_stride(steps);

    TrajectoryLog log;
    RunningTrajectoryNorm norm_tracker(spec.growth_p);

    ParamState state = init;
    state.time = 0.0;
    norm_tracker.absorb(state);

    auto snapshot = [&](const ParamState& s, double t, double max_update) {
        log.times.push_back(t);
        log.states.push_back(s);
        SnapshotDiag d;
        d.norm_W = norm_tracker.value();
        d.loss = population_loss(s, spec, data);
        d.max_update = max_update;
        log.diags.push_back(d);
    };
    snapshot(state, 0.0, 0.0);

    KeyedStream draws(cfg.data_seed);
    ForwardCache cache;
    BackwardBundle bundle;
    double last_update = 0.0;
    for (long long step = 0; step < steps; ++step) {
        const std::size_t pick = draws.next_index(data.size());
        const Vec& x = data.xs[pick];
        const double y = data.ys[pick];
        forward(state, spec, x, cache);
        backward(state, spec, x, y, cache, bundle);
        const double t_cont = static_cast<double>(step) * cfg.epsilon;
        last_update = apply_update(state, spec, bundle, cfg.epsilon, t_cont);
        if (!state.finite())
            throw std::runtime_error("non-finite parameter after SGD step " +
                                     std::to_string(step));
        state.time = static_cast<double>(step + 1) * cfg.epsilon;
        norm_tracker.absorb(state);
        if ((step + 1) % stride == 0 || step + 1 == steps)
            snapshot(state, state.time, last_update);
    }
    return log;
}

} // namespace mflab
