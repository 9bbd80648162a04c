#include "mflab/mf_solver.hpp"
#include "mflab/norms.hpp"
#include "mflab/sgd.hpp"

#include <cmath>

namespace mflab {

namespace {
constexpr double kBlowupThreshold = 1e12;
}

void TimeGrid::validate() const {
    if (dt <= 0.0) throw std::invalid_argument("grid step must be positive");
    if (t_end < 0.0) throw std::invalid_argument("grid horizon must be nonnegative");
    if (t_end > 0.0 && dt > t_end + 1e-12)
        throw std::invalid_argument("grid step larger than horizon");
    if (snapshot_stride < 1) throw std::invalid_argument("snapshot stride must be >= 1");
    const double rec = static_cast<double>(steps()) * dt;
    if (std::abs(rec - t_end) > 1e-12)
        throw std::invalid_argument("grid step does not divide the horizon");
}

long long TimeGrid::steps() const { return std::llround(t_end / dt); }

ParamState particle_rhs(const ParticleState& state, const ArchitectureSpec& spec,
                        const Dataset& data, double t) {
    data.validate(spec.x_dim);
    ParamState deriv = make_state(state.widths, state.w1_dim);

    ForwardCache cache;
    BackwardBundle bundle;
    const double inv_n = 1.0 / static_cast<double>(data.size());
    for (std::size_t s = 0; s < data.size(); ++s) {
        forward(state, spec, data.xs[s], cache);
        backward(state, spec, data.xs[s], data.ys[s], cache, bundle);
        for (std::size_t i = 0; i < deriv.w1.size(); ++i)
            deriv.w1[i] += inv_n * bundle.delta_w1[i];
        for (std::size_t i = 0; i < deriv.w.size(); ++i) {
            const auto& src = bundle.delta_w[i];
            auto& dst = deriv.w[i];
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += inv_n * src[k];
        }
        for (std::size_t i = 0; i < deriv.b.size(); ++i) {
            const auto& src = bundle.delta_b[i];
            auto& dst = deriv.b[i];
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += inv_n * src[k];
        }
    }

    const double lr1 = -spec.xi_w(1, t);
    for (auto& v : deriv.w1) v *= lr1;
    for (int i = 2; i <= spec.L; ++i) {
        const double lrw = -spec.xi_w(i, t);
        for (auto& v : deriv.w[static_cast<std::size_t>(i) - 2]) v *= lrw;
        const double lrb = -spec.xi_b(i, t);
        for (auto& v : deriv.b[static_cast<std::size_t>(i) - 2]) v *= lrb;
    }
    deriv.time = t;
    return deriv;
}

TrajectoryLog integrate_particle(const ParticleState& init, const ArchitectureSpec& spec,
                                 const Dataset& data, const TimeGrid& grid) {
    grid.validate();
    spec.validate();
    data.validate(spec.x_dim);

    const long long steps = grid.steps();
    TrajectoryLog log;
    RunningTrajectoryNorm tracker(spec.growth_p);

    ParamState state = init;
    state.time = 0.0;
    tracker.absorb(state);

    auto snapshot = [&](double t, double max_update) {
        log.times.push_back(t);
        log.states.push_back(state);
        log.states.back().time = t;
        SnapshotDiag d;
        d.norm_W = tracker.value();
        d.loss = population_loss(state, spec, data);
        d.max_update = max_update;
        log.diags.push_back(d);
    };
    snapshot(0.0, 0.0);

    for (long long k = 0; k < steps; ++k) {
        const double t = grid.time_at(k);
        double max_update = 0.0;
        if (grid.scheme == TimeGrid::Scheme::Euler) {
            ParamState k1 = particle_rhs(state, spec, data, t);
            max_update = grid.dt * k1.max_abs();
            axpy(state, grid.dt, k1);
        } else {
            ParamState k1 = particle_rhs(state, spec, data, t);
            ParamState y2 = state;
            axpy(y2, 0.5 * grid.dt, k1);
            ParamState k2 = particle_rhs(y2, spec, data, t + 0.5 * grid.dt);
            ParamState y3 = state;
            axpy(y3, 0.5 * grid.dt, k2);
            ParamState k3 = particle_rhs(y3, spec, data, t + 0.5 * grid.dt);
            ParamState y4 = state;
            axpy(y4, grid.dt, k3);
            ParamState k4 = particle_rhs(y4, spec, data, t + grid.dt);
            const double w = grid.dt / 6.0;
            axpy(state, w, k1);
            axpy(state, 2.0 * w, k2);
            axpy(state, 2.0 * w, k3);
            axpy(state, w, k4);
            max_update = grid.dt * k1.max_abs();
        }
        state.time = grid.time_at(k + 1);
        if (state.max_abs() > kBlowupThreshold) throw BlowupError(state.time);
        tracker.absorb(state);
        if ((k + 1) % grid.snapshot_stride == 0 || k + 1 == steps)
            snapshot(state.time, max_update);
    }
    return log;
}

TrajectoryLog picard_map(const TrajectoryLog& traj, const ArchitectureSpec& spec,
                         const Dataset& data, const TimeGrid& grid) {
    grid.validate();
    const long long steps = grid.steps();
    if (traj.size() != static_cast<std::size_t>(steps) + 1)
        throw std::invalid_argument("input trajectory is not defined on the grid");
    for (long long k = 0; k <= steps; ++k)
        if (std::abs(traj.times[static_cast<std::size_t>(k)] - grid.time_at(k)) > 1e-9)
            throw std::invalid_argument("input trajectory times do not match the grid");

    TrajectoryLog out;
    out.times.reserve(traj.size());
    out.states.reserve(traj.size());
    out.diags.resize(traj.size());

    // cumulative trapezoid of the rhs along the input trajectory
    ParamState integral = make_state(traj.states[0].widths, traj.states[0].w1_dim);
    ParamState prev_rhs = particle_rhs(traj.states[0], spec, data, 0.0);
    ParamState current = traj.states[0];
    current.time = 0.0;
    out.times.push_back(0.0);
    out.states.push_back(current);

    for (long long k = 1; k <= steps; ++k) {
        const double t = grid.time_at(k);
        ParamState rhs = particle_rhs(traj.states[static_cast<std::size_t>(k)], spec, data, t);
        axpy(integral, 0.5 * grid.dt, prev_rhs);
        axpy(integral, 0.5 * grid.dt, rhs);
        prev_rhs = std::move(rhs);

        ParamState next = traj.states[0];
        axpy(next, 1.0, integral);
        next.time = t;
        if (next.max_abs() > kBlowupThreshold) throw BlowupError(t);
        out.times.push_back(t);
        out.states.push_back(std::move(next));
    }
    return out;
}

std::pair<TrajectoryLog, PicardReport> picard_solve(const ParticleState& init,
                                                    const ArchitectureSpec& spec,
                                                    const Dataset& data,
                                                    const TimeGrid& grid, int k_max,
                                                    double tol) {
    if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");
    if (tol <= 0.0) throw std::invalid_argument("tolerance must be positive");
    grid.validate();

    const long long steps = grid.steps();
    TrajectoryLog current;
    current.times.resize(static_cast<std::size_t>(steps) + 1);
    current.states.assign(static_cast<std::size_t>(steps) + 1, init);
    current.diags.resize(static_cast<std::size_t>(steps) + 1);
    for (long long k = 0; k <= steps; ++k) {
        current.times[static_cast<std::size_t>(k)] = grid.time_at(k);
        current.states[static_cast<std::size_t>(k)].time = grid.time_at(k);
    }

    PicardReport report;
    for (int it = 0; it < k_max; ++it) {
        TrajectoryLog next = picard_map(current, spec, data, grid);
        double resid = 0.0;
        for (std::size_t k = 0; k < next.size(); ++k)
            resid = std::max(resid, state_diff_sup(next.states[k], current.states[k]));
        report.residuals.push_back(resid);
        report.iterations_used = it + 1;
        current = std::move(next);
        if (resid <= tol) {
            report.converged = true;
            break;
        }
    }
    return {std::move(current), report};
}

} // namespace mflab
