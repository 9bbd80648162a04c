#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mflab/experiments.hpp"
#include "mflab/keyed_rng.hpp"
#include "mflab/mf_solver.hpp"
#include "mflab/norms.hpp"
#include "mflab/coupling.hpp"

#include <cmath>

using namespace mflab;

namespace {

TimeGrid grid_of(double T, double dt, TimeGrid::Scheme sch, int stride = 1) {
    TimeGrid g;
    g.t_end = T;
    g.dt = dt;
    g.scheme = sch;
    g.snapshot_stride = stride;
    return g;
}

} // namespace

TEST_CASE("grid validation") {
    CHECK_THROWS(grid_of(1.0, 0.0, TimeGrid::Scheme::Euler).validate());
    CHECK_THROWS(grid_of(1.0, 3e-1, TimeGrid::Scheme::Euler).validate()); // no divide
    CHECK_THROWS(grid_of(0.5, 0.7, TimeGrid::Scheme::Euler).validate());  // dt > T
    CHECK_NOTHROW(grid_of(1.0, 1e-3, TimeGrid::Scheme::Rk4).validate());
    CHECK(grid_of(1.0, 1e-3, TimeGrid::Scheme::Rk4).steps() == 1000);
}

TEST_CASE("zero schedules give a zero derivative and a frozen trajectory") {
    DecaySystem sys = make_decay_system();
    sys.spec.w_schedules.assign(2, Schedule::zero());
    sys.spec.b_schedules.assign(1, Schedule::zero());
    ParamState rhs = particle_rhs(sys.init, sys.spec, sys.data, 0.0);
    CHECK(rhs.max_abs() == doctest::Approx(0.0));
    TrajectoryLog log =
        integrate_particle(sys.init, sys.spec, sys.data, grid_of(0.5, 0.05, TimeGrid::Scheme::Rk4));
    for (const auto& s : log.states) CHECK(s.w1 == sys.init.w1);
}

TEST_CASE("decay system: rhs equals -w") {
    DecaySystem sys = make_decay_system();
    ParamState rhs = particle_rhs(sys.init, sys.spec, sys.data, 0.0);
    CHECK(rhs.w1[0] == doctest::Approx(-1.0));
    CHECK(rhs.w1[1] == doctest::Approx(-1.0));
    CHECK(rhs.w[0][0] == doctest::Approx(0.0));
}

TEST_CASE("rhs is invariant under particle duplication") {
    ScalingSystem sys = make_scaling_system(8);
    EmbeddingTable table = sample_embedding(sys.laws, {5, 1}, sys.spec.w1_dim, 9);
    ParamState s = table.tables;
    ParamState d = make_state({10, 1}, s.w1_dim);
    for (int j = 0; j < 10; ++j)
        for (int c = 0; c < s.w1_dim; ++c) d.w1_row(j)[c] = s.w1_row(j % 5)[c];
    for (int j = 0; j < 10; ++j) d.wi(2, j, 0) = s.wi(2, j % 5, 0);
    d.bi(2, 0) = s.bi(2, 0);

    ParamState rs = particle_rhs(s, sys.spec, sys.data, 0.0);
    ParamState rd = particle_rhs(d, sys.spec, sys.data, 0.0);
    for (int j = 0; j < 10; ++j) {
        for (int c = 0; c < s.w1_dim; ++c)
            CHECK(rd.w1_row(j)[c] == doctest::Approx(rs.w1_row(j % 5)[c]).epsilon(1e-13));
        CHECK(rd.wi(2, j, 0) == doctest::Approx(rs.wi(2, j % 5, 0)).epsilon(1e-13));
    }
}

TEST_CASE("rk4 on the decay system reproduces exp(-t) to 1e-9") {
    DecaySystem sys = make_decay_system();
    TrajectoryLog log = integrate_particle(sys.init, sys.spec, sys.data,
                                           grid_of(1.0, 1e-3, TimeGrid::Scheme::Rk4));
    CHECK(std::abs(log.states.back().w1[0] - std::exp(-1.0)) < 1e-9);
}

TEST_CASE("euler halves its error when the step halves") {
    DecaySystem sys = make_decay_system();
    auto err_at = [&](double dt) {
        TrajectoryLog log = integrate_particle(sys.init, sys.spec, sys.data,
                                               grid_of(1.0, dt, TimeGrid::Scheme::Euler));
        return std::abs(log.states.back().w1[0] - std::exp(-1.0));
    };
    double e1 = err_at(2e-3);
    double e2 = err_at(1e-3);
    CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("picard map freezes the trajectory when schedules vanish") {
    DecaySystem sys = make_decay_system();
    sys.spec.w_schedules.assign(2, Schedule::zero());
    sys.spec.b_schedules.assign(1, Schedule::zero());
    TimeGrid g = grid_of(0.2, 0.02, TimeGrid::Scheme::Rk4);
    // arbitrary input trajectory with the right initialization
    TrajectoryLog in;
    for (long long k = 0; k <= g.steps(); ++k) {
        in.times.push_back(g.time_at(k));
        ParamState s = sys.init;
        s.w1[0] += 0.3 * static_cast<double>(k); // non-constant in time
        if (k == 0) s = sys.init;
        in.states.push_back(s);
    }
    in.diags.resize(in.size());
    TrajectoryLog out = picard_map(in, sys.spec, sys.data, g);
    for (const auto& s : out.states) CHECK(s.w1 == sys.init.w1);
}

TEST_CASE("picard map of the exact solution stays within quadrature error") {
    DecaySystem sys = make_decay_system();
    TimeGrid g = grid_of(1.0, 1e-2, TimeGrid::Scheme::Rk4);
    TrajectoryLog exact;
    for (long long k = 0; k <= g.steps(); ++k) {
        double t = g.time_at(k);
        exact.times.push_back(t);
        ParamState s = sys.init;
        s.w1[0] = std::exp(-t);
        s.w1[1] = std::exp(-t);
        exact.states.push_back(s);
    }
    exact.diags.resize(exact.size());
    TrajectoryLog image = picard_map(exact, sys.spec, sys.data, g);
    double resid = 0.0;
    for (std::size_t k = 0; k < image.size(); ++k)
        resid = std::max(resid, state_diff_sup(image.states[k], exact.states[k]));
    // trapezoid error of int exp(-s): (dt^2/12) * int |f''| per unit time
    const double bound = g.dt * g.dt / 12.0 * 1.0 * std::sqrt(2.0);
    CHECK(resid < 2.0 * bound);
    CHECK(resid > 0.0);
}

TEST_CASE("picard iterates reproduce the Taylor partial sums of exp(-t)") {
    DecaySystem sys = make_decay_system();
    TimeGrid g = grid_of(1.0, 1e-3, TimeGrid::Scheme::Rk4);
    TrajectoryLog w;
    for (long long k = 0; k <= g.steps(); ++k) {
        w.times.push_back(g.time_at(k));
        w.states.push_back(sys.init);
    }
    w.diags.resize(w.size());

    auto taylor = [](double t, int order) {
        double acc = 0.0, term = 1.0;
        for (int m = 0; m <= order; ++m) {
            acc += term;
            term *= -t / (m + 1);
        }
        return acc;
    };

    for (int it = 1; it <= 4; ++it) {
        w = picard_map(w, sys.spec, sys.data, g);
        double worst = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k)
            worst = std::max(worst,
                             std::abs(w.states[k].w1[0] - taylor(w.times[k], it)));
        CHECK(worst < 1e-5); // quadrature error only
    }
}

TEST_CASE("picard solve agrees with rk4 and converges fast on the decay system") {
    PicardOutcome out = run_picard_decay(1.0, 1e-3, 1e-8, 25);
    CHECK(out.report.converged);
    CHECK(out.report.iterations_used <= 25);
    CHECK(out.sup_err_vs_exact < 1e-6);
    CHECK(out.sup_err_vs_rk4 < 1e-6);
    CHECK(out.ratios_decreasing);
}

TEST_CASE("picard solve with zero schedules converges immediately") {
    DecaySystem sys = make_decay_system();
    sys.spec.w_schedules.assign(2, Schedule::zero());
    sys.spec.b_schedules.assign(1, Schedule::zero());
    auto [traj, rep] = picard_solve(sys.init, sys.spec, sys.data,
                                    grid_of(0.5, 0.05, TimeGrid::Scheme::Rk4), 5, 1e-12);
    CHECK(rep.converged);
    CHECK(rep.iterations_used == 1);
    CHECK(rep.residuals[0] == doctest::Approx(0.0));
}

TEST_CASE("fixed-point consistency of the integrated trajectory") {
    DecaySystem sys = make_decay_system();
    TimeGrid g = grid_of(1.0, 1e-2, TimeGrid::Scheme::Rk4);
    TrajectoryLog star = integrate_particle(sys.init, sys.spec, sys.data, g);
    TrajectoryLog image = picard_map(star, sys.spec, sys.data, g);
    double resid = 0.0;
    for (std::size_t k = 0; k < star.size(); ++k)
        resid = std::max(resid, state_diff_sup(image.states[k], star.states[k]));
    const double quad_err = g.dt * g.dt / 12.0 * 1.0 * std::sqrt(2.0) * g.t_end;
    CHECK(resid <= 10.0 * quad_err);
}

TEST_CASE("blow-up guard aborts a growing system") {
    DecaySystem sys = make_decay_system();
    // flip the sign of the penalty: dw/dt = +60 w
    sys.spec.w_regs[0] = Regularizer::parse("quad(-60)");
    CHECK_THROWS_AS(integrate_particle(sys.init, sys.spec, sys.data,
                                       grid_of(1.0, 1e-3, TimeGrid::Scheme::Rk4)),
                    BlowupError);
}

TEST_CASE("integration diagnostics track the running norm") {
    DecaySystem sys = make_decay_system();
    TrajectoryLog log = integrate_particle(sys.init, sys.spec, sys.data,
                                           grid_of(1.0, 1e-2, TimeGrid::Scheme::Rk4, 10));
    // decaying system: the sup over time stays at the initial norm
    const double init_norm = std::sqrt(2.0);
    for (const auto& d : log.diags) CHECK(d.norm_W == doctest::Approx(init_norm));
}

TEST_CASE("euler approaches the rk4 trajectory as the step shrinks") {
    ScalingSystem sys = make_scaling_system(16);
    EmbeddingTable table = sample_embedding(sys.laws, {20, 1}, sys.spec.w1_dim, 2);
    TrajectoryLog ref = integrate_particle(table.tables, sys.spec, sys.data,
                                           grid_of(0.5, 2.5e-3, TimeGrid::Scheme::Rk4, 20));
    auto euler_gap = [&](double dt, int stride) {
        TrajectoryLog e = integrate_particle(table.tables, sys.spec, sys.data,
                                             grid_of(0.5, dt, TimeGrid::Scheme::Euler, stride));
        double gap = 0.0;
        for (std::size_t k = 0; k < ref.size(); ++k)
            gap = std::max(gap, state_diff_sup(e.states[k], ref.states[k]));
        return gap;
    };
    double g1 = euler_gap(0.05, 1);
    double g2 = euler_gap(0.025, 2);
    double g3 = euler_gap(0.0125, 4);
    CHECK(g2 < g1);
    CHECK(g3 < g2);
    CHECK(g2 / g3 == doctest::Approx(2.0).epsilon(0.25)); // first-order scheme
}

TEST_CASE("trajectories stay time-shift Lipschitz along the run") {
    ScalingSystem sys = make_scaling_system(16);
    EmbeddingTable table = sample_embedding(sys.laws, {30, 1}, sys.spec.w1_dim, 6);
    TrajectoryLog log = integrate_particle(table.tables, sys.spec, sys.data,
                                           grid_of(1.0, 5e-3, TimeGrid::Scheme::Rk4, 10));
    double early = 0.0, late = 0.0;
    for (std::size_t k = 1; k < log.size(); ++k) {
        double ratio = state_diff_sup(log.states[k], log.states[k - 1]) /
                       (log.times[k] - log.times[k - 1]);
        (log.times[k] <= 0.5 ? early : late) = std::max(log.times[k] <= 0.5 ? early : late, ratio);
    }
    CHECK(early > 0.0);
    CHECK(late < 5.0 * early + 1e-9); // no late-time derivative explosion
}
