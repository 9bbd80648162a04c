#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mflab/experiments.hpp"
#include "mflab/keyed_rng.hpp"
#include "mflab/reduced.hpp"

#include <cmath>

using namespace mflab;

namespace {

ArchitectureSpec deep_fc(std::vector<std::string> wr = {}) {
    FcConfig cfg;
    cfg.d = 2;
    cfg.widths = {4, 4, 4, 4, 1};
    cfg.activations = {"tanh", "tanh", "tanh", "tanh"};
    cfg.loss = "huber(1)";
    cfg.w_regs = std::move(wr);
    return make_fc_architecture(cfg);
}

TimeGrid rk4_grid(double T, double dt, int stride = 1) {
    TimeGrid g;
    g.t_end = T;
    g.dt = dt;
    g.scheme = TimeGrid::Scheme::Rk4;
    g.snapshot_stride = stride;
    return g;
}

std::vector<QuadratureMeasure> point_measures_with_layer3(
    const std::vector<double>& layer3_atoms) {
    std::vector<QuadratureMeasure> m;
    m.push_back(QuadratureMeasure::equal_weight({Vec{0.4, -0.2, 0.3}}));
    m.push_back(QuadratureMeasure::scalar_atoms({0.6}));
    m.push_back(QuadratureMeasure::scalar_atoms(layer3_atoms));
    m.push_back(QuadratureMeasure::scalar_atoms({0.5}));
    m.push_back(QuadratureMeasure::scalar_atoms({0.8}));
    return m;
}

} // namespace

TEST_CASE("quadrature validation") {
    CHECK_THROWS(QuadratureMeasure::scalar_atoms({1.0, 2.0}, {0.7, 0.7}));
    CHECK_THROWS(QuadratureMeasure::scalar_atoms({1.0, 2.0}, {-0.5, 1.5}));
    QuadratureMeasure m = QuadratureMeasure::scalar_atoms({1.0, 2.0}, {0.25, 0.75});
    CHECK_NOTHROW(m.validate());
    CHECK(m.to_law().kind == LawSpec::Kind::Discrete);
}

TEST_CASE("the starred system requires at least five layers") {
    FcConfig cfg;
    cfg.d = 2;
    cfg.widths = {3, 3, 1};
    cfg.activations = {"tanh", "tanh"};
    ArchitectureSpec spec = make_fc_architecture(cfg);
    std::vector<QuadratureMeasure> m{QuadratureMeasure::equal_weight({Vec{0.1, 0.1, 0.1}}),
                                     QuadratureMeasure::scalar_atoms({0.5}),
                                     QuadratureMeasure::scalar_atoms({0.5})};
    Dataset data;
    data.xs = {Vec{0.0, 0.0}};
    data.ys = {0.0};
    CHECK_THROWS(integrate_reduced(m, {0.0, 0.0}, spec, data, rk4_grid(0.1, 0.05)));
}

TEST_CASE("zero schedules freeze every starred table") {
    DeepSystem sys = make_deep_system(true);
    ArchitectureSpec frozen = sys.spec;
    frozen.w_schedules.assign(5, Schedule::zero());
    frozen.b_schedules.assign(4, Schedule::zero());
    ReducedTrajectory traj = integrate_reduced(sys.measures, sys.bias_consts, frozen,
                                               sys.data, rk4_grid(0.2, 0.02));
    const ReducedState& first = traj.states.front();
    const ReducedState& last = traj.states.back();
    CHECK(last.w2_star == first.w2_star);
    CHECK(last.wi_star == first.wi_star);
    CHECK(last.wLm1_star == first.wLm1_star);
    CHECK(last.wL_star == first.wL_star);
    CHECK(last.b_star == first.b_star);
}

TEST_CASE("decay-only starred dynamics: every table shrinks by exp(-t)") {
    ArchitectureSpec spec =
        deep_fc({"quad(1)", "quad(1)", "quad(1)", "quad(1)", "quad(1)"});
    std::vector<QuadratureMeasure> m;
    m.push_back(QuadratureMeasure::equal_weight({Vec{1.0, -0.5, 0.25}, Vec{0.5, 0.5, 0.5}}));
    m.push_back(QuadratureMeasure::scalar_atoms({0.7, -0.4}));
    m.push_back(QuadratureMeasure::scalar_atoms({0.3, 0.9}));
    m.push_back(QuadratureMeasure::scalar_atoms({-0.6, 0.2}));
    m.push_back(QuadratureMeasure::scalar_atoms({0.0})); // keeps the loss chain silent
    Dataset data;
    data.xs = {Vec{0.3, -0.8}};
    data.ys = {0.0};
    ReducedTrajectory traj =
        integrate_reduced(m, {0.0, 0.0, 0.0, 0.0}, spec, data, rk4_grid(1.0, 1e-3, 100));

    const double shrink = std::exp(-1.0);
    const ReducedState& last = traj.states.back();
    for (std::size_t a = 0; a < m[0].size(); ++a)
        for (int c = 0; c < 3; ++c)
            CHECK(last.w1_star[a][c] ==
                  doctest::Approx(m[0].atoms[a][c] * shrink).epsilon(1e-8));
    for (std::size_t a2 = 0; a2 < 2; ++a2)
        for (std::size_t a1 = 0; a1 < 2; ++a1)
            CHECK(last.w2_star[a2 * 2 + a1] ==
                  doctest::Approx(m[1].atoms[a2][0] * shrink).epsilon(1e-8));
    for (std::size_t a = 0; a < 2; ++a)
        CHECK(last.wi_star[0][a] == doctest::Approx(m[2].atoms[a][0] * shrink).epsilon(1e-8));
    for (std::size_t a = 0; a < 2; ++a)
        CHECK(last.wLm1_star[a] == doctest::Approx(m[3].atoms[a][0] * shrink).epsilon(1e-8));
    CHECK(last.wL_star[0] == doctest::Approx(0.0));
}

TEST_CASE("one particle per atom reproduces the reduced trajectory") {
    ArchitectureSpec spec = deep_fc();
    std::vector<double> atoms3{-0.4, 0.2, 0.7};
    std::vector<QuadratureMeasure> m = point_measures_with_layer3(atoms3);
    Dataset data;
    data.xs = {Vec{0.4, -0.1}, Vec{-0.7, 0.9}};
    data.ys = {0.3, -0.2};

    TimeGrid grid = rk4_grid(0.5, 5e-3, 10);
    ReducedTrajectory reduced =
        integrate_reduced(m, {0.1, 0.1, 0.1, 0.0}, spec, data, grid);

    // widths (1,3,3,1,1) with a circulant layer-3 table: every row and every
    // column holds each atom exactly once, so both the incoming and the
    // outgoing empirical means equal the rho_3 quadrature sums; every other
    // layer sits at its single atom
    AtomizedSystem sys;
    sys.init = make_state({1, 3, 3, 1, 1}, 3);
    for (int c = 0; c < 3; ++c) sys.init.w1_row(0)[c] = m[0].atoms[0][(std::size_t)c];
    for (int k = 0; k < 3; ++k) sys.init.wi(2, 0, k) = m[1].atoms[0][0];
    sys.w_atoms.resize(4);
    sys.w_atoms[1].assign(9, -1);
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j) {
            int a = (j + k) % 3;
            sys.init.wi(3, j, k) = atoms3[(std::size_t)a];
            sys.w_atoms[1][(std::size_t)(k * 3 + j)] = a;
        }
    for (int j = 0; j < 3; ++j) sys.init.wi(4, j, 0) = m[3].atoms[0][0];
    sys.init.wi(5, 0, 0) = m[4].atoms[0][0];
    for (int k = 0; k < 3; ++k) sys.init.bi(2, k) = 0.1;
    for (int k = 0; k < 3; ++k) sys.init.bi(3, k) = 0.1;
    sys.init.bi(4, 0) = 0.1;
    sys.init.bi(5, 0) = 0.0;
    TrajectoryLog plog = integrate_particle(sys.init, spec, data, grid);

    double gap = reduced_vs_particle_gap(reduced, plog, sys, 3, 0.5);
    CHECK(gap < 1e-10);
}

TEST_CASE("reduced gap shrinks with width (median over seeds)") {
    MeasurabilityOutcome out = run_measurability({24, 96}, {1, 2, 3, 4, 5}, 0.3, 5e-3);
    CHECK(median(out.gaps[1]) < median(out.gaps[0]));
    CHECK(out.duplication_asymmetry <= 1e-10);
}

TEST_CASE("duplicated layer-3 particles stay identical forever") {
    DeepSystem sys = make_deep_system(false);
    EmbeddingTable table = sample_embedding(sys.laws, {5, 5, 5, 5, 1}, 3, 21);
    ParamState init = table.tables;
    for (int j = 0; j < 5; ++j) init.wi(3, j, 2) = init.wi(3, j, 0);
    for (int k = 0; k < 5; ++k) init.wi(4, 2, k) = init.wi(4, 0, k);
    TrajectoryLog log = integrate_particle(init, sys.spec, sys.data, rk4_grid(0.3, 5e-3, 10));
    for (const auto& s : log.states) {
        for (int j = 0; j < 5; ++j) CHECK(s.wi(3, j, 0) == s.wi(3, j, 2));
        for (int k = 0; k < 5; ++k) CHECK(s.wi(4, 0, k) == s.wi(4, 2, k));
    }
}

TEST_CASE("translation profile behavior") {
    DeepSystem sys = make_deep_system(false);
    EmbeddingTable table = sample_embedding(sys.laws, {10, 10, 10, 10, 1}, 3, 77);

    // frozen schedules: no displacement at all
    ArchitectureSpec frozen = sys.spec;
    frozen.w_schedules.assign(5, Schedule::zero());
    frozen.b_schedules.assign(4, Schedule::zero());
    TrajectoryLog flog =
        integrate_particle(table.tables, frozen, sys.data, rk4_grid(0.2, 0.02, 10));
    TranslationProfile p = translation_profile(flog, frozen, 3, 0.2);
    CHECK(p.mean_displacement == doctest::Approx(0.0));
    CHECK(p.spread == doctest::Approx(0.0));

    // a weight regularizer at the probed layer voids the precondition
    ArchitectureSpec reg = sys.spec;
    reg.w_regs[2] = Regularizer::parse("quad(0.1)");
    CHECK_THROWS(translation_profile(flog, reg, 3, 0.2));

    // live dynamics: middle layer moves almost in lockstep
    TrajectoryLog log =
        integrate_particle(table.tables, sys.spec, sys.data, rk4_grid(0.2, 0.02, 10));
    TranslationProfile p3 = translation_profile(log, sys.spec, 3, 0.2);
    CHECK(std::abs(p3.mean_displacement) > 0.0);
    CHECK(p3.spread < 0.5 * std::abs(p3.mean_displacement) + 0.05);
}
