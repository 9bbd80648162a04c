#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mflab/forward_backward.hpp"
#include "mflab/keyed_rng.hpp"
#include "mflab/experiments.hpp"

#include <cmath>

using namespace mflab;

namespace {

ArchitectureSpec fc(std::vector<int> widths, int d, std::vector<std::string> acts,
                    std::string loss = "huber(1)", std::vector<std::string> wr = {},
                    std::vector<std::string> br = {}) {
    FcConfig cfg;
    cfg.d = d;
    cfg.widths = std::move(widths);
    cfg.activations = std::move(acts);
    cfg.loss = std::move(loss);
    cfg.w_regs = std::move(wr);
    cfg.b_regs = std::move(br);
    return make_fc_architecture(cfg);
}

ParamState random_state(const std::vector<int>& widths, int w1_dim, std::uint64_t seed,
                        double scale = 1.0) {
    ParamState s = make_state(widths, w1_dim);
    KeyedStream rng(seed);
    for (auto& v : s.w1) v = scale * rng.next_gaussian();
    for (auto& t : s.w)
        for (auto& v : t) v = scale * rng.next_gaussian();
    for (auto& t : s.b)
        for (auto& v : t) v = 0.5 * scale * rng.next_gaussian();
    return s;
}

// reference forward written as plain nested loops over the recursion, kept
// independent of the library implementation
double naive_yhat(const ParamState& s, const ArchitectureSpec& spec, const Vec& x) {
    std::vector<double> h_prev;
    for (int j = 0; j < s.width(1); ++j) {
        double acc = 0.0;
        for (int c = 0; c < spec.x_dim; ++c) acc += s.w1_row(j)[c] * x[(std::size_t)c];
        if (spec.input_bias) acc += s.w1_row(j)[spec.x_dim];
        h_prev.push_back(acc);
    }
    for (int i = 2; i <= spec.L; ++i) {
        std::vector<double> h_cur;
        for (int k = 0; k < s.width(i); ++k) {
            double acc = 0.0;
            for (int j = 0; j < s.width(i - 1); ++j)
                acc += s.wi(i, j, k) * spec.act(i - 1).value(h_prev[(std::size_t)j]) +
                       s.bi(i, k);
            h_cur.push_back(acc / s.width(i - 1));
        }
        h_prev = h_cur;
    }
    return spec.phi_out(h_prev[0]);
}

} // namespace

TEST_CASE("forward: zero network outputs zero") {
    ArchitectureSpec spec = fc({3, 2, 1}, 2, {"tanh", "tanh"});
    ParamState s = make_state({3, 2, 1}, spec.w1_dim);
    ForwardCache c = forward(s, spec, {0.7, -0.3});
    CHECK(c.yhat == doctest::Approx(0.0));
}

TEST_CASE("forward: single-path evaluation") {
    ArchitectureSpec spec = fc({1, 1}, 2, {"tanh"});
    ParamState s = make_state({1, 1}, 3);
    s.w1 = {1.0, 0.0, 0.0};
    s.w[0] = {1.0};
    ForwardCache c = forward(s, spec, {1.0, 0.0});
    CHECK(c.yhat == doctest::Approx(std::tanh(1.0)));
}

TEST_CASE("forward agrees with a naive recursion evaluation") {
    ArchitectureSpec spec = fc({3, 4, 2, 1}, 3, {"tanh", "sigmoid", "sleaky(0.2)"});
    ParamState s = random_state({3, 4, 2, 1}, spec.w1_dim, 5);
    KeyedStream rng(17);
    for (int k = 0; k < 20; ++k) {
        Vec x{rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()};
        ForwardCache c = forward(s, spec, x);
        CHECK(c.yhat == doctest::Approx(naive_yhat(s, spec, x)).epsilon(1e-12));
    }
}

TEST_CASE("forward: duplicating a layer leaves the output unchanged") {
    ArchitectureSpec spec = fc({3, 2, 1}, 2, {"tanh", "gauss"});
    ParamState s = random_state({3, 2, 1}, spec.w1_dim, 11);

    // duplicate layer 1: copy rows of w1 and rows of w2
    ParamState d = make_state({6, 2, 1}, spec.w1_dim);
    for (int j = 0; j < 6; ++j)
        for (int c = 0; c < spec.w1_dim; ++c) d.w1_row(j)[c] = s.w1_row(j % 3)[c];
    for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 6; ++j) d.wi(2, j, k) = s.wi(2, j % 3, k);
    for (int k = 0; k < 2; ++k) d.bi(2, k) = s.bi(2, k);
    for (int k = 0; k < 1; ++k) {
        for (int j = 0; j < 2; ++j) d.wi(3, j, k) = s.wi(3, j, k);
        d.bi(3, k) = s.bi(3, k);
    }

    Vec x{0.4, -1.2};
    ForwardCache orig = forward(s, spec, x);
    ForwardCache dup = forward(d, spec, x);
    CHECK(dup.yhat == doctest::Approx(orig.yhat).epsilon(1e-13));
    double y = 0.9;
    BackwardBundle borig = backward(s, spec, x, y, orig);
    BackwardBundle bdup = backward(d, spec, x, y, dup);
    CHECK(bdup.delta_H[2][0] == doctest::Approx(borig.delta_H[2][0]).epsilon(1e-13));
}

TEST_CASE("backward: matched labels leave only regularizer terms") {
    ArchitectureSpec spec =
        fc({2, 1}, 1, {"tanh"}, "huber(1)", {"quad(0.5)", "quad(0.5)"}, {"quad(0.25)"});
    ParamState s = random_state({2, 1}, 2, 3);
    Vec x{0.3};
    ForwardCache c = forward(s, spec, x);
    BackwardBundle b = backward(s, spec, x, c.yhat, c); // y = yhat
    for (int j = 0; j < 2; ++j)
        for (int cdim = 0; cdim < 2; ++cdim)
            CHECK(b.delta_w1[(std::size_t)(j * 2 + cdim)] ==
                  doctest::Approx(0.5 * s.w1_row(j)[cdim]));
    CHECK(b.delta_w[0][0] == doctest::Approx(0.5 * s.wi(2, 0, 0)));
    CHECK(b.delta_b[0][0] == doctest::Approx(0.25 * s.bi(2, 0)));
}

TEST_CASE("backward: permutation of a layer permutes its tables") {
    ArchitectureSpec spec = fc({4, 3, 1}, 2, {"tanh", "tanh"});
    ParamState s = random_state({4, 3, 1}, spec.w1_dim, 23);

    // swap neurons 0 and 2 of layer 2
    ParamState p = s;
    for (int j = 0; j < 4; ++j) std::swap(p.w[0][0 * 4 + j], p.w[0][2 * 4 + j]);
    std::swap(p.b[0][0], p.b[0][2]);
    std::swap(p.w[1][0], p.w[1][2]);

    Vec x{1.1, -0.4};
    double y = 0.2;
    ForwardCache cs = forward(s, spec, x);
    ForwardCache cp = forward(p, spec, x);
    CHECK(cp.yhat == doctest::Approx(cs.yhat).epsilon(1e-14));
    BackwardBundle bs = backward(s, spec, x, y, cs);
    BackwardBundle bp = backward(p, spec, x, y, cp);
    CHECK(bp.delta_H[1][0] == doctest::Approx(bs.delta_H[1][2]).epsilon(1e-14));
    CHECK(bp.delta_H[1][2] == doctest::Approx(bs.delta_H[1][0]).epsilon(1e-14));
    CHECK(bp.delta_b[0][0] == doctest::Approx(bs.delta_b[0][2]).epsilon(1e-14));
    for (int j = 0; j < 4; ++j)
        CHECK(bp.delta_w[0][(std::size_t)(0 * 4 + j)] ==
              doctest::Approx(bs.delta_w[0][(std::size_t)(2 * 4 + j)]).epsilon(1e-14));
}

TEST_CASE("backward matches central finite differences") {
    ArchitectureSpec spec = fc({3, 4, 1}, 2, {"tanh", "tanh"});
    ParamState s = random_state({3, 4, 1}, spec.w1_dim, 31);
    CHECK(grad_check(s, spec, {0.4, -0.9}, 0.7, 1e-5) < 1e-6);
}

TEST_CASE("backward matches finite differences with regularizers") {
    ArchitectureSpec spec = fc({3, 4, 1}, 2, {"tanh", "sigmoid"}, "huber(1)",
                               {"quad(0.3)", "quad(0.3)", "quad(0.3)"},
                               {"quad(0.2)", "quad(0.2)"});
    ParamState s = random_state({3, 4, 1}, spec.w1_dim, 37);
    CHECK(grad_check(s, spec, {0.4, -0.9}, -0.3, 1e-5) < 1e-6);
}

TEST_CASE("grad check: zero network with huber") {
    ArchitectureSpec spec = fc({2, 2, 1}, 2, {"tanh", "tanh"});
    ParamState s = make_state({2, 2, 1}, spec.w1_dim);
    CHECK(grad_check(s, spec, {0.5, 0.5}, 0.8, 1e-5) < 1e-6);
}

TEST_CASE("grad check: linear activations are exact up to rounding") {
    ArchitectureSpec spec = fc({3, 3, 1}, 2, {"linear", "linear"});
    ParamState s = random_state({3, 3, 1}, spec.w1_dim, 41, 0.5);
    CHECK(grad_check(s, spec, {0.2, 0.1}, 0.4, 1e-4) < 1e-8);
}

TEST_CASE("grad check rejects a zero step") {
    ArchitectureSpec spec = fc({2, 1}, 1, {"tanh"});
    ParamState s = make_state({2, 1}, 2);
    CHECK_THROWS(grad_check(s, spec, {0.1}, 0.0, 0.0));
}

TEST_CASE("non-finite parameters are reported with layer context") {
    ArchitectureSpec spec = fc({2, 1}, 1, {"tanh"});
    ParamState s = make_state({2, 1}, 2);
    s.w1[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH_AS(forward(s, spec, {0.1}), doctest::Contains("layer 1"),
                         std::runtime_error);
}

TEST_CASE("layer values grow at most polynomially along an audited run") {
    // extrapolating an envelope fitted on the first half of the run must
    // dominate the second half (no blow-up)
    ScalingSystem sys = make_scaling_system(16);
    CHECK(audit_assumptions(sys.spec, 500, 2.0, 3).all_pass);
    EmbeddingTable table = sample_embedding(sys.laws, {25, 1}, sys.spec.w1_dim, 4);
    TimeGrid grid;
    grid.t_end = 2.0;
    grid.dt = 5e-3;
    grid.snapshot_stride = 40;
    TrajectoryLog log = integrate_particle(table.tables, sys.spec, sys.data, grid);

    std::vector<double> hmax(log.size(), 0.0);
    ForwardCache cache;
    for (std::size_t k = 0; k < log.size(); ++k)
        for (std::size_t z = 0; z < sys.data.size(); ++z) {
            forward(log.states[k], sys.spec, sys.data.xs[z], cache);
            for (const auto& layer : cache.H)
                for (double h : layer) hmax[k] = std::max(hmax[k], std::abs(h));
        }

    double envelope = 0.0; // coefficient of (1 + t)^2 fitted on [0, T/2]
    for (std::size_t k = 0; k < log.size(); ++k)
        if (log.times[k] <= 1.0)
            envelope = std::max(envelope, hmax[k] / std::pow(1.0 + log.times[k], 2.0));
    for (std::size_t k = 0; k < log.size(); ++k)
        CHECK(hmax[k] <= 2.0 * envelope * std::pow(1.0 + log.times[k], 2.0));
}
