// Acceptance suite: one test case per shipped guarantee, each printing a
// single PASS/FAIL line with its measured quantities.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mflab/experiments.hpp"
#include "mflab/keyed_rng.hpp"
#include "mflab/norms.hpp"

#include <cmath>
#include <cstdio>
#include <string>

using namespace mflab;

namespace {

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("[criterion %2d] %s: %s\n", criterion, ok ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), pattern, args...);
    return buf;
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

// criteria 4 and 5 share one set of runs; memoized for full-suite invocations
const WidthScalingOutcome& width_scaling_runs() {
    static WidthScalingOutcome out =
        run_width_scaling({100, 200, 400, 800}, 3200, kSeeds, 1.0, 1e-3, 64, 20);
    return out;
}

} // namespace

TEST_CASE("criterion_01_gradient_oracle") {
    GradcheckOutcome out = run_gradcheck(20, 20240517, 1e-5);
    double worst = 0.0;
    for (double e : out.max_rel_errors) worst = std::max(worst, e);
    bool ok = out.max_rel_errors.size() == 20 && worst <= 1e-5;
    report(1, ok, fmt("20 fc instances, worst relative gradient error %.3g (tol 1e-5)",
                      worst));
    CHECK(out.max_rel_errors.size() == 20);
    CHECK(worst <= 1e-5);
}

TEST_CASE("criterion_02_picard_fixed_point") {
    PicardOutcome out = run_picard_decay(1.0, 1e-3, 1e-8, 25);
    bool ok = out.report.converged && out.report.iterations_used <= 25 &&
              out.report.residuals.back() <= 1e-8 && out.sup_err_vs_exact <= 1e-6 &&
              out.ratios_decreasing;
    report(2, ok,
           fmt("converged in %d iterations, final residual %.2e, sup error vs exact "
               "%.2e, contraction ratios decreasing: %s",
               out.report.iterations_used, out.report.residuals.back(),
               out.sup_err_vs_exact, out.ratios_decreasing ? "yes" : "no"));
    CHECK(out.report.converged);
    CHECK(out.report.iterations_used <= 25);
    CHECK(out.report.residuals.back() <= 1e-8);
    CHECK(out.sup_err_vs_exact <= 1e-6);
    CHECK(out.ratios_decreasing);
}

TEST_CASE("criterion_03_eps_scaling") {
    EpsScalingOutcome out =
        run_eps_scaling(200, {1e-2, 2.5e-3, 6.25e-4}, kSeeds, 1.0, 64);
    REQUIRE(out.has_slope);
    bool decreasing = out.medians[0] > out.medians[1] && out.medians[1] > out.medians[2];
    bool slope_ok = out.slope.slope >= 0.35 && out.slope.slope <= 1.1;
    report(3, decreasing && slope_ok,
           fmt("median distances %.3e / %.3e / %.3e for eps 1e-2 / 2.5e-3 / 6.25e-4, "
               "slope %.3f in [0.35, 1.1]: %s, strictly decreasing: %s",
               out.medians[0], out.medians[1], out.medians[2], out.slope.slope,
               slope_ok ? "yes" : "no", decreasing ? "yes" : "no"));
    CHECK(slope_ok);
    CHECK(decreasing);
}

TEST_CASE("criterion_04_width_scaling") {
    const WidthScalingOutcome& out = width_scaling_runs();
    REQUIRE(out.has_slope);
    bool decreasing = true;
    for (std::size_t i = 1; i < out.median_distance.size(); ++i)
        if (out.median_distance[i] >= out.median_distance[i - 1]) decreasing = false;
    bool slope_ok = out.slope.slope >= -0.75 && out.slope.slope <= -0.3;
    report(4, decreasing && slope_ok,
           fmt("median distances %.3e / %.3e / %.3e / %.3e for n = 100/200/400/800 vs "
               "n_ref = 3200, slope %.3f in [-0.75, -0.3]: %s, strictly decreasing: %s",
               out.median_distance[0], out.median_distance[1], out.median_distance[2],
               out.median_distance[3], out.slope.slope, slope_ok ? "yes" : "no",
               decreasing ? "yes" : "no"));
    CHECK(slope_ok);
    CHECK(decreasing);
}

TEST_CASE("criterion_05_test_function_gap") {
    const WidthScalingOutcome& out = width_scaling_runs();
    bool ok = true;
    double worst_ratio = 0.0;
    for (std::size_t wi = 0; wi < out.widths.size(); ++wi)
        for (std::size_t si = 0; si < kSeeds.size(); ++si) {
            double ratio = out.psi_gaps[wi][si] / out.distances[wi][si];
            worst_ratio = std::max(worst_ratio, ratio);
            if (out.psi_gaps[wi][si] > 2.0 * out.distances[wi][si]) ok = false;
        }
    report(5, ok,
           fmt("clamped-identity layer-1 gap vs distance over all runs: worst ratio "
               "%.2f (must stay <= 2)",
               worst_ratio));
    CHECK(ok);
}

TEST_CASE("criterion_06_translation") {
    TranslationOutcome out = run_translation({100, 200}, kSeeds, 0.5, 2.5e-3);
    bool ordered = true;
    for (std::size_t wi = 0; wi < out.widths.size(); ++wi)
        for (std::size_t si = 0; si < kSeeds.size(); ++si)
            if (out.spread_layer3[wi][si] >= out.spread_layer2[wi][si]) ordered = false;
    int shrink_votes = 0;
    for (std::size_t si = 0; si < kSeeds.size(); ++si)
        if (out.spread_layer3[1][si] < out.spread_layer3[0][si]) ++shrink_votes;
    bool ok = ordered && shrink_votes >= 4;
    report(6, ok,
           fmt("layer-3 spread < layer-2 spread on all %zu runs: %s; layer-3 spread "
               "shrinks from n=100 to n=200 on %d/5 seeds (need >= 4)",
               2 * kSeeds.size(), ordered ? "yes" : "no", shrink_votes));
    CHECK(ordered);
    CHECK(shrink_votes >= 4);
}

TEST_CASE("criterion_07_reduced_dynamics") {
    MeasurabilityOutcome out = run_measurability({100, 200}, kSeeds, 0.5, 2.5e-3);
    int votes = 0;
    for (std::size_t si = 0; si < kSeeds.size(); ++si)
        if (out.gaps[1][si] < out.gaps[0][si]) ++votes;
    bool ok = votes >= 4 && out.duplication_asymmetry <= 1e-10;
    report(7, ok,
           fmt("reduced-vs-particle layer-3 gap shrinks on %d/5 seeds (need >= 4); "
               "duplication asymmetry %.2e (tol 1e-10)",
               votes, out.duplication_asymmetry));
    CHECK(votes >= 4);
    CHECK(out.duplication_asymmetry <= 1e-10);
}

TEST_CASE("criterion_08_weak_pde_residual") {
    PdeResidualOutcome out = run_pde_residual(500, 0.6, 1e-3, 0.5, {1e-2, 5e-3}, 1);
    bool ok = out.residuals[0] <= 1e-2 && out.residuals[1] < out.residuals[0];
    report(8, ok,
           fmt("two-layer weak-form residual %.3e at probe 1e-2 (tol 1e-2), %.3e at "
               "probe 5e-3 (must shrink)",
               out.residuals[0], out.residuals[1]));
    CHECK(out.residuals[0] <= 1e-2);
    CHECK(out.residuals[1] < out.residuals[0]);
}

TEST_CASE("criterion_09_global_convergence_two_layer") {
    ConvergenceConfig cfg;
    cfg.which = ConvergenceConfig::Which::TwoLayer;
    cfg.widths = {500};
    cfg.dataset_size = 128;
    cfg.T = 50.0;
    GlobalConvOutcome out = run_global_conv(cfg, 1, 1e-2, 50);
    bool drift_down = out.drift_tail_second < out.drift_tail_first;
    bool ok = out.report.loss_monotone && out.report.final_loss <= 1e-3 && drift_down;
    report(9, ok,
           fmt("two-layer flow: final loss %.3e (tol 1e-3), monotone: %s (max increase "
               "%.2e), drift tail %.3e -> %.3e decreasing: %s",
               out.report.final_loss, out.report.loss_monotone ? "yes" : "no",
               out.report.max_loss_increase, out.drift_tail_first, out.drift_tail_second,
               drift_down ? "yes" : "no"));
    CHECK(out.report.loss_monotone);
    CHECK(out.report.final_loss <= 1e-3);
    CHECK(drift_down);
}

TEST_CASE("criterion_10_global_convergence_three_layer") {
    ConvergenceConfig cfg;
    cfg.which = ConvergenceConfig::Which::ThreeLayer;
    cfg.widths = {64, 64};
    cfg.dataset_size = 128;
    cfg.T = 30.0;
    cfg.freeze_w3 = true;
    cfg.w3_law = LawSpec::uniform(0.5, 1.5);
    GlobalConvOutcome out = run_global_conv(cfg, 1, 2e-2, 50);
    bool ok = out.report.final_loss <= 1e-2 && out.barrier_held;
    report(10, ok,
           fmt("three-layer flow with frozen |w3| >= 0.5: final loss %.3e (tol 1e-2), "
               "baseline %.3e, loss stays below baseline once below: %s",
               out.report.final_loss, out.report.baseline_loss,
               out.barrier_held ? "yes" : "no"));
    CHECK(out.report.final_loss <= 1e-2);
    CHECK(out.barrier_held);
    CHECK(out.report.final_loss < out.report.baseline_loss);
}

TEST_CASE("criterion_11_structural_suite") {
    bool ok = true;
    std::string failure;

    // exact sub-block consistency across resolutions
    {
        InitLawSpec laws;
        laws.w_laws = {LawSpec::gaussian(0.0, 1.0), LawSpec::uniform(-1.0, 1.0),
                       LawSpec::uniform(-0.5, 0.5)};
        laws.b_laws = {LawSpec::uniform(-0.1, 0.1), LawSpec::point(0.25)};
        EmbeddingTable a = sample_embedding(laws, {3, 4, 1}, 2, 314);
        EmbeddingTable b = sample_embedding(laws, {9, 8, 1}, 2, 314);
        for (int k = 0; k < 4 && ok; ++k)
            for (int j = 0; j < 3; ++j)
                if (a.tables.wi(2, j, k) != b.tables.wi(2, j, k)) {
                    ok = false;
                    failure = "sub-block consistency";
                }
    }

    // permutation and duplication invariance of the forward/backward pass
    {
        FcConfig fcfg;
        fcfg.d = 2;
        fcfg.widths = {3, 2, 1};
        fcfg.activations = {"tanh", "sigmoid"};
        ArchitectureSpec spec = make_fc_architecture(fcfg);
        ParamState s = make_state({3, 2, 1}, 3);
        KeyedStream rng(8);
        for (auto& v : s.w1) v = rng.next_gaussian();
        for (auto& t : s.w)
            for (auto& v : t) v = rng.next_gaussian();
        for (auto& t : s.b)
            for (auto& v : t) v = rng.next_gaussian();
        Vec x{0.3, -0.8};

        ParamState p = s; // swap layer-1 neurons 0 and 2
        for (int c = 0; c < 3; ++c)
            std::swap(p.w1_row(0)[c], p.w1_row(2)[c]);
        for (int k = 0; k < 2; ++k) std::swap(p.wi(2, 0, k), p.wi(2, 2, k));
        double y0 = forward(s, spec, x).yhat;
        double y1 = forward(p, spec, x).yhat;
        if (std::abs(y0 - y1) > 1e-12) {
            ok = false;
            failure = "permutation invariance";
        }

        ParamState d = make_state({6, 2, 1}, 3); // duplicate layer 1
        for (int j = 0; j < 6; ++j)
            for (int c = 0; c < 3; ++c) d.w1_row(j)[c] = s.w1_row(j % 3)[c];
        for (int k = 0; k < 2; ++k) {
            for (int j = 0; j < 6; ++j) d.wi(2, j, k) = s.wi(2, j % 3, k);
            d.bi(2, k) = s.bi(2, k);
            d.wi(3, k, 0) = s.wi(3, k, 0);
        }
        d.bi(3, 0) = s.bi(3, 0);
        double yd = forward(d, spec, x).yhat;
        if (std::abs(y0 - yd) > 1e-12) {
            ok = false;
            failure = "duplication invariance";
        }
    }

    // norm formulas
    {
        ParamState s = make_state({2, 1}, 1);
        s.w1 = {3.0, 4.0};
        s.wi(2, 0, 0) = -2.0;
        s.wi(2, 1, 0) = 1.0;
        TrajectoryLog log;
        log.times = {0.0};
        log.states = {s};
        log.diags.resize(1);
        if (std::abs(trajectory_norm(log, 0.0, 2.0) - std::sqrt(12.5)) > 1e-12) {
            ok = false;
            failure = "norm formula";
        }
        LayerNorms n = state_norms(s, 2.0);
        if (std::abs(n.w_sup - 2.0) > 1e-12) {
            ok = false;
            failure = "sup norm formula";
        }
    }

    // distance metric axioms on equal-shape logs
    {
        InitLawSpec laws;
        laws.w_laws = {LawSpec::gaussian(0.0, 1.0), LawSpec::uniform(-1.0, 1.0)};
        laws.b_laws = {LawSpec::point(0.0)};
        EmbeddingTable t = sample_embedding(laws, {4, 1}, 2, 11);
        CoupledPair pair = couple(t, {4, 1});
        auto mk = [&](double bump1, double bump3) {
            TrajectoryLog log;
            for (int k = 0; k <= 4; ++k) {
                log.times.push_back(0.25 * k);
                log.states.push_back(pair.mf_init);
            }
            log.states[1].w1[0] += bump1;
            log.states[3].bi(2, 0) += bump3;
            log.diags.resize(log.size());
            return log;
        };
        TrajectoryLog A = mk(0.0, 0.0), B = mk(0.2, -0.1), C = mk(-0.3, 0.25);
        double ab = traj_distance(A, B, pair, 0.0, 1.0);
        double ba = traj_distance(B, A, pair, 0.0, 1.0);
        double bc = traj_distance(B, C, pair, 0.0, 1.0);
        double ac = traj_distance(A, C, pair, 0.0, 1.0);
        if (traj_distance(A, A, pair, 0.0, 1.0) != 0.0 || std::abs(ab - ba) > 1e-15 ||
            ac > ab + bc + 1e-15) {
            ok = false;
            failure = "distance axioms";
        }
        double d_half = traj_distance(A, B, pair, 0.0, 0.5);
        if (d_half > ab + 1e-15) {
            ok = false;
            failure = "distance monotone in horizon";
        }
    }

    report(11, ok,
           ok ? std::string("sub-block consistency, invariances, norms and distance "
                            "axioms all exact")
              : "failed at: " + failure);
    CHECK(ok);
}
