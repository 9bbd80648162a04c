#include "mflab/experiments.hpp"
#include "mflab/keyed_rng.hpp"
#include "mflab/norms.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

namespace mflab {

using nlohmann::json;

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& rows) {
    std::vector<double> distinct;
    for (const auto& [knob, metric] : rows) {
        if (knob <= 0.0) throw std::invalid_argument("knob values must be positive");
        if (metric <= 0.0) throw std::invalid_argument("metrics must be positive");
        bool seen = false;
        for (double d : distinct)
            if (std::abs(d - knob) < 1e-15 * std::max(1.0, std::abs(knob))) seen = true;
        if (!seen) distinct.push_back(knob);
    }
    if (distinct.size() < 3)
        throw std::invalid_argument("need at least three distinct knob values");

    const double n = static_cast<double>(rows.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& [knob, metric] : rows) {
        double x = std::log(knob), y = std::log(metric);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = sxx - sx * sx / n;
    SlopeFit fit;
    fit.slope = (sxy - sx * sy / n) / denom;
    const double intercept = (sy - fit.slope * sx) / n;
    double ssr = 0.0;
    for (const auto& [knob, metric] : rows) {
        double r = std::log(metric) - (intercept + fit.slope * std::log(knob));
        ssr += r * r;
    }
    const double dof = std::max(1.0, n - 2.0);
    fit.stderr_ = std::sqrt(ssr / dof / denom);
    return fit;
}

namespace {

// runs fn(0..count-1), possibly on several workers; each task owns its output
// slot so the result layout is schedule-independent
template <typename F>
void parallel_tasks(std::size_t count, int threads, F&& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const int nw = std::min<int>(threads, static_cast<int>(count));
    pool.reserve(static_cast<std::size_t>(nw));
    for (int t = 0; t < nw; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

Dataset teacher_dataset(const ArchitectureSpec& spec, int teacher_width, int size,
                        std::uint64_t seed) {
    std::vector<int> tw(static_cast<std::size_t>(spec.L), teacher_width);
    tw.back() = 1;
    ParamState teacher = make_state(tw, spec.w1_dim);
    KeyedStream s(seed, 41, 0, 0, 0);
    for (auto& v : teacher.w1) v = s.next_gaussian();
    for (auto& t : teacher.w)
        for (auto& v : t) v = s.next_uniform(0.5, 1.5) * (s.next_unit() < 0.5 ? -1.0 : 1.0);
    for (auto& t : teacher.b)
        for (auto& v : t) v = s.next_uniform(-0.2, 0.2);

    Dataset data;
    data.xs.resize(static_cast<std::size_t>(size));
    data.ys.resize(static_cast<std::size_t>(size));
    ForwardCache cache;
    for (int k = 0; k < size; ++k) {
        KeyedStream xs(seed, 42, static_cast<std::uint64_t>(k), 0, 0);
        Vec x(static_cast<std::size_t>(spec.x_dim));
        for (auto& c : x) c = xs.next_uniform(-1.0, 1.0);
        forward(teacher, spec, x, cache);
        data.ys[static_cast<std::size_t>(k)] = cache.yhat;
        data.xs[static_cast<std::size_t>(k)] = std::move(x);
    }
    return data;
}

} // namespace

ScalingSystem make_scaling_system(int dataset_size, int d, std::uint64_t data_seed) {
    ScalingSystem sys;
    sys.d = d;
    FcConfig cfg;
    cfg.d = d;
    cfg.widths = {8, 1}; // widths live in the states; any valid pair works here
    cfg.activations = {"tanh"};
    cfg.loss = "huber(1)";
    sys.spec = make_fc_architecture(cfg);
    sys.laws.w_laws = {LawSpec::gaussian(0.0, 1.0), LawSpec::uniform(-1.0, 1.0)};
    sys.laws.b_laws = {LawSpec::point(0.0)};
    sys.data = teacher_dataset(sys.spec, 3, dataset_size, data_seed);
    return sys;
}

DecaySystem make_decay_system() {
    DecaySystem sys;
    FcConfig cfg;
    cfg.d = 1;
    cfg.widths = {1, 1};
    cfg.activations = {"tanh"};
    cfg.loss = "huber(1)";
    cfg.w_regs = {"quad(1)", "none"};
    sys.spec = make_fc_architecture(cfg);
    sys.data.xs = {Vec{0.0}};
    sys.data.ys = {0.0};
    sys.init = make_state({1, 1}, 2);
    sys.init.w1 = {1.0, 1.0};
    return sys;
}

DeepSystem make_deep_system(bool atomized, int dataset_size, std::uint64_t data_seed) {
    DeepSystem sys;
    FcConfig cfg;
    cfg.d = 2;
    cfg.widths = {4, 4, 4, 4, 1};
    cfg.activations = {"tanh", "tanh", "tanh", "tanh"};
    cfg.loss = "huber(1)";
    sys.spec = make_fc_architecture(cfg);
    sys.bias_consts = {0.1, 0.1, 0.1, 0.0};
    // positive-mean laws above layer 1 keep the backward signal at the lower
    // layers alive from t = 0 (a zero-mean outgoing layer cancels it in the
    // wide limit)
    if (atomized) {
        // several atoms per layer: the sup over atoms concentrates better,
        // which keeps the finite-width gap comparison stable across seeds
        sys.measures.push_back(QuadratureMeasure::equal_weight(
            {Vec{0.5, -0.3, 0.2}, Vec{-0.6, 0.4, 0.1}, Vec{0.2, 0.7, -0.5},
             Vec{-0.2, -0.6, 0.4}, Vec{0.8, 0.1, 0.3}, Vec{0.1, -0.4, -0.7}}));
        sys.measures.push_back(QuadratureMeasure::scalar_atoms({-0.3, 0.4, 0.8}));
        sys.measures.push_back(
            QuadratureMeasure::scalar_atoms({0.1, 0.3, 0.5, 0.7, 0.9}));
        sys.measures.push_back(QuadratureMeasure::scalar_atoms({-0.2, 0.6, 0.8}));
        sys.measures.push_back(QuadratureMeasure::scalar_atoms({0.3, 0.7, 1.1}));
        for (const auto& m : sys.measures) sys.laws.w_laws.push_back(m.to_law());
    } else {
        sys.laws.w_laws.push_back(LawSpec::gaussian(0.0, 0.7));
        for (int i = 2; i <= 5; ++i) sys.laws.w_laws.push_back(LawSpec::uniform(0.2, 1.0));
    }
    for (double b : sys.bias_consts) sys.laws.b_laws.push_back(LawSpec::point(b));
    sys.data = teacher_dataset(sys.spec, 2, dataset_size, data_seed);
    return sys;
}

// ---------------------------------------------------------------------------

GradcheckOutcome run_gradcheck(int instances, std::uint64_t seed, double step) {
    GradcheckOutcome out;
    const char* act_pool[] = {"tanh", "sigmoid", "gauss", "sleaky(0.2)"};
    for (int inst = 0; inst < instances; ++inst) {
        KeyedStream s(seed, 31, static_cast<std::uint64_t>(inst), 0, 0);
        FcConfig cfg;
        cfg.d = 1 + static_cast<int>(s.next_index(4));
        const int L = 2 + inst % 4;
        cfg.widths.resize(static_cast<std::size_t>(L));
        for (int i = 0; i + 1 < L; ++i)
            cfg.widths[static_cast<std::size_t>(i)] = 1 + static_cast<int>(s.next_index(5));
        cfg.widths.back() = 1;
        for (int i = 0; i + 1 < L; ++i)
            cfg.activations.push_back(act_pool[s.next_index(4)]);
        cfg.loss = (inst % 3 == 2) ? "squared" : "huber(1)";
        if (inst % 2 == 1) {
            cfg.w_regs.assign(static_cast<std::size_t>(L), "quad(0.3)");
            cfg.b_regs.assign(static_cast<std::size_t>(L) - 1, "quad(0.2)");
        }
        ArchitectureSpec spec = make_fc_architecture(cfg);

        ParamState state = make_state(cfg.widths, spec.w1_dim);
        for (auto& v : state.w1) v = s.next_gaussian();
        for (auto& t : state.w)
            for (auto& v : t) v = s.next_gaussian();
        for (auto& t : state.b)
            for (auto& v : t) v = 0.5 * s.next_gaussian();
        Vec x(static_cast<std::size_t>(cfg.d));
        for (auto& c : x) c = s.next_gaussian();
        double y = s.next_gaussian();

        out.max_rel_errors.push_back(grad_check(state, spec, x, y, step));
    }
    return out;
}

PicardOutcome run_picard_decay(double T, double dt, double tol, int k_max) {
    DecaySystem sys = make_decay_system();
    TimeGrid grid;
    grid.t_end = T;
    grid.dt = dt;
    grid.scheme = TimeGrid::Scheme::Rk4;

    PicardOutcome out;
    auto [traj, report] = picard_solve(sys.init, sys.spec, sys.data, grid, k_max, tol);
    out.report = report;

    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double expected = std::exp(-traj.times[k]);
        for (double v : traj.states[k].w1)
            out.sup_err_vs_exact = std::max(out.sup_err_vs_exact, std::abs(v - expected));
    }

    TrajectoryLog rk4 = integrate_particle(sys.init, sys.spec, sys.data, grid);
    for (std::size_t k = 0; k < traj.size(); ++k)
        out.sup_err_vs_rk4 =
            std::max(out.sup_err_vs_rk4, state_diff_sup(traj.states[k], rk4.states[k]));

    const auto& r = report.residuals;
    double prev_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < r.size(); ++k) {
        if (r[k] <= 0.0 || r[k + 1] <= 0.0) break;
        double q = r[k + 1] / r[k];
        if (q >= prev_ratio) out.ratios_decreasing = false;
        prev_ratio = q;
    }
    return out;
}

EpsScalingOutcome run_eps_scaling(int n, const std::vector<double>& eps_list,
                                  const std::vector<std::uint64_t>& seeds, double T,
                                  int dataset_size, int threads) {
    if (eps_list.empty() || seeds.empty())
        throw std::invalid_argument("need step sizes and seeds");
    ScalingSystem sys = make_scaling_system(dataset_size);
    const double dt = *std::min_element(eps_list.begin(), eps_list.end());
    for (double e : eps_list) {
        double ratio = e / dt;
        if (std::abs(ratio - std::round(ratio)) > 1e-9)
            throw std::invalid_argument("every step size must be a multiple of the smallest");
    }
    TimeGrid grid;
    grid.t_end = T;
    grid.dt = dt;
    grid.scheme = TimeGrid::Scheme::Rk4;
    grid.snapshot_stride = 1;

    EpsScalingOutcome out;
    out.eps = eps_list;
    out.distances.assign(eps_list.size(), std::vector<double>(seeds.size(), 0.0));

    parallel_tasks(seeds.size(), threads, [&](std::size_t si) {
        EmbeddingTable table =
            sample_embedding(sys.laws, {n, 1}, sys.spec.w1_dim, seeds[si]);
        CoupledPair pair = couple(table, {n, 1});
        TrajectoryLog mf_log = integrate_particle(pair.mf_init, sys.spec, sys.data, grid);
        for (std::size_t ei = 0; ei < eps_list.size(); ++ei) {
            SgdConfig cfg;
            cfg.epsilon = eps_list[ei];
            cfg.horizon_T = T;
            cfg.record_stride = 1;
            cfg.data_seed = mix_key(seeds[si], 51, static_cast<std::uint64_t>(ei), 0, 0);
            TrajectoryLog nn_log = train_sgd(pair.nn_init, sys.spec, sys.data, cfg);
            out.distances[ei][si] =
                traj_distance(nn_log, mf_log, pair, eps_list[ei], T);
        }
    });
    std::vector<std::pair<double, double>> med_rows;
    for (std::size_t ei = 0; ei < eps_list.size(); ++ei) {
        out.medians.push_back(median(out.distances[ei]));
        med_rows.push_back({eps_list[ei], out.medians.back()});
    }
    std::vector<double> distinct(eps_list);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() >= 3) {
        out.slope = fit_loglog_slope(med_rows);
        out.has_slope = true;
    }
    return out;
}

WidthScalingOutcome run_width_scaling(const std::vector<int>& widths, int n_ref,
                                      const std::vector<std::uint64_t>& seeds, double T,
                                      double dt, int dataset_size, int stride,
                                      int threads) {
    if (widths.empty() || seeds.empty()) throw std::invalid_argument("need widths and seeds");
    for (int n : widths)
        if (n > n_ref) throw std::invalid_argument("probe width exceeds the reference width");
    ScalingSystem sys = make_scaling_system(dataset_size);
    TimeGrid grid;
    grid.t_end = T;
    grid.dt = dt;
    grid.scheme = TimeGrid::Scheme::Rk4;
    grid.snapshot_stride = stride;

    // the clamp level keeps the test function at the scale of the coupling
    // distance, so its mean-fluctuation part stays inside the transport budget
    auto clamp_psi = [](double h) { return std::max(-0.15, std::min(0.15, h)); };

    WidthScalingOutcome out;
    out.widths = widths;
    out.distances.assign(widths.size(), std::vector<double>(seeds.size(), 0.0));
    out.psi_gaps.assign(widths.size(), std::vector<double>(seeds.size(), 0.0));

    parallel_tasks(seeds.size(), threads, [&](std::size_t si) {
        EmbeddingTable table =
            sample_embedding(sys.laws, {n_ref, 1}, sys.spec.w1_dim, seeds[si]);
        TrajectoryLog ref_log =
            integrate_particle(table.tables, sys.spec, sys.data, grid);
        for (std::size_t wi = 0; wi < widths.size(); ++wi) {
            CoupledPair pair = couple(table, {widths[wi], 1});
            TrajectoryLog nn_log =
                integrate_particle(pair.nn_init, sys.spec, sys.data, grid);
            out.distances[wi][si] = traj_distance(nn_log, ref_log, pair, 0.0, T);
            out.psi_gaps[wi][si] = test_function_gap(nn_log, ref_log, pair, 1, clamp_psi,
                                                     sys.data, sys.spec, T);
        }
    });

    std::vector<std::pair<double, double>> med_rows;
    for (std::size_t wi = 0; wi < widths.size(); ++wi) {
        out.median_distance.push_back(median(out.distances[wi]));
        out.median_gap.push_back(median(out.psi_gaps[wi]));
        med_rows.push_back({static_cast<double>(widths[wi]), out.median_distance.back()});
    }
    if (med_rows.size() >= 3) {
        out.slope = fit_loglog_slope(med_rows);
        out.has_slope = true;
    }
    return out;
}

TranslationOutcome run_translation(const std::vector<int>& widths,
                                   const std::vector<std::uint64_t>& seeds, double t,
                                   double dt, int threads) {
    DeepSystem sys = make_deep_system(false);
    TimeGrid grid;
    grid.t_end = t;
    grid.dt = dt;
    grid.scheme = TimeGrid::Scheme::Rk4;
    grid.snapshot_stride = static_cast<int>(grid.steps());

    TranslationOutcome out;
    out.widths = widths;
    out.spread_layer2.assign(widths.size(), std::vector<double>(seeds.size(), 0.0));
    out.spread_layer3.assign(widths.size(), std::vector<double>(seeds.size(), 0.0));
    parallel_tasks(widths.size() * seeds.size(), threads, [&](std::size_t task) {
        const std::size_t wi = task / seeds.size();
        const std::size_t si = task % seeds.size();
        const int n = widths[wi];
        EmbeddingTable table = sample_embedding(sys.laws, {n, n, n, n, 1},
                                                sys.spec.w1_dim, seeds[si]);
        TrajectoryLog log = integrate_particle(table.tables, sys.spec, sys.data, grid);
        out.spread_layer2[wi][si] = translation_profile(log, sys.spec, 2, t).spread;
        out.spread_layer3[wi][si] = translation_profile(log, sys.spec, 3, t).spread;
    });
    return out;
}

MeasurabilityOutcome run_measurability(const std::vector<int>& widths,
                                       const std::vector<std::uint64_t>& seeds, double T,
                                       double dt, int threads) {
    DeepSystem sys = make_deep_system(true);
    TimeGrid grid;
    grid.t_end = T;
    grid.dt = dt;
    grid.scheme = TimeGrid::Scheme::Rk4;
    grid.snapshot_stride = std::max(1, static_cast<int>(grid.steps() / 10));

    ReducedTrajectory reduced =
        integrate_reduced(sys.measures, sys.bias_consts, sys.spec, sys.data, grid);

    MeasurabilityOutcome out;
    out.widths = widths;
    out.gaps.assign(widths.size(), std::vector<double>(seeds.size(), 0.0));
    parallel_tasks(widths.size() * seeds.size(), threads, [&](std::size_t task) {
        const std::size_t wi = task / seeds.size();
        const std::size_t si = task % seeds.size();
        const int n = widths[wi];
        AtomizedSystem atoms = sample_atomized_system(
            sys.measures, sys.bias_consts, {n, n, n, n, 1}, sys.spec.w1_dim, seeds[si]);
        TrajectoryLog log = integrate_particle(atoms.init, sys.spec, sys.data, grid);
        out.gaps[wi][si] = reduced_vs_particle_gap(reduced, log, atoms, 3, T);
    });

    // exact duplication symmetry: two layer-3 particles sharing all incoming
    // and outgoing weights must stay identical along the whole trajectory
    {
        AtomizedSystem atoms = sample_atomized_system(sys.measures, sys.bias_consts,
                                                      {4, 4, 4, 4, 1}, sys.spec.w1_dim, 99);
        ParamState init = atoms.init;
        for (int j = 0; j < 4; ++j) init.wi(3, j, 1) = init.wi(3, j, 0);
        for (int k = 0; k < 4; ++k) init.wi(4, 1, k) = init.wi(4, 0, k);
        TimeGrid g2 = grid;
        g2.t_end = std::min(T, 0.25);
        g2.snapshot_stride = 1;
        TrajectoryLog log = integrate_particle(init, sys.spec, sys.data, g2);
        double asym = 0.0;
        for (const auto& s : log.states) {
            for (int j = 0; j < 4; ++j)
                asym = std::max(asym, std::abs(s.wi(3, j, 0) - s.wi(3, j, 1)));
            for (int k = 0; k < 4; ++k)
                asym = std::max(asym, std::abs(s.wi(4, 0, k) - s.wi(4, 1, k)));
        }
        out.duplication_asymmetry = asym;
    }
    return out;
}

GlobalConvOutcome run_global_conv(const ConvergenceConfig& cfg, std::uint64_t seed,
                                  double dt, int stride) {
    ConvergenceSystem sys = build_convergence_system(cfg, seed);
    TimeGrid grid;
    grid.t_end = cfg.T;
    grid.dt = dt;
    grid.scheme = TimeGrid::Scheme::Rk4;
    grid.snapshot_stride = stride;

    GlobalConvOutcome out;
    out.log = integrate_particle(sys.init, sys.spec, sys.data, grid);
    out.report =
        convergence_diagnostics(out.log, sys.spec, sys.data, sys.baseline_loss, 1e-8, dt);

    double sum1 = 0.0, sum2 = 0.0;
    int c1 = 0, c2 = 0;
    for (std::size_t k = 0; k < out.report.times.size(); ++k) {
        double t = out.report.times[k];
        if (t >= 0.5 * cfg.T && t < 0.75 * cfg.T) {
            sum1 += out.report.drift[k];
            ++c1;
        } else if (t >= 0.75 * cfg.T) {
            sum2 += out.report.drift[k];
            ++c2;
        }
    }
    out.drift_tail_first = c1 ? sum1 / c1 : 0.0;
    out.drift_tail_second = c2 ? sum2 / c2 : 0.0;

    out.barrier_held = true;
    bool below = false;
    for (double l : out.report.loss_curve) {
        if (below && l >= sys.baseline_loss) out.barrier_held = false;
        if (l < sys.baseline_loss) below = true;
    }
    return out;
}

PdeResidualOutcome run_pde_residual(int particles, double T, double dt, double t_eval,
                                    const std::vector<double>& dt_probes,
                                    std::uint64_t seed) {
    ScalingSystem sys = make_scaling_system(64);
    EmbeddingTable table =
        sample_embedding(sys.laws, {particles, 1}, sys.spec.w1_dim, seed);
    TimeGrid grid;
    grid.t_end = T;
    grid.dt = dt;
    grid.scheme = TimeGrid::Scheme::Rk4;
    grid.snapshot_stride = 1;
    TrajectoryLog log = integrate_particle(table.tables, sys.spec, sys.data, grid);

    Vec center(static_cast<std::size_t>(sys.spec.w1_dim), 0.0);
    PairTestFunction psi = gaussian_bump(center, 0.5, 1.0);

    PdeResidualOutcome out;
    out.dt_probes = dt_probes;
    for (double p : dt_probes)
        out.residuals.push_back(weak_pde_residual(log, sys.spec, sys.data, psi, t_eval, p));
    return out;
}

// ---------------------------------------------------------------------------
// config-driven runner

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::uint64_t> resolve_seeds(const json& cfg, int seed_offset) {
    std::vector<std::uint64_t> seeds;
    if (const char* env = std::getenv("MFLAB_SEED")) {
        seeds.push_back(static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10)));
    } else if (cfg.contains("seeds")) {
        for (const auto& s : cfg.at("seeds")) seeds.push_back(s.get<std::uint64_t>());
    } else {
        seeds = {1, 2, 3, 4, 5};
    }
    if (seeds.empty()) throw std::invalid_argument("seed list must be nonempty");
    for (auto& s : seeds) s += static_cast<std::uint64_t>(seed_offset);
    return seeds;
}

ConvergenceConfig parse_convergence(const json& p, bool three_layer) {
    ConvergenceConfig cfg;
    cfg.which = three_layer ? ConvergenceConfig::Which::ThreeLayer
                            : ConvergenceConfig::Which::TwoLayer;
    cfg.d1 = p.value("d1", 3);
    if (p.contains("widths"))
        cfg.widths = p.at("widths").get<std::vector<int>>();
    else
        cfg.widths = three_layer ? std::vector<int>{64, 64} : std::vector<int>{500};
    cfg.act1 = p.value("act1", "tanh");
    cfg.act2 = p.value("act2", "tanh");
    cfg.act3 = p.value("act3", "sleaky(0.2)");
    cfg.loss = p.value("loss", "huber(1)");
    cfg.teacher_width = p.value("teacher_width", 3);
    cfg.label_noise = p.value("label_noise", 0.0);
    cfg.dataset_size = p.value("dataset_size", 128);
    cfg.T = p.value("T", three_layer ? 30.0 : 50.0);
    cfg.freeze_w3 = p.value("freeze_w3", three_layer);
    return cfg;
}

} // namespace

void write_results_csv(const MetricReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "experiment,seed,knob,knob_value,metric,value\n";
    for (const auto& r : report.rows)
        out << r.experiment << ',' << r.seed << ',' << r.knob << ','
            << fmt_double(r.knob_value) << ',' << r.metric << ',' << fmt_double(r.value)
            << '\n';
}

MetricReport run_experiment(const std::string& config_json, const std::string& out_dir,
                            int seed_offset, int threads) {
    const auto t_start = std::chrono::steady_clock::now();
    json cfg = json::parse(config_json);
    const std::string exp = cfg.at("experiment").get<std::string>();
    const json params = cfg.value("params", json::object());
    std::vector<std::uint64_t> seeds = resolve_seeds(cfg, seed_offset);

    std::filesystem::create_directories(out_dir);
    MetricReport report;

    if (exp == "gradcheck") {
        const int instances = params.value("instances", 20);
        GradcheckOutcome out = run_gradcheck(instances, seeds[0], params.value("step", 1e-5));
        for (std::size_t i = 0; i < out.max_rel_errors.size(); ++i)
            report.add(exp, seeds[0], "instance", static_cast<double>(i), "max_rel_error",
                       out.max_rel_errors[i]);
    } else if (exp == "picard") {
        PicardOutcome out =
            run_picard_decay(params.value("T", 1.0), params.value("dt", 1e-3),
                             params.value("tol", 1e-8), params.value("k_max", 25));
        report.add(exp, seeds[0], "none", 0, "iterations",
                   static_cast<double>(out.report.iterations_used));
        report.add(exp, seeds[0], "none", 0, "converged", out.report.converged ? 1.0 : 0.0);
        report.add(exp, seeds[0], "none", 0, "final_residual",
                   out.report.residuals.empty() ? 0.0 : out.report.residuals.back());
        report.add(exp, seeds[0], "none", 0, "sup_err_vs_exact", out.sup_err_vs_exact);
        report.add(exp, seeds[0], "none", 0, "sup_err_vs_rk4", out.sup_err_vs_rk4);
        report.add(exp, seeds[0], "none", 0, "ratios_decreasing",
                   out.ratios_decreasing ? 1.0 : 0.0);
        for (std::size_t k = 0; k < out.report.residuals.size(); ++k)
            report.add(exp, seeds[0], "iteration", static_cast<double>(k), "residual",
                       out.report.residuals[k]);
    } else if (exp == "eps_scaling") {
        std::vector<double> eps =
            params.value("eps", std::vector<double>{1e-2, 2.5e-3, 6.25e-4});
        EpsScalingOutcome out =
            run_eps_scaling(params.value("n", 200), eps, seeds, params.value("T", 1.0),
                            params.value("dataset_size", 64), threads);
        for (std::size_t ei = 0; ei < out.eps.size(); ++ei) {
            for (std::size_t si = 0; si < seeds.size(); ++si)
                report.add(exp, seeds[si], "epsilon", out.eps[ei], "coupling_distance",
                           out.distances[ei][si]);
            if (seeds.size() > 1)
                report.add(exp, 0, "epsilon", out.eps[ei], "median_coupling_distance",
                           out.medians[ei]);
        }
        if (out.has_slope) {
            report.add(exp, 0, "none", 0, "loglog_slope", out.slope.slope);
            report.add(exp, 0, "none", 0, "loglog_slope_stderr", out.slope.stderr_);
        }
    } else if (exp == "width_scaling") {
        std::vector<int> widths =
            params.value("widths", std::vector<int>{100, 200, 400, 800});
        WidthScalingOutcome out = run_width_scaling(
            widths, params.value("n_ref", 0) > 0 ? params.at("n_ref").get<int>()
                                                 : 8 * *std::max_element(widths.begin(),
                                                                          widths.end()),
            seeds, params.value("T", 1.0), params.value("dt", 1e-3),
            params.value("dataset_size", 64), params.value("stride", 10), threads);
        for (std::size_t wi = 0; wi < out.widths.size(); ++wi) {
            for (std::size_t si = 0; si < seeds.size(); ++si) {
                report.add(exp, seeds[si], "width", out.widths[wi], "coupling_distance",
                           out.distances[wi][si]);
                report.add(exp, seeds[si], "width", out.widths[wi], "test_function_gap",
                           out.psi_gaps[wi][si]);
            }
            if (seeds.size() > 1) {
                report.add(exp, 0, "width", out.widths[wi], "median_coupling_distance",
                           out.median_distance[wi]);
                report.add(exp, 0, "width", out.widths[wi], "median_test_function_gap",
                           out.median_gap[wi]);
            }
        }
        if (out.has_slope) {
            report.add(exp, 0, "none", 0, "loglog_slope", out.slope.slope);
            report.add(exp, 0, "none", 0, "loglog_slope_stderr", out.slope.stderr_);
        }
    } else if (exp == "translation") {
        std::vector<int> widths = params.value("widths", std::vector<int>{100, 200});
        TranslationOutcome out = run_translation(widths, seeds, params.value("t", 0.5),
                                                 params.value("dt", 2.5e-3), threads);
        for (std::size_t wi = 0; wi < out.widths.size(); ++wi)
            for (std::size_t si = 0; si < seeds.size(); ++si) {
                report.add(exp, seeds[si], "width", out.widths[wi], "spread_layer2",
                           out.spread_layer2[wi][si]);
                report.add(exp, seeds[si], "width", out.widths[wi], "spread_layer3",
                           out.spread_layer3[wi][si]);
            }
    } else if (exp == "measurability") {
        std::vector<int> widths = params.value("widths", std::vector<int>{100, 200});
        MeasurabilityOutcome out = run_measurability(widths, seeds, params.value("T", 0.5),
                                                     params.value("dt", 2.5e-3), threads);
        for (std::size_t wi = 0; wi < out.widths.size(); ++wi)
            for (std::size_t si = 0; si < seeds.size(); ++si)
                report.add(exp, seeds[si], "width", out.widths[wi], "reduced_gap_layer3",
                           out.gaps[wi][si]);
        report.add(exp, 0, "none", 0, "duplication_asymmetry", out.duplication_asymmetry);
    } else if (exp == "global_conv") {
        const bool three = params.value("which", std::string("two_layer")) == "three_layer";
        ConvergenceConfig ccfg = parse_convergence(params, three);
        for (std::size_t si = 0; si < seeds.size(); ++si) {
            GlobalConvOutcome out = run_global_conv(
                ccfg, seeds[si], params.value("dt", 1e-2), params.value("stride", 50));
            report.add(exp, seeds[si], "none", 0, "final_loss", out.report.final_loss);
            report.add(exp, seeds[si], "none", 0, "baseline_loss",
                       out.report.baseline_loss);
            report.add(exp, seeds[si], "none", 0, "loss_monotone",
                       out.report.loss_monotone ? 1.0 : 0.0);
            report.add(exp, seeds[si], "none", 0, "max_loss_increase",
                       out.report.max_loss_increase);
            report.add(exp, seeds[si], "none", 0, "drift_tail_first", out.drift_tail_first);
            report.add(exp, seeds[si], "none", 0, "drift_tail_second",
                       out.drift_tail_second);
            report.add(exp, seeds[si], "none", 0, "barrier_held",
                       out.barrier_held ? 1.0 : 0.0);
            report.add(exp, seeds[si], "none", 0, "support_coverage",
                       out.report.support_coverage);

            // per-run trajectory summary
            std::ofstream traj(std::filesystem::path(out_dir) /
                               ("traj_" + exp + "_" + std::to_string(seeds[si]) + ".csv"));
            traj << "t,loss,drift,norm_W,max_update\n";
            for (std::size_t k = 0; k < out.report.times.size(); ++k)
                traj << fmt_double(out.report.times[k]) << ','
                     << fmt_double(out.report.loss_curve[k]) << ','
                     << fmt_double(out.report.drift[k]) << ','
                     << fmt_double(out.log.diags[k].norm_W) << ','
                     << fmt_double(out.log.diags[k].max_update) << '\n';
        }
    } else if (exp == "pde_residual") {
        std::vector<double> probes =
            params.value("dt_probes", std::vector<double>{1e-2, 5e-3});
        PdeResidualOutcome out = run_pde_residual(
            params.value("particles", 500), params.value("T", 0.6),
            params.value("dt", 1e-3), params.value("t", 0.5), probes, seeds[0]);
        for (std::size_t k = 0; k < out.dt_probes.size(); ++k)
            report.add(exp, seeds[0], "dt_probe", out.dt_probes[k], "residual",
                       out.residuals[k]);
    } else {
        throw std::invalid_argument("unknown experiment: " + exp);
    }

    write_results_csv(report, (std::filesystem::path(out_dir) / "results.csv").string());

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    json manifest;
    manifest["config"] = cfg;
    manifest["resolved_seeds"] = seeds;
    manifest["version"] = kVersion;
    manifest["rows"] = report.rows.size();
    manifest["wall_time_sec"] = wall;
    std::ofstream mout(std::filesystem::path(out_dir) / "manifest.json");
    mout << manifest.dump(2) << "\n";

    return report;
}

} // namespace mflab
