#include "mflab/convergence.hpp"
#include "mflab/keyed_rng.hpp"

#include <cmath>
#include <stdexcept>

namespace mflab {

void ConvergenceConfig::validate() const {
    Activation a1 = Activation::parse(act1);
    if (!a1.bounded())
        throw std::invalid_argument(
            "first activation must be a bounded universal approximator (tanh|sigmoid|gauss)");
    Activation out = Activation::parse(which == Which::TwoLayer ? act2 : act3);
    if (out.kind == Activation::Kind::Gauss)
        throw std::invalid_argument("output activation needs a nonvanishing derivative");
    if (which == Which::ThreeLayer) {
        Activation a2 = Activation::parse(act2);
        if (!a2.bounded())
            throw std::invalid_argument("three-layer hidden activation must be bounded");
        if (a2.kind == Activation::Kind::Gauss)
            throw std::invalid_argument(
                "three-layer hidden activation needs a nonvanishing derivative");
    }
    if (d1 < 2) throw std::invalid_argument("input dimension must be >= 2 (trailing 1)");
    if (static_cast<int>(widths.size()) != layers() - 1)
        throw std::invalid_argument("widths must list the hidden layer sizes");
    for (int n : widths)
        if (n < 1) throw std::invalid_argument("widths must be positive");
    if (dataset_size < 1) throw std::invalid_argument("dataset must be nonempty");
    if (teacher_width < 1) throw std::invalid_argument("teacher width must be positive");
    if (T < 0.0) throw std::invalid_argument("horizon must be nonnegative");
    if (label_noise < 0.0) throw std::invalid_argument("label noise must be nonnegative");
    if (freeze_w3) {
        if (which != Which::ThreeLayer)
            throw std::invalid_argument("freeze_w3 applies to the three-layer system");
        double lo = 0.0;
        if (w3_law.kind == LawSpec::Kind::Uniform)
            lo = std::min(std::abs(w3_law.a), std::abs(w3_law.b)) *
                 (w3_law.a * w3_law.b > 0.0 ? 1.0 : 0.0);
        else if (w3_law.kind == LawSpec::Kind::Point)
            lo = std::abs(w3_law.c);
        else if (w3_law.kind == LawSpec::Kind::Epigraph)
            lo = (w3_law.level > 0.0 || w3_law.level + w3_law.slab < 0.0)
                     ? std::min(std::abs(w3_law.level), std::abs(w3_law.level + w3_law.slab))
                     : 0.0;
        if (lo <= 0.0)
            throw std::invalid_argument(
                "frozen third layer requires an init law supported away from 0");
    }
}

namespace {

ArchitectureSpec convergence_spec(const ConvergenceConfig& cfg) {
    ArchitectureSpec spec;
    spec.L = cfg.layers();
    spec.x_dim = cfg.d1;
    spec.input_bias = false;
    spec.w1_dim = cfg.d1;
    spec.hidden_acts.push_back(Activation::parse(cfg.act1));
    if (spec.L == 2) {
        spec.output_act = Activation::parse(cfg.act2);
    } else {
        spec.hidden_acts.push_back(Activation::parse(cfg.act2));
        spec.output_act = Activation::parse(cfg.act3);
    }
    spec.loss = Loss::parse(cfg.loss);
    spec.w_regs.assign(static_cast<std::size_t>(spec.L), Regularizer{});
    spec.b_regs.assign(static_cast<std::size_t>(spec.L) - 1, Regularizer{});
    spec.w_schedules.assign(static_cast<std::size_t>(spec.L), Schedule::constant(1.0));
    // biases absent from these networks: frozen at zero
    spec.b_schedules.assign(static_cast<std::size_t>(spec.L) - 1, Schedule::zero());
    if (cfg.freeze_w3) spec.w_schedules[2] = Schedule::zero();
    spec.growth_p = 2.0;
    spec.validate();
    return spec;
}

} // namespace

ConvergenceSystem build_convergence_system(const ConvergenceConfig& cfg,
                                           std::uint64_t seed) {
    cfg.validate();
    ConvergenceSystem sys;
    sys.spec = convergence_spec(cfg);

    // teacher of the same class, small width, deterministic in the seed
    std::vector<int> teacher_widths(static_cast<std::size_t>(cfg.layers()), cfg.teacher_width);
    teacher_widths.back() = 1;
    ParamState teacher = make_state(teacher_widths, cfg.d1);
    {
        KeyedStream s(seed, 11, 0, 0, 0);
        for (auto& v : teacher.w1) v = s.next_gaussian();
        for (auto& t : teacher.w)
            for (auto& v : t) v = s.next_uniform(0.5, 1.5) * (s.next_unit() < 0.5 ? -1.0 : 1.0);
        // biases stay zero
    }
    sys.teacher = teacher;

    // inputs on [-1,1]^{d1-1} x {1}; the trailing 1 is the usual convention
    // so the first layer can express affine features
    sys.data.xs.resize(static_cast<std::size_t>(cfg.dataset_size));
    sys.data.ys.resize(static_cast<std::size_t>(cfg.dataset_size));
    ForwardCache cache;
    for (int k = 0; k < cfg.dataset_size; ++k) {
        KeyedStream s(seed, 12, static_cast<std::uint64_t>(k), 0, 0);
        Vec x(static_cast<std::size_t>(cfg.d1));
        for (int c = 0; c + 1 < cfg.d1; ++c) x[static_cast<std::size_t>(c)] = s.next_uniform(-1.0, 1.0);
        x[static_cast<std::size_t>(cfg.d1) - 1] = 1.0;
        forward(teacher, sys.spec, x, cache);
        double y = cache.yhat;
        if (cfg.label_noise > 0.0) y += cfg.label_noise * s.next_gaussian();
        sys.data.xs[static_cast<std::size_t>(k)] = std::move(x);
        sys.data.ys[static_cast<std::size_t>(k)] = y;
    }

    // i.i.d. initialization through an embedding table
    InitLawSpec laws;
    laws.w_laws.push_back(cfg.w1_law);
    laws.w_laws.push_back(cfg.w2_law);
    if (cfg.layers() == 3) laws.w_laws.push_back(cfg.w3_law);
    for (int i = 2; i <= cfg.layers(); ++i) laws.b_laws.push_back(LawSpec::point(0.0));
    std::vector<int> widths = cfg.widths;
    widths.push_back(1);
    EmbeddingTable table = sample_embedding(laws, widths, cfg.d1, seed);
    sys.init = table.tables;

    double acc = 0.0;
    const double flat = sys.spec.phi_out(0.0);
    for (double y : sys.data.ys) acc += sys.spec.loss.value(y, flat);
    sys.baseline_loss = acc / static_cast<double>(sys.data.ys.size());
    return sys;
}

double support_probe(const ParamState& state, double center_radius, double ball_radius,
                     int ball_count, std::uint64_t seed) {
    if (ball_count < 1) throw std::invalid_argument("need at least one probe ball");
    const int d = state.w1_dim;
    int covered = 0;
    for (int b = 0; b < ball_count; ++b) {
        KeyedStream s(seed, 21, static_cast<std::uint64_t>(b), 0, 0);
        // direction x radius^(1/d) draw, uniform in the center ball
        Vec c(static_cast<std::size_t>(d));
        double sq = 0.0;
        for (auto& v : c) {
            v = s.next_gaussian();
            sq += v * v;
        }
        double r = center_radius * std::pow(s.next_unit(), 1.0 / static_cast<double>(d));
        double inv = r / std::max(std::sqrt(sq), 1e-300);
        for (auto& v : c) v *= inv;

        bool hit = false;
        for (int j = 0; j < state.width(1) && !hit; ++j) {
            const double* row = state.w1_row(j);
            double dist = 0.0;
            for (int k = 0; k < d; ++k) {
                double diff = row[k] - c[static_cast<std::size_t>(k)];
                dist += diff * diff;
            }
            hit = dist <= ball_radius * ball_radius;
        }
        if (hit) ++covered;
    }
    return static_cast<double>(covered) / static_cast<double>(ball_count);
}

ConvergenceReport convergence_diagnostics(const TrajectoryLog& log,
                                          const ArchitectureSpec& spec,
                                          const Dataset& data, double baseline,
                                          double monotone_tol, double dt) {
    if (log.empty()) throw std::invalid_argument("empty trajectory log");
    ConvergenceReport rep;
    rep.times = log.times;
    rep.baseline_loss = baseline;
    rep.loss_curve.reserve(log.size());
    rep.drift.reserve(log.size());
    for (std::size_t k = 0; k < log.size(); ++k) {
        rep.loss_curve.push_back(log.diags[k].loss);
        ParamState rhs = particle_rhs(log.states[k], spec, data, log.times[k]);
        double drift = 0.0;
        for (double v : rhs.w[0]) drift = std::max(drift, std::abs(v));
        rep.drift.push_back(drift);
    }
    rep.final_loss = rep.loss_curve.back();
    rep.loss_monotone = true;
    rep.max_loss_increase = 0.0;
    for (std::size_t k = 1; k < rep.loss_curve.size(); ++k) {
        double up = rep.loss_curve[k] - rep.loss_curve[k - 1];
        rep.max_loss_increase = std::max(rep.max_loss_increase, up);
        double steps = 1.0;
        if (dt > 0.0) {
            double span = log.times[k] - log.times[k - 1];
            steps = std::max(1.0, std::round(span / dt));
        }
        if (up > monotone_tol * steps) rep.loss_monotone = false;
    }
    rep.support_coverage = support_probe(log.states.back(), 2.0, 0.75, 20, 1234);
    return rep;
}

PairTestFunction gaussian_bump(const Vec& center_w1, double center_w2, double width) {
    PairTestFunction f;
    const Vec c1 = center_w1;
    const double c2 = center_w2;
    const double inv2w2 = 1.0 / (2.0 * width * width);
    f.value = [c1, c2, inv2w2](const Vec& u1, double u2) {
        double sq = 0.0;
        for (std::size_t k = 0; k < c1.size(); ++k) {
            double d = u1[k] - c1[k];
            sq += d * d;
        }
        double d2 = u2 - c2;
        return std::exp(-(sq + d2 * d2) * inv2w2);
    };
    f.gradient = [c1, c2, inv2w2](const Vec& u1, double u2, Vec& g1, double& g2) {
        double sq = 0.0;
        for (std::size_t k = 0; k < c1.size(); ++k) {
            double d = u1[k] - c1[k];
            sq += d * d;
        }
        double d2 = u2 - c2;
        double v = std::exp(-(sq + d2 * d2) * inv2w2);
        g1.resize(c1.size());
        for (std::size_t k = 0; k < c1.size(); ++k)
            g1[k] = -2.0 * inv2w2 * (u1[k] - c1[k]) * v;
        g2 = -2.0 * inv2w2 * d2 * v;
    };
    return f;
}

double weak_pde_residual(const TrajectoryLog& log, const ArchitectureSpec& spec,
                         const Dataset& data, const PairTestFunction& psi, double t,
                         double dt_probe) {
    if (spec.L != 2) throw std::invalid_argument("weak-form residual is a two-layer check");
    if (dt_probe <= 0.0) throw std::invalid_argument("probe step must be positive");
    if (!log.has_time(t - dt_probe) || !log.has_time(t + dt_probe) || !log.has_time(t))
        throw std::invalid_argument(
            "log lacks snapshots at t and t +- dt_probe (central difference impossible)");

    auto pair_mean = [&](const ParamState& s) {
        double acc = 0.0;
        const int n1 = s.width(1);
        Vec u1(static_cast<std::size_t>(s.w1_dim));
        for (int j = 0; j < n1; ++j) {
            const double* row = s.w1_row(j);
            for (int c = 0; c < s.w1_dim; ++c) u1[static_cast<std::size_t>(c)] = row[c];
            acc += psi.value(u1, s.wi(2, j, 0));
        }
        return acc / static_cast<double>(n1);
    };

    const double m_minus = pair_mean(log.at_time(t - dt_probe));
    const double m_plus = pair_mean(log.at_time(t + dt_probe));
    const double dm_dt = (m_plus - m_minus) / (2.0 * dt_probe);

    // G is the negated particle drift: G = xi * E_Z[Delta]
    const ParamState& s = log.at_time(t);
    ParamState rhs = particle_rhs(s, spec, data, t);
    double transport = 0.0;
    const int n1 = s.width(1);
    Vec u1(static_cast<std::size_t>(s.w1_dim)), g1;
    double g2 = 0.0;
    for (int j = 0; j < n1; ++j) {
        const double* row = s.w1_row(j);
        for (int c = 0; c < s.w1_dim; ++c) u1[static_cast<std::size_t>(c)] = row[c];
        psi.gradient(u1, s.wi(2, j, 0), g1, g2);
        double inner = 0.0;
        const double* drift_row = rhs.w1_row(j);
        for (int c = 0; c < s.w1_dim; ++c) inner += g1[static_cast<std::size_t>(c)] * (-drift_row[c]);
        inner += g2 * (-rhs.wi(2, j, 0));
        transport += inner;
    }
    transport /= static_cast<double>(n1);

    return std::abs(dm_dt + transport);
}

} // namespace mflab
