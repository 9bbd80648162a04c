#include "mflab/architecture.hpp"
#include "mflab/keyed_rng.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace mflab {

namespace {

// parses "name" or "name(arg)" into (name, has_arg, arg)
bool split_arg(const std::string& s, std::string& name, double& arg, bool& has_arg) {
    auto open = s.find('(');
    if (open == std::string::npos) {
        name = s;
        has_arg = false;
        return true;
    }
    if (s.back() != ')') return false;
    name = s.substr(0, open);
    std::string inner = s.substr(open + 1, s.size() - open - 2);
    try {
        std::size_t used = 0;
        arg = std::stod(inner, &used);
        if (used != inner.size()) return false;
    } catch (...) {
        return false;
    }
    has_arg = true;
    return true;
}

std::string fmt_arg(const char* name, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s(%g)", name, v);
    return buf;
}

} // namespace

std::string Activation::name() const {
    switch (kind) {
        case Kind::Tanh: return "tanh";
        case Kind::Sigmoid: return "sigmoid";
        case Kind::Gauss: return "gauss";
        case Kind::SmoothLeaky: return fmt_arg("sleaky", alpha);
        case Kind::Linear: return "linear";
        case Kind::HardLeaky: return fmt_arg("lrelu", alpha);
    }
    return "?";
}

Activation Activation::parse(const std::string& s) {
    std::string name;
    double arg = 0.0;
    bool has_arg = false;
    if (!split_arg(s, name, arg, has_arg))
        throw std::invalid_argument("bad activation spec: " + s);
    if (name == "tanh") return {Kind::Tanh, 0.0};
    if (name == "sigmoid") return {Kind::Sigmoid, 0.0};
    if (name == "gauss") return {Kind::Gauss, 0.0};
    if (name == "linear") return {Kind::Linear, 0.0};
    if (name == "sleaky") {
        double a = has_arg ? arg : 0.2;
        if (a <= 0.0 || a >= 1.0)
            throw std::invalid_argument("sleaky slope must lie in (0,1): " + s);
        return {Kind::SmoothLeaky, a};
    }
    throw std::invalid_argument("unknown activation: " + s);
}

std::string Loss::name() const {
    switch (kind) {
        case Kind::Huber: return fmt_arg("huber", delta);
        case Kind::Squared: return "squared";
        case Kind::Exp: return "exp";
    }
    return "?";
}

Loss Loss::parse(const std::string& s) {
    std::string name;
    double arg = 0.0;
    bool has_arg = false;
    if (!split_arg(s, name, arg, has_arg))
        throw std::invalid_argument("bad loss spec: " + s);
    if (name == "huber") {
        double d = has_arg ? arg : 1.0;
        if (d <= 0.0) throw std::invalid_argument("huber delta must be positive");
        return {Kind::Huber, d};
    }
    if (name == "squared") return {Kind::Squared, 0.0};
    if (name == "exp") return {Kind::Exp, 0.0};
    throw std::invalid_argument("unknown loss: " + s);
}

std::string Regularizer::name() const {
    switch (kind) {
        case Kind::None: return "none";
        case Kind::Quad: return fmt_arg("quad", lambda);
    }
    return "?";
}

Regularizer Regularizer::parse(const std::string& s) {
    std::string name;
    double arg = 0.0;
    bool has_arg = false;
    if (!split_arg(s, name, arg, has_arg))
        throw std::invalid_argument("bad regularizer spec: " + s);
    if (name == "none") return {Kind::None, 0.0};
    if (name == "quad") {
        if (!has_arg) throw std::invalid_argument("quad needs a coefficient: quad(lambda)");
        return {Kind::Quad, arg};
    }
    throw std::invalid_argument("unknown regularizer: " + s);
}

std::string Schedule::name() const {
    if (kind == Kind::Constant) return fmt_arg("const", scale);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "lindecay(%g,%g)", scale, rate);
    return buf;
}

void ArchitectureSpec::validate() const {
    if (L < 2) throw std::invalid_argument("layer count must be at least 2");
    if (x_dim < 1) throw std::invalid_argument("input dimension must be positive");
    if (w1_dim != x_dim + (input_bias ? 1 : 0))
        throw std::invalid_argument("w1 dimension inconsistent with input layout");
    if (static_cast<int>(hidden_acts.size()) != L - 1 ||
        static_cast<int>(w_regs.size()) != L ||
        static_cast<int>(b_regs.size()) != L - 1 ||
        static_cast<int>(w_schedules.size()) != L ||
        static_cast<int>(b_schedules.size()) != L - 1)
        throw std::invalid_argument("per-layer table sizes inconsistent with layer count");
    if (growth_p < 1.0) throw std::invalid_argument("growth parameter must be >= 1");
}

void FcConfig::validate() const {
    if (widths.size() < 2) throw std::invalid_argument("need at least two layers");
    if (widths.back() != 1) throw std::invalid_argument("last layer width must be 1");
    for (int n : widths)
        if (n < 1) throw std::invalid_argument("widths must be positive");
    if (d < 1) throw std::invalid_argument("input dimension must be positive");
    if (activations.size() != widths.size() - 1)
        throw std::invalid_argument("need one activation per hidden transition");
    if (!w_regs.empty() && w_regs.size() != widths.size())
        throw std::invalid_argument("weight regularizer list must match layer count");
    if (!b_regs.empty() && b_regs.size() != widths.size() - 1)
        throw std::invalid_argument("bias regularizer list must match layer count - 1");
}

ArchitectureSpec make_fc_architecture(const FcConfig& cfg) {
    cfg.validate();
    ArchitectureSpec spec;
    spec.L = cfg.layers();
    spec.x_dim = cfg.d;
    spec.input_bias = true;
    spec.w1_dim = cfg.d + 1;
    for (const auto& a : cfg.activations) spec.hidden_acts.push_back(Activation::parse(a));
    spec.output_act = Activation{Activation::Kind::Linear, 0.0};
    spec.loss = Loss::parse(cfg.loss);
    spec.w_regs.assign(static_cast<std::size_t>(spec.L), Regularizer{});
    spec.b_regs.assign(static_cast<std::size_t>(spec.L - 1), Regularizer{});
    for (std::size_t i = 0; i < cfg.w_regs.size(); ++i)
        spec.w_regs[i] = Regularizer::parse(cfg.w_regs[i]);
    for (std::size_t i = 0; i < cfg.b_regs.size(); ++i)
        spec.b_regs[i] = Regularizer::parse(cfg.b_regs[i]);
    spec.w_schedules.assign(static_cast<std::size_t>(spec.L), Schedule::constant(1.0));
    spec.b_schedules.assign(static_cast<std::size_t>(spec.L - 1), Schedule::constant(1.0));
    spec.growth_p = 2.0;
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------
// assumption audit

namespace {

constexpr double kPassThreshold = 1e6;

struct Prober {
    KeyedStream rng;
    double radius;
    double growth_p;
    explicit Prober(std::uint64_t seed, double r, double p)
        : rng(seed), radius(r), growth_p(p) {}

    double scalar() { return rng.next_uniform(-radius, radius); }
    Vec vec(int dim) {
        Vec v(static_cast<std::size_t>(dim));
        for (auto& x : v) x = scalar();
        return v;
    }
    double pgrow(double a) { return std::pow(std::abs(a), growth_p); }
};

void push_item(AuditReport& rep, const std::string& name, double K, bool finite_ok,
               const std::string& note = "") {
    AuditItem it;
    it.name = name;
    it.estimated_K = K;
    it.pass = finite_ok && std::isfinite(K) && K <= kPassThreshold;
    it.note = note;
    if (!it.pass) rep.all_pass = false;
    rep.items.push_back(it);
}

} // namespace

AuditReport audit_assumptions(const ArchitectureSpec& spec, int sample_count,
                              double radius, std::uint64_t rng_seed) {
    if (sample_count < 1) throw std::invalid_argument("sample_count must be >= 1");
    spec.validate();
    AuditReport rep;
    const double p = spec.growth_p;
    // exp loss blows up quickly; clamp the probed ball so the probes
    // themselves stay representable
    double r = radius;
    if (spec.loss.kind == Loss::Kind::Exp) r = std::min(radius, 20.0);
    Prober pr(rng_seed, r, p);

    bool finite_ok = true;
    auto track = [&](double v) {
        if (!std::isfinite(v)) finite_ok = false;
        return v;
    };

    // A.1: schedule bound and Lipschitz constant on [0, 4r]
    {
        double bound = 0.0, lip = 0.0;
        auto probe_sched = [&](const Schedule& s) {
            for (int k = 0; k < sample_count; ++k) {
                double t = pr.rng.next_uniform(0.0, 4.0 * r);
                double u = pr.rng.next_uniform(0.0, 4.0 * r);
                bound = std::max(bound, std::abs(track(s(t))));
                if (std::abs(t - u) > 1e-12)
                    lip = std::max(lip, std::abs(track(s(t)) - track(s(u))) / std::abs(t - u));
            }
        };
        for (const auto& s : spec.w_schedules) probe_sched(s);
        for (const auto& s : spec.b_schedules) probe_sched(s);
        push_item(rep, "A1.schedule_bound", bound, finite_ok);
        push_item(rep, "A1.schedule_lipschitz", lip, finite_ok);
    }

    // A.2 phi_1
    {
        finite_ok = true;
        double grow = 0.0, lip = 0.0;
        for (int k = 0; k < sample_count; ++k) {
            Vec w = pr.vec(spec.w1_dim), w2 = pr.vec(spec.w1_dim), x = pr.vec(spec.x_dim);
            double f = track(spec.phi1(w, x));
            double f2 = track(spec.phi1(w2, x));
            grow = std::max(grow, std::abs(f) / (1.0 + std::sqrt(sq_norm(w))));
            Vec d(w.size());
            for (std::size_t c = 0; c < w.size(); ++c) d[c] = w[c] - w2[c];
            double dist = std::sqrt(sq_norm(d));
            if (dist > 1e-12) lip = std::max(lip, std::abs(f - f2) / dist);
        }
        push_item(rep, "A2.phi1_growth", grow, finite_ok);
        push_item(rep, "A2.phi1_lipschitz", lip, finite_ok);
    }

    // A.2 phi_i (i = 2..L) and phi_{L+1}
    for (int i = 2; i <= spec.L; ++i) {
        finite_ok = true;
        double grow = 0.0, pert = 0.0;
        for (int k = 0; k < sample_count; ++k) {
            double w = pr.scalar(), b = pr.scalar(), h = pr.scalar();
            double w2 = pr.scalar(), b2 = pr.scalar(), h2 = pr.scalar();
            double f = track(spec.phi(i, w, b, h));
            double f2 = track(spec.phi(i, w2, b2, h2));
            grow = std::max(grow, std::abs(f) / (1.0 + pr.pgrow(w) + pr.pgrow(b) + pr.pgrow(h)));
            double envelope = 1.0 + pr.pgrow(w) + pr.pgrow(w2) + pr.pgrow(b) + pr.pgrow(b2) +
                              pr.pgrow(h) + pr.pgrow(h2);
            double dist = std::abs(w - w2) + std::abs(b - b2) + std::abs(h - h2);
            if (dist > 1e-12) pert = std::max(pert, std::abs(f - f2) / (envelope * dist));
        }
        std::string tag = "A2.phi" + std::to_string(i);
        push_item(rep, tag + "_growth", grow, finite_ok);
        push_item(rep, tag + "_perturbation", pert, finite_ok);
    }
    {
        finite_ok = true;
        double grow = 0.0, pert = 0.0;
        for (int k = 0; k < sample_count; ++k) {
            double h = pr.scalar(), h2 = pr.scalar();
            double f = track(spec.phi_out(h)), f2 = track(spec.phi_out(h2));
            grow = std::max(grow, std::abs(f) / (1.0 + pr.pgrow(h)));
            double env = 1.0 + pr.pgrow(h) + pr.pgrow(h2);
            if (std::abs(h - h2) > 1e-12)
                pert = std::max(pert, std::abs(f - f2) / (env * std::abs(h - h2)));
        }
        push_item(rep, "A2.phi_out_growth", grow, finite_ok);
        push_item(rep, "A2.phi_out_perturbation", pert, finite_ok);
    }

    // A.3 sigma_L^H: bounded and Lipschitz in (yhat, h)
    {
        finite_ok = true;
        double bound = 0.0, lip = 0.0;
        for (int k = 0; k < sample_count; ++k) {
            double y = pr.scalar(), yh = pr.scalar(), yh2 = pr.scalar();
            double h = pr.scalar(), h2 = pr.scalar();
            double f = track(spec.sigma_LH(y, yh, h));
            double f2 = track(spec.sigma_LH(y, yh2, h2));
            bound = std::max(bound, std::abs(f));
            double dist = std::abs(yh - yh2) + std::abs(h - h2);
            if (dist > 1e-12) lip = std::max(lip, std::abs(f - f2) / dist);
        }
        push_item(rep, "A3.sigma_LH_bound", bound, finite_ok);
        push_item(rep, "A3.sigma_LH_lipschitz", lip, finite_ok);
    }

    // A.3 sigma_i^w / sigma_i^b growth and perturbation, i = 2..L
    for (int i = 2; i <= spec.L; ++i) {
        finite_ok = true;
        double grow = 0.0, pert = 0.0;
        for (int k = 0; k < sample_count; ++k) {
            double dh = pr.scalar(), w = pr.scalar(), b = pr.scalar(), g = pr.scalar(),
                   h = pr.scalar();
            double dh2 = pr.scalar(), w2 = pr.scalar(), b2 = pr.scalar(), g2 = pr.scalar(),
                   h2 = pr.scalar();
            double fw = track(spec.sigma_w(i, dh, w, b, g, h));
            double fb = track(spec.sigma_b(i, dh, w, b, g, h));
            double fw2 = track(spec.sigma_w(i, dh2, w2, b2, g2, h2));
            double fb2 = track(spec.sigma_b(i, dh2, w2, b2, g2, h2));
            grow = std::max(grow, std::max(std::abs(fw), std::abs(fb)) / (1.0 + pr.pgrow(dh)));
            double env = 1.0 + pr.pgrow(dh) + pr.pgrow(dh2);
            double dist = std::abs(dh - dh2) + std::abs(w - w2) + std::abs(b - b2) +
                          std::abs(h - h2) + std::abs(g - g2);
            if (dist > 1e-12)
                pert = std::max(pert,
                                std::max(std::abs(fw - fw2), std::abs(fb - fb2)) / (env * dist));
        }
        std::string tag = "A3.sigma" + std::to_string(i);
        push_item(rep, tag + "_wb_growth", grow, finite_ok);
        push_item(rep, tag + "_wb_perturbation", pert, finite_ok);
    }

    // A.3 sigma_{i-1}^H, i = 2..L
    for (int i = 2; i <= spec.L; ++i) {
        finite_ok = true;
        double grow = 0.0, pert = 0.0;
        for (int k = 0; k < sample_count; ++k) {
            double dh = pr.scalar(), w = pr.scalar(), b = pr.scalar(), g = pr.scalar(),
                   h = pr.scalar();
            double dh2 = pr.scalar(), w2 = pr.scalar(), b2 = pr.scalar(), g2 = pr.scalar(),
                   h2 = pr.scalar();
            double f = track(spec.sigma_Hprev(i, dh, w, b, g, h));
            double f2 = track(spec.sigma_Hprev(i, dh2, w2, b2, g2, h2));
            grow = std::max(grow,
                            std::abs(f) / (1.0 + pr.pgrow(dh) + pr.pgrow(w) + pr.pgrow(b)));
            double env = 1.0 + pr.pgrow(dh) + pr.pgrow(dh2) + pr.pgrow(w) + pr.pgrow(w2) +
                         pr.pgrow(b) + pr.pgrow(b2);
            double dist = std::abs(dh - dh2) + std::abs(w - w2) + std::abs(b - b2) +
                          std::abs(h - h2) + std::abs(g - g2);
            if (dist > 1e-12) pert = std::max(pert, std::abs(f - f2) / (env * dist));
        }
        std::string tag = "A3.sigma" + std::to_string(i - 1) + "H";
        push_item(rep, tag + "_growth", grow, finite_ok);
        push_item(rep, tag + "_perturbation", pert, finite_ok);
    }

    // A.3 sigma_1^w
    {
        finite_ok = true;
        double grow = 0.0, pert = 0.0;
        for (int k = 0; k < sample_count; ++k) {
            double dh = pr.scalar(), dh2 = pr.scalar();
            Vec w = pr.vec(spec.w1_dim), w2 = pr.vec(spec.w1_dim), x = pr.vec(spec.x_dim);
            Vec f = spec.sigma_w1(dh, w, x);
            Vec f2 = spec.sigma_w1(dh2, w2, x);
            if (!all_finite(f) || !all_finite(f2)) finite_ok = false;
            grow = std::max(grow, std::sqrt(sq_norm(f)) / (1.0 + pr.pgrow(dh)));
            Vec d(f.size());
            for (std::size_t c = 0; c < f.size(); ++c) d[c] = f[c] - f2[c];
            Vec dw(w.size());
            for (std::size_t c = 0; c < w.size(); ++c) dw[c] = w[c] - w2[c];
            double env = 1.0 + pr.pgrow(dh) + pr.pgrow(dh2);
            double dist = std::abs(dh - dh2) + std::sqrt(sq_norm(dw));
            if (dist > 1e-12) pert = std::max(pert, std::sqrt(sq_norm(d)) / (env * dist));
        }
        push_item(rep, "A3.sigma1w_growth", grow, finite_ok);
        push_item(rep, "A3.sigma1w_perturbation", pert, finite_ok);
    }

    // smoothness probe: Lipschitz constant of each activation derivative at
    // two scales; a kink shows up as the estimate growing ~1/h
    {
        auto probe_kink = [&](const Activation& a) {
            std::vector<double> pts{0.0, 1e-4, -1e-4, 1e-2, -1e-2};
            KeyedStream s(rng_seed ^ 0x5eedULL);
            for (int k = 0; k < std::max(64, sample_count); ++k)
                pts.push_back(s.next_uniform(-r, r));
            double lip_coarse = 0.0, lip_fine = 0.0;
            const double hc = 1e-3, hf = 1e-6;
            for (double x0 : pts) {
                lip_coarse = std::max(lip_coarse,
                                      std::abs(a.deriv(x0 + hc) - a.deriv(x0 - hc)) / (2 * hc));
                lip_fine = std::max(lip_fine,
                                    std::abs(a.deriv(x0 + hf) - a.deriv(x0 - hf)) / (2 * hf));
            }
            return lip_fine > 10.0 * std::max(lip_coarse, 1.0);
        };
        for (const auto& a : spec.hidden_acts)
            if (probe_kink(a)) rep.kink_flag = true;
        if (probe_kink(spec.output_act)) rep.kink_flag = true;
        if (rep.kink_flag)
            rep.items.push_back(
                {"smoothness.activation_derivative", 0.0, true,
                 "derivative Lipschitz estimate grows with resolution (kink)"});
    }

    return rep;
}

} // namespace mflab
