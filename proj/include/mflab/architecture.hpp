#ifndef MFLAB_ARCHITECTURE_HPP
#define MFLAB_ARCHITECTURE_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mflab {

// Finite-dimensional stand-in for the Hilbert-space elements. Layer values,
// biases and weights at depth >= 2 are scalars; only the first-layer weight
// and the input are genuine vectors.
using Vec = std::vector<double>;

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline double dot(const Vec& a, const Vec& b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double sq_norm(const Vec& a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return s;
}

// ---------------------------------------------------------------------------
// scalar activations

struct Activation {
    enum class Kind { Tanh, Sigmoid, Gauss, SmoothLeaky, Linear, HardLeaky };
    Kind kind = Kind::Tanh;
    double alpha = 0.2; // slope parameter for (smoothed) leaky units

    double value(double x) const {
        switch (kind) {
            case Kind::Tanh: return std::tanh(x);
            case Kind::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
            case Kind::Gauss: return 0.3989422804014326779 * std::exp(-0.5 * x * x);
            case Kind::SmoothLeaky: return alpha * x + (1.0 - alpha) * softplus(x);
            case Kind::Linear: return x;
            case Kind::HardLeaky: return x >= 0.0 ? x : alpha * x;
        }
        return x;
    }

    double deriv(double x) const {
        switch (kind) {
            case Kind::Tanh: {
                double t = std::tanh(x);
                return 1.0 - t * t;
            }
            case Kind::Sigmoid: {
                double s = 1.0 / (1.0 + std::exp(-x));
                return s * (1.0 - s);
            }
            case Kind::Gauss:
                return -x * 0.3989422804014326779 * std::exp(-0.5 * x * x);
            case Kind::SmoothLeaky:
                return alpha + (1.0 - alpha) / (1.0 + std::exp(-x));
            case Kind::Linear: return 1.0;
            case Kind::HardLeaky: return x >= 0.0 ? 1.0 : alpha;
        }
        return 1.0;
    }

    bool bounded() const {
        return kind == Kind::Tanh || kind == Kind::Sigmoid || kind == Kind::Gauss;
    }

    bool smooth() const { return kind != Kind::HardLeaky; }

    std::string name() const;
    static Activation parse(const std::string& s);
    static Activation hard_leaky(double a) { return Activation{Kind::HardLeaky, a}; }

private:
    static double softplus(double x) {
        if (x > 30.0) return x;
        if (x < -30.0) return std::exp(x);
        return std::log1p(std::exp(x));
    }
};

// ---------------------------------------------------------------------------
// losses; d2 is the partial derivative in the prediction argument

struct Loss {
    enum class Kind { Huber, Squared, Exp };
    Kind kind = Kind::Huber;
    double delta = 1.0;

    double value(double y, double yhat) const {
        double r = yhat - y;
        switch (kind) {
            case Kind::Huber: {
                double a = std::abs(r);
                return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
            }
            case Kind::Squared: return 0.5 * r * r;
            case Kind::Exp: return std::exp(-y * yhat);
        }
        return 0.0;
    }

    double d2(double y, double yhat) const {
        double r = yhat - y;
        switch (kind) {
            case Kind::Huber: return std::max(-delta, std::min(delta, r));
            case Kind::Squared: return r;
            case Kind::Exp: return -y * std::exp(-y * yhat);
        }
        return 0.0;
    }

    std::string name() const;
    static Loss parse(const std::string& s);
};

// ---------------------------------------------------------------------------
// per-entry regularizers: the Phi_i (weights) and Psi_i (biases) terms

struct Regularizer {
    enum class Kind { None, Quad };
    Kind kind = Kind::None;
    double lambda = 0.0;

    bool active() const { return kind != Kind::None; }

    double value(double w) const { return kind == Kind::Quad ? 0.5 * lambda * w * w : 0.0; }
    double grad(double w) const { return kind == Kind::Quad ? lambda * w : 0.0; }

    double value(const Vec& w) const {
        return kind == Kind::Quad ? 0.5 * lambda * sq_norm(w) : 0.0;
    }
    void add_grad(const Vec& w, Vec& out) const {
        if (kind != Kind::Quad) return;
        for (std::size_t i = 0; i < w.size(); ++i) out[i] += lambda * w[i];
    }

    std::string name() const;
    static Regularizer parse(const std::string& s);
};

// ---------------------------------------------------------------------------
// learning-rate schedules xi(t); arbitrary sign is allowed

struct Schedule {
    enum class Kind { Constant, LinearDecay };
    Kind kind = Kind::Constant;
    double scale = 1.0;
    double rate = 0.0; // LinearDecay: scale * max(0, 1 - rate*t)

    double operator()(double t) const {
        if (kind == Kind::Constant) return scale;
        return scale * std::max(0.0, 1.0 - rate * t);
    }

    static Schedule constant(double s) { return Schedule{Kind::Constant, s, 0.0}; }
    static Schedule linear_decay(double s, double r) {
        return Schedule{Kind::LinearDecay, s, r};
    }
    static Schedule zero() { return constant(0.0); }

    std::string name() const;
};

// ---------------------------------------------------------------------------
// ArchitectureSpec: the layer maps phi_i and backward maps sigma_i of the
// fully-connected family, including the variants without input bias / with a
// nonlinear output map used by the convergence testbeds. All evaluation
// methods are pure.

struct ArchitectureSpec {
    int L = 2;
    int x_dim = 1;
    int w1_dim = 2;          // x_dim + 1 when input_bias, else x_dim
    bool input_bias = true;  // phi_1(w,x) = <w_{1:d},x> + w_{d+1}

    std::vector<Activation> hidden_acts; // size L-1; hidden_acts[i-1] feeds phi_{i+1}
    Activation output_act{Activation::Kind::Linear, 0.2}; // phi_{L+1}
    Loss loss;
    std::vector<Regularizer> w_regs; // size L, Phi_1..Phi_L
    std::vector<Regularizer> b_regs; // size L-1, Psi_2..Psi_L
    std::vector<Schedule> w_schedules; // size L, xi_1^w..xi_L^w
    std::vector<Schedule> b_schedules; // size L-1, xi_2^b..xi_L^b
    double growth_p = 2.0;

    void validate() const;

    const Activation& act(int i) const { return hidden_acts[static_cast<std::size_t>(i) - 1]; }
    const Regularizer& w_reg(int i) const { return w_regs[static_cast<std::size_t>(i) - 1]; }
    const Regularizer& b_reg(int i) const { return b_regs[static_cast<std::size_t>(i) - 2]; }
    double xi_w(int i, double t) const { return w_schedules[static_cast<std::size_t>(i) - 1](t); }
    double xi_b(int i, double t) const { return b_schedules[static_cast<std::size_t>(i) - 2](t); }

    // forward maps
    double phi1(const Vec& w, const Vec& x) const {
        double s = dot(w, x, static_cast<std::size_t>(x_dim));
        if (input_bias) s += w[static_cast<std::size_t>(x_dim)];
        return s;
    }
    double phi(int i, double w, double b, double h) const {
        return w * act(i - 1).value(h) + b;
    }
    double phi_out(double h) const { return output_act.value(h); }

    // backward maps, with the full recursion signatures; without regularizers
    // sigma_w and sigma_b do not depend on w and b
    double sigma_LH(double y, double yhat, double h) const {
        return loss.d2(y, yhat) * output_act.deriv(h);
    }
    double sigma_w(int i, double dh, double w, double /*b*/, double /*g*/, double h) const {
        return dh * act(i - 1).value(h) + w_reg(i).grad(w);
    }
    double sigma_b(int i, double dh, double /*w*/, double b, double /*g*/,
                   double /*h*/) const {
        return dh + b_reg(i).grad(b);
    }
    double sigma_Hprev(int i, double dh, double w, double /*b*/, double /*g*/,
                       double h) const {
        return dh * w * act(i - 1).deriv(h);
    }
    Vec sigma_w1(double dh, const Vec& w, const Vec& x) const {
        Vec out(static_cast<std::size_t>(w1_dim));
        for (int c = 0; c < x_dim; ++c) out[static_cast<std::size_t>(c)] = dh * x[static_cast<std::size_t>(c)];
        if (input_bias) out[static_cast<std::size_t>(x_dim)] = dh;
        w_regs[0].add_grad(w, out);
        return out;
    }
};

// Configuration of the plain fully-connected instantiation.
struct FcConfig {
    int d = 1;                              // input dimension
    std::vector<int> widths;                // n_1..n_L, n_L == 1
    std::vector<std::string> activations;   // size L-1
    std::string loss = "huber(1)";
    std::vector<std::string> w_regs;        // size L or empty (= none)
    std::vector<std::string> b_regs;        // size L-1 or empty (= none)

    int layers() const { return static_cast<int>(widths.size()); }
    void validate() const;
};

ArchitectureSpec make_fc_architecture(const FcConfig& cfg);

// ---------------------------------------------------------------------------
// numeric audit of the growth/Lipschitz assumptions. Sampling-based: it can
// falsify a bound on the probed ball, never certify it.

struct AuditItem {
    std::string name;
    double estimated_K = 0.0;
    bool pass = false;
    std::string note;
};

struct AuditReport {
    std::vector<AuditItem> items;
    bool all_pass = true;
    bool kink_flag = false; // some activation derivative looks non-Lipschitz

    const AuditItem* find(const std::string& name) const {
        for (const auto& it : items)
            if (it.name == name) return &it;
        return nullptr;
    }
};

AuditReport audit_assumptions(const ArchitectureSpec& spec, int sample_count,
                              double radius, std::uint64_t rng_seed);

} // namespace mflab

#endif
