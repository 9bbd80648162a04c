#ifndef MFLAB_STATE_HPP
#define MFLAB_STATE_HPP

#include "mflab/architecture.hpp"

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mflab {

// Weight/bias tables of a finite network and of the particle system; the two
// share one layout and differ only in time semantics (discrete steps vs
// continuous time).
//
// Layout: w1 holds n_1 rows of w1_dim entries. w[i-2] holds the layer-i table
// with the incoming weights of output neuron j_i contiguous, i.e. entry
// (j_{i-1}, j_i) lives at [j_i * n_{i-1} + j_{i-1}]. b[i-2] holds n_i biases.
struct ParamState {
    std::vector<int> widths; // n_1..n_L with n_L == 1
    int w1_dim = 0;
    std::vector<double> w1;
    std::vector<std::vector<double>> w;
    std::vector<std::vector<double>> b;
    double time = 0.0;

    int layers() const { return static_cast<int>(widths.size()); }
    int width(int i) const { return widths[static_cast<std::size_t>(i) - 1]; }

    double* w1_row(int j1) { return w1.data() + static_cast<std::size_t>(j1) * static_cast<std::size_t>(w1_dim); }
    const double* w1_row(int j1) const {
        return w1.data() + static_cast<std::size_t>(j1) * static_cast<std::size_t>(w1_dim);
    }
    // layer i in 2..L
    double& wi(int i, int j_prev, int j) {
        return w[static_cast<std::size_t>(i) - 2]
                [static_cast<std::size_t>(j) * static_cast<std::size_t>(width(i - 1)) + static_cast<std::size_t>(j_prev)];
    }
    double wi(int i, int j_prev, int j) const {
        return w[static_cast<std::size_t>(i) - 2]
                [static_cast<std::size_t>(j) * static_cast<std::size_t>(width(i - 1)) + static_cast<std::size_t>(j_prev)];
    }
    double& bi(int i, int j) { return b[static_cast<std::size_t>(i) - 2][static_cast<std::size_t>(j)]; }
    double bi(int i, int j) const { return b[static_cast<std::size_t>(i) - 2][static_cast<std::size_t>(j)]; }

    // flat traversal used by integrators and norms
    template <typename F>
    void for_each_table(F&& f) {
        f(w1);
        for (auto& t : w) f(t);
        for (auto& t : b) f(t);
    }
    template <typename F>
    void for_each_table(F&& f) const {
        f(w1);
        for (const auto& t : w) f(t);
        for (const auto& t : b) f(t);
    }

    std::size_t param_count() const {
        std::size_t n = w1.size();
        for (const auto& t : w) n += t.size();
        for (const auto& t : b) n += t.size();
        return n;
    }

    double max_abs() const {
        double m = 0.0;
        for_each_table([&](const std::vector<double>& t) {
            for (double x : t) m = std::max(m, std::abs(x));
        });
        return m;
    }

    bool finite() const {
        bool ok = true;
        for_each_table([&](const std::vector<double>& t) {
            for (double x : t)
                if (!std::isfinite(x)) ok = false;
        });
        return ok;
    }

    bool same_shape(const ParamState& o) const {
        return widths == o.widths && w1_dim == o.w1_dim;
    }
};

using NetworkState = ParamState;  // discrete-time trajectory, time = step * epsilon
using ParticleState = ParamState; // continuous-time trajectory

inline ParamState make_state(const std::vector<int>& widths, int w1_dim) {
    if (widths.size() < 2 || widths.back() != 1)
        throw std::invalid_argument("state widths must end in 1 and have length >= 2");
    for (int n : widths)
        if (n < 1) throw std::invalid_argument("state widths must be positive");
    if (w1_dim < 1) throw std::invalid_argument("w1 dimension must be positive");
    ParamState s;
    s.widths = widths;
    s.w1_dim = w1_dim;
    s.w1.assign(static_cast<std::size_t>(widths[0]) * static_cast<std::size_t>(w1_dim), 0.0);
    const int L = static_cast<int>(widths.size());
    s.w.resize(static_cast<std::size_t>(L) - 1);
    s.b.resize(static_cast<std::size_t>(L) - 1);
    for (int i = 2; i <= L; ++i) {
        s.w[static_cast<std::size_t>(i) - 2].assign(
            static_cast<std::size_t>(widths[static_cast<std::size_t>(i) - 2]) *
                static_cast<std::size_t>(widths[static_cast<std::size_t>(i) - 1]),
            0.0);
        s.b[static_cast<std::size_t>(i) - 2].assign(
            static_cast<std::size_t>(widths[static_cast<std::size_t>(i) - 1]), 0.0);
    }
    return s;
}

// y <- y + a * k, table by table
inline void axpy(ParamState& y, double a, const ParamState& k) {
    if (!y.same_shape(k)) throw std::invalid_argument("state shape mismatch in axpy");
    auto acc = [a](std::vector<double>& dst, const std::vector<double>& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a * src[i];
    };
    acc(y.w1, k.w1);
    for (std::size_t i = 0; i < y.w.size(); ++i) acc(y.w[i], k.w[i]);
    for (std::size_t i = 0; i < y.b.size(); ++i) acc(y.b[i], k.b[i]);
}

// ---------------------------------------------------------------------------

// Finite dataset standing in for the data distribution; expectations over Z
// are exact averages over it.
struct Dataset {
    std::vector<Vec> xs;
    std::vector<double> ys;

    std::size_t size() const { return xs.size(); }
    void validate(int x_dim) const {
        if (xs.empty()) throw std::invalid_argument("dataset must be nonempty");
        if (xs.size() != ys.size())
            throw std::invalid_argument("dataset inputs/labels length mismatch");
        for (const auto& x : xs) {
            if (static_cast<int>(x.size()) != x_dim)
                throw std::invalid_argument("dataset input dimension mismatch");
            if (!all_finite(x)) throw std::invalid_argument("non-finite dataset input");
        }
        for (double y : ys)
            if (!std::isfinite(y)) throw std::invalid_argument("non-finite dataset label");
    }
};

// ---------------------------------------------------------------------------

struct SnapshotDiag {
    double norm_W = 0.0;    // running sup-norm of the trajectory up to this time
    double loss = 0.0;      // population loss at this snapshot
    double max_update = 0.0; // largest parameter change over the preceding step
};

struct TrajectoryLog {
    std::vector<double> times;
    std::vector<ParamState> states;
    std::vector<SnapshotDiag> diags;

    std::size_t size() const { return times.size(); }
    bool empty() const { return times.empty(); }
    double t_end() const { return times.empty() ? 0.0 : times.back(); }

    const ParamState& at_time(double t, double tol = 1e-9) const {
        for (std::size_t k = 0; k < times.size(); ++k)
            if (std::abs(times[k] - t) <= tol) return states[k];
        throw std::invalid_argument("no snapshot at requested time");
    }
    bool has_time(double t, double tol = 1e-9) const {
        for (double s : times)
            if (std::abs(s - t) <= tol) return true;
        return false;
    }
};

} // namespace mflab

#endif
