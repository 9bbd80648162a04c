#ifndef MFLAB_NORMS_HPP
#define MFLAB_NORMS_HPP

#include "mflab/state.hpp"

#include <cmath>

namespace mflab {

// Instantaneous layer norms: layer 1 is the empirical L^p mean of the row
// norms, all other tables are sup norms.
struct LayerNorms {
    double w1 = 0.0;        // (mean_j |w1(j)|^p)^(1/p)
    double w_sup = 0.0;     // max over layers >= 2 of max |w_i|
    double b_sup = 0.0;     // max over layers >= 2 of max |b_i|

    double combined() const { return std::max(std::max(w1, w_sup), b_sup); }
};

inline LayerNorms state_norms(const ParamState& s, double p) {
    LayerNorms out;
    const int n1 = s.width(1);
    double acc = 0.0;
    for (int j = 0; j < n1; ++j) {
        const double* row = s.w1_row(j);
        double sq = 0.0;
        for (int c = 0; c < s.w1_dim; ++c) sq += row[c] * row[c];
        acc += std::pow(std::sqrt(sq), p);
    }
    out.w1 = std::pow(acc / static_cast<double>(n1), 1.0 / p);
    for (const auto& t : s.w)
        for (double v : t) out.w_sup = std::max(out.w_sup, std::abs(v));
    for (const auto& t : s.b)
        for (double v : t) out.b_sup = std::max(out.b_sup, std::abs(v));
    return out;
}

// Running sup over time of the layer norms, fed state by state.
class RunningTrajectoryNorm {
public:
    explicit RunningTrajectoryNorm(double p) : p_(p) {}
    void absorb(const ParamState& s) {
        LayerNorms n = state_norms(s, p_);
        w1_ = std::max(w1_, n.w1);
        w_ = std::max(w_, n.w_sup);
        b_ = std::max(b_, n.b_sup);
    }
    double value() const { return std::max(std::max(w1_, w_), b_); }

private:
    double p_;
    double w1_ = 0.0, w_ = 0.0, b_ = 0.0;
};

// ||W||_t evaluated on a trajectory log: sup over snapshots with time <= t.
inline double trajectory_norm(const TrajectoryLog& log, double t, double p) {
    if (log.empty()) throw std::invalid_argument("empty trajectory log");
    if (t < log.times.front() - 1e-12 || t > log.times.back() + 1e-12)
        throw std::invalid_argument("time outside trajectory range");
    RunningTrajectoryNorm acc(p);
    bool any = false;
    for (std::size_t k = 0; k < log.size(); ++k) {
        if (log.times[k] <= t + 1e-12) {
            acc.absorb(log.states[k]);
            any = true;
        }
    }
    if (!any) throw std::invalid_argument("no snapshot at or before requested time");
    return acc.value();
}

// Sup distance between two states of equal shape. Difference norms use the
// sup over indices at every layer, layer 1 included (rows compared in the
// Hilbert norm).
inline double state_diff_sup(const ParamState& a, const ParamState& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("state shape mismatch");
    double m = 0.0;
    const int n1 = a.width(1);
    for (int j = 0; j < n1; ++j) {
        const double* ra = a.w1_row(j);
        const double* rb = b.w1_row(j);
        double sq = 0.0;
        for (int c = 0; c < a.w1_dim; ++c) {
            double d = ra[c] - rb[c];
            sq += d * d;
        }
        m = std::max(m, std::sqrt(sq));
    }
    for (std::size_t i = 0; i < a.w.size(); ++i)
        for (std::size_t k = 0; k < a.w[i].size(); ++k)
            m = std::max(m, std::abs(a.w[i][k] - b.w[i][k]));
    for (std::size_t i = 0; i < a.b.size(); ++i)
        for (std::size_t k = 0; k < a.b[i].size(); ++k)
            m = std::max(m, std::abs(a.b[i][k] - b.b[i][k]));
    return m;
}

} // namespace mflab

#endif
