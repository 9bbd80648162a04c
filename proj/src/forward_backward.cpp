#include "mflab/forward_backward.hpp"
#include "mflab/keyed_rng.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mflab {

namespace {

[[noreturn]] void fail_nonfinite(const char* what, int layer) {
    throw std::runtime_error(std::string("non-finite ") + what + " at layer " +
                             std::to_string(layer));
}

} // namespace

double BackwardBundle::max_abs() const {
    double m = 0.0;
    for (double v : delta_w1) m = std::max(m, std::abs(v));
    for (const auto& t : delta_w)
        for (double v : t) m = std::max(m, std::abs(v));
    for (const auto& t : delta_b)
        for (double v : t) m = std::max(m, std::abs(v));
    return m;
}

void forward(const ParamState& state, const ArchitectureSpec& spec, const Vec& x,
             ForwardCache& cache) {
    const int L = spec.L;
    if (state.layers() != L) throw std::invalid_argument("state/spec layer mismatch");
    if (static_cast<int>(x.size()) != spec.x_dim)
        throw std::invalid_argument("input dimension mismatch");

    cache.H.resize(static_cast<std::size_t>(L));
    cache.act.resize(static_cast<std::size_t>(L) - 1);

    const int n1 = state.width(1);
    auto& H1 = cache.H[0];
    H1.resize(static_cast<std::size_t>(n1));
    for (int j = 0; j < n1; ++j) {
        const double* w = state.w1_row(j);
        double s = 0.0;
        for (int c = 0; c < spec.x_dim; ++c) s += w[c] * x[static_cast<std::size_t>(c)];
        if (spec.input_bias) s += w[spec.x_dim];
        H1[static_cast<std::size_t>(j)] = s;
        if (!std::isfinite(s)) fail_nonfinite("layer value", 1);
    }

    for (int i = 2; i <= L; ++i) {
        const int n_prev = state.width(i - 1);
        const int n_cur = state.width(i);
        const Activation& a = spec.act(i - 1);
        auto& act_prev = cache.act[static_cast<std::size_t>(i) - 2];
        act_prev.resize(static_cast<std::size_t>(n_prev));
        const auto& H_prev = cache.H[static_cast<std::size_t>(i) - 2];
        for (int j = 0; j < n_prev; ++j)
            act_prev[static_cast<std::size_t>(j)] = a.value(H_prev[static_cast<std::size_t>(j)]);

        auto& H_cur = cache.H[static_cast<std::size_t>(i) - 1];
        H_cur.resize(static_cast<std::size_t>(n_cur));
        const auto& table = state.w[static_cast<std::size_t>(i) - 2];
        const double inv = 1.0 / static_cast<double>(n_prev);
        for (int k = 0; k < n_cur; ++k) {
            const double* col = table.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(n_prev);
            double s = 0.0;
            for (int j = 0; j < n_prev; ++j) s += col[j] * act_prev[static_cast<std::size_t>(j)];
            double v = s * inv + state.bi(i, k);
            H_cur[static_cast<std::size_t>(k)] = v;
            if (!std::isfinite(v)) fail_nonfinite("layer value", i);
        }
    }

    cache.yhat = spec.phi_out(cache.H[static_cast<std::size_t>(L) - 1][0]);
    if (!std::isfinite(cache.yhat)) fail_nonfinite("output", L + 1);
}

void backward(const ParamState& state, const ArchitectureSpec& spec, const Vec& x,
              double y, const ForwardCache& cache, BackwardBundle& bundle) {
    const int L = spec.L;
    bundle.delta_H.resize(static_cast<std::size_t>(L));
    bundle.delta_w.resize(static_cast<std::size_t>(L) - 1);
    bundle.delta_b.resize(static_cast<std::size_t>(L) - 1);

    auto& dH_L = bundle.delta_H[static_cast<std::size_t>(L) - 1];
    dH_L.assign(1, spec.sigma_LH(y, cache.yhat, cache.H[static_cast<std::size_t>(L) - 1][0]));
    if (!std::isfinite(dH_L[0])) fail_nonfinite("update", L);

    for (int i = L; i >= 2; --i) {
        const int n_prev = state.width(i - 1);
        const int n_cur = state.width(i);
        const auto& dH = bundle.delta_H[static_cast<std::size_t>(i) - 1];
        const auto& act_prev = cache.act[static_cast<std::size_t>(i) - 2];
        const auto& H_prev = cache.H[static_cast<std::size_t>(i) - 2];
        const auto& table = state.w[static_cast<std::size_t>(i) - 2];
        const Regularizer& wr = spec.w_reg(i);
        const Regularizer& br = spec.b_reg(i);
        const Activation& a = spec.act(i - 1);

        auto& dW = bundle.delta_w[static_cast<std::size_t>(i) - 2];
        dW.resize(table.size());
        auto& dB = bundle.delta_b[static_cast<std::size_t>(i) - 2];
        dB.resize(static_cast<std::size_t>(n_cur));
        auto& dH_prev = bundle.delta_H[static_cast<std::size_t>(i) - 2];
        dH_prev.assign(static_cast<std::size_t>(n_prev), 0.0);

        const double inv_cur = 1.0 / static_cast<double>(n_cur);
        for (int k = 0; k < n_cur; ++k) {
            const double d = dH[static_cast<std::size_t>(k)];
            const double* col = table.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(n_prev);
            double* dcol = dW.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(n_prev);
            for (int j = 0; j < n_prev; ++j) {
                dcol[j] = d * act_prev[static_cast<std::size_t>(j)] + wr.grad(col[j]);
                dH_prev[static_cast<std::size_t>(j)] += d * col[j];
            }
            // the sigma_i^b average over j_{i-1} collapses: the summand does
            // not depend on j_{i-1}
            dB[static_cast<std::size_t>(k)] = d + br.grad(state.bi(i, k));
            if (!std::isfinite(dB[static_cast<std::size_t>(k)])) fail_nonfinite("update", i);
        }
        for (int j = 0; j < n_prev; ++j) {
            double v = dH_prev[static_cast<std::size_t>(j)] * inv_cur *
                       a.deriv(H_prev[static_cast<std::size_t>(j)]);
            dH_prev[static_cast<std::size_t>(j)] = v;
            if (!std::isfinite(v)) fail_nonfinite("update", i - 1);
        }
    }

    const int n1 = state.width(1);
    const auto& dH1 = bundle.delta_H[0];
    bundle.delta_w1.resize(static_cast<std::size_t>(n1) * static_cast<std::size_t>(spec.w1_dim));
    const Regularizer& wr1 = spec.w_regs[0];
    for (int j = 0; j < n1; ++j) {
        const double d = dH1[static_cast<std::size_t>(j)];
        const double* w = state.w1_row(j);
        double* out = bundle.delta_w1.data() + static_cast<std::size_t>(j) * static_cast<std::size_t>(spec.w1_dim);
        for (int c = 0; c < spec.x_dim; ++c)
            out[c] = d * x[static_cast<std::size_t>(c)] + wr1.grad(w[c]);
        if (spec.input_bias) out[spec.x_dim] = d + wr1.grad(w[spec.x_dim]);
        if (!std::isfinite(out[0])) fail_nonfinite("update", 1);
    }
}

double sample_loss(const ParamState& state, const ArchitectureSpec& spec, const Vec& x,
                   double y) {
    ForwardCache cache;
    forward(state, spec, x, cache);
    double total = spec.loss.value(y, cache.yhat);

    const int L = spec.L;
    if (spec.w_regs[0].active()) {
        const int n1 = state.width(1);
        double s = 0.0;
        for (int j = 0; j < n1; ++j) {
            const double* w = state.w1_row(j);
            for (int c = 0; c < spec.w1_dim; ++c) s += spec.w_regs[0].value(w[c]);
        }
        total += s / static_cast<double>(n1);
    }
    for (int i = 2; i <= L; ++i) {
        const Regularizer& wr = spec.w_reg(i);
        if (wr.active()) {
            double s = 0.0;
            for (double v : state.w[static_cast<std::size_t>(i) - 2]) s += wr.value(v);
            total += s / static_cast<double>(state.width(i - 1) * state.width(i));
        }
        const Regularizer& br = spec.b_reg(i);
        if (br.active()) {
            double s = 0.0;
            for (double v : state.b[static_cast<std::size_t>(i) - 2]) s += br.value(v);
            total += s / static_cast<double>(state.width(i));
        }
    }
    return total;
}

double grad_check(const ParamState& state, const ArchitectureSpec& spec, const Vec& x,
                  double y, double step, int max_params, std::uint64_t rng_seed) {
    if (step <= 0.0) throw std::invalid_argument("finite-difference step must be positive");
    spec.validate();

    ForwardCache cache;
    forward(state, spec, x, cache);
    BackwardBundle bundle;
    backward(state, spec, x, y, cache, bundle);

    // the backward tables carry the mean-field scaling; plain partials are
    // delta_w1/n_1, delta_w/(n_{i-1} n_i), delta_b/n_i
    struct Entry {
        int table; // 0 = w1, 1 = w, 2 = b
        int layer;
        std::size_t idx;
        double analytic;
    };
    std::vector<Entry> entries;
    const int L = spec.L;
    const double n1 = static_cast<double>(state.width(1));
    for (std::size_t idx = 0; idx < state.w1.size(); ++idx)
        entries.push_back({0, 1, idx, bundle.delta_w1[idx] / n1});
    for (int i = 2; i <= L; ++i) {
        const double scale = static_cast<double>(state.width(i - 1)) * static_cast<double>(state.width(i));
        const auto& t = bundle.delta_w[static_cast<std::size_t>(i) - 2];
        for (std::size_t idx = 0; idx < t.size(); ++idx)
            entries.push_back({1, i, idx, t[idx] / scale});
        const auto& tb = bundle.delta_b[static_cast<std::size_t>(i) - 2];
        for (std::size_t idx = 0; idx < tb.size(); ++idx)
            entries.push_back({2, i, idx, tb[idx] / static_cast<double>(state.width(i))});
    }

    // subsample when the parameter set is large
    std::vector<std::size_t> order(entries.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::size_t probe = entries.size();
    if (max_params > 0 && entries.size() > static_cast<std::size_t>(max_params)) {
        KeyedStream rng(rng_seed);
        for (std::size_t k = order.size(); k > 1; --k) {
            std::size_t r = rng.next_index(k);
            std::swap(order[k - 1], order[r]);
        }
        probe = static_cast<std::size_t>(max_params);
    }

    ParamState work = state;
    auto param_ref = [&](const Entry& e) -> double& {
        if (e.table == 0) return work.w1[e.idx];
        if (e.table == 1) return work.w[static_cast<std::size_t>(e.layer) - 2][e.idx];
        return work.b[static_cast<std::size_t>(e.layer) - 2][e.idx];
    };

    double max_rel = 0.0;
    for (std::size_t k = 0; k < probe; ++k) {
        const Entry& e = entries[order[k]];
        double& p = param_ref(e);
        const double saved = p;
        p = saved + step;
        double up = sample_loss(work, spec, x, y);
        p = saved - step;
        double dn = sample_loss(work, spec, x, y);
        p = saved;
        double fd = (up - dn) / (2.0 * step);
        double rel = std::abs(e.analytic - fd) / (std::abs(fd) + 1e-12);
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

} // namespace mflab
