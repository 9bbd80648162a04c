#include "mflab/reduced.hpp"

#include <cmath>
#include <stdexcept>

namespace mflab {

void QuadratureMeasure::validate() const {
    if (atoms.empty()) throw std::invalid_argument("quadrature measure needs atoms");
    if (weights.size() != atoms.size())
        throw std::invalid_argument("quadrature atom/weight length mismatch");
    double s = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("quadrature weights must be nonnegative");
        s += w;
    }
    if (std::abs(s - 1.0) > 1e-12)
        throw std::invalid_argument("quadrature weights must sum to 1");
    const std::size_t dim = atoms.front().size();
    for (const auto& a : atoms) {
        if (a.size() != dim) throw std::invalid_argument("quadrature atom dimension mismatch");
        if (!all_finite(a)) throw std::invalid_argument("non-finite quadrature atom");
    }
}

QuadratureMeasure QuadratureMeasure::equal_weight(std::vector<Vec> atoms) {
    QuadratureMeasure m;
    m.atoms = std::move(atoms);
    m.weights.assign(m.atoms.size(), 1.0 / static_cast<double>(m.atoms.size()));
    m.validate();
    return m;
}

QuadratureMeasure QuadratureMeasure::scalar_atoms(std::vector<double> values,
                                                  std::vector<double> weights) {
    QuadratureMeasure m;
    for (double v : values) m.atoms.push_back(Vec{v});
    if (weights.empty())
        m.weights.assign(m.atoms.size(), 1.0 / static_cast<double>(m.atoms.size()));
    else
        m.weights = std::move(weights);
    m.validate();
    return m;
}

LawSpec QuadratureMeasure::to_law() const {
    validate();
    bool uniform = true;
    for (double w : weights)
        if (std::abs(w - weights.front()) > 1e-15) uniform = false;
    return LawSpec::discrete(atoms, uniform ? std::vector<double>{} : weights);
}

double& ReducedState::bi_star(int i) {
    if (i == L - 1) throw std::invalid_argument("bias of layer L-1 is atom-indexed");
    return b_star[static_cast<std::size_t>(i) - 2];
}
double ReducedState::bi_star(int i) const {
    if (i == L - 1) throw std::invalid_argument("bias of layer L-1 is atom-indexed");
    return b_star[static_cast<std::size_t>(i) - 2];
}

namespace {

template <typename F>
void for_each_scalar(ReducedState& s, F&& f) {
    for (auto& v : s.w1_star)
        for (auto& x : v) f(x);
    for (auto& x : s.w2_star) f(x);
    for (auto& t : s.wi_star)
        for (auto& x : t) f(x);
    for (auto& x : s.wLm1_star) f(x);
    for (auto& x : s.wL_star) f(x);
    for (auto& x : s.b_star) f(x);
    for (auto& x : s.bLm1_star) f(x);
}

void axpy_reduced(ReducedState& y, double a, const ReducedState& k) {
    for (std::size_t j = 0; j < y.w1_star.size(); ++j)
        for (std::size_t c = 0; c < y.w1_star[j].size(); ++c)
            y.w1_star[j][c] += a * k.w1_star[j][c];
    for (std::size_t j = 0; j < y.w2_star.size(); ++j) y.w2_star[j] += a * k.w2_star[j];
    for (std::size_t t = 0; t < y.wi_star.size(); ++t)
        for (std::size_t j = 0; j < y.wi_star[t].size(); ++j)
            y.wi_star[t][j] += a * k.wi_star[t][j];
    for (std::size_t j = 0; j < y.wLm1_star.size(); ++j) y.wLm1_star[j] += a * k.wLm1_star[j];
    for (std::size_t j = 0; j < y.wL_star.size(); ++j) y.wL_star[j] += a * k.wL_star[j];
    for (std::size_t j = 0; j < y.b_star.size(); ++j) y.b_star[j] += a * k.b_star[j];
    for (std::size_t j = 0; j < y.bLm1_star.size(); ++j) y.bLm1_star[j] += a * k.bLm1_star[j];
}

ReducedState zero_like(const ReducedState& s) {
    ReducedState z = s;
    for_each_scalar(z, [](double& x) { x = 0.0; });
    return z;
}

struct ReducedWorkspace {
    std::vector<double> H1;   // per layer-1 atom
    std::vector<double> A1;   // activation of H1
    std::vector<double> Hmid; // H_2*..H_{L-2}*, index i-2
    std::vector<double> HLm1; // per layer-L atom
    std::vector<double> dH1;  // per layer-1 atom
    std::vector<double> dHLm1;
};

// starred derivative at one state: minus xi * dataset mean of the starred
// update quantities
ReducedState reduced_rhs(const ReducedState& s,
                         const std::vector<QuadratureMeasure>& mw,
                         const ArchitectureSpec& spec, const Dataset& data, double t,
                         ReducedWorkspace& ws) {
    const int L = spec.L;
    const std::size_t m1 = mw[0].size();
    const std::size_t mL = mw[static_cast<std::size_t>(L) - 1].size();
    const auto& wm1 = mw[0].weights;

    ReducedState acc = zero_like(s);

    ws.H1.resize(m1);
    ws.A1.resize(m1);
    ws.Hmid.resize(static_cast<std::size_t>(L) - 1);
    ws.HLm1.resize(mL);
    ws.dH1.resize(m1);
    ws.dHLm1.resize(mL);

    for (std::size_t z = 0; z < data.size(); ++z) {
        const Vec& x = data.xs[z];
        const double y = data.ys[z];

        // forward sweep
        for (std::size_t a1 = 0; a1 < m1; ++a1) {
            ws.H1[a1] = spec.phi1(s.w1_star[a1], x);
            ws.A1[a1] = spec.act(1).value(ws.H1[a1]);
        }
        {
            double h2 = 0.0;
            const auto& w2 = mw[1];
            for (std::size_t a2 = 0; a2 < w2.size(); ++a2) {
                double inner = 0.0;
                for (std::size_t a1 = 0; a1 < m1; ++a1)
                    inner += wm1[a1] * s.w2_star[a2 * m1 + a1] * ws.A1[a1];
                h2 += w2.weights[a2] * inner;
            }
            ws.Hmid[0] = h2 + s.bi_star(2);
        }
        for (int i = 3; i <= L - 2; ++i) {
            const auto& m = mw[static_cast<std::size_t>(i) - 1];
            const auto& wi = s.wi_star[static_cast<std::size_t>(i) - 3];
            const double aprev = spec.act(i - 1).value(ws.Hmid[static_cast<std::size_t>(i) - 3]);
            double h = 0.0;
            for (std::size_t a = 0; a < m.size(); ++a) h += m.weights[a] * wi[a] * aprev;
            ws.Hmid[static_cast<std::size_t>(i) - 2] = h + s.bi_star(i);
        }
        const double aLm2 = spec.act(L - 2).value(ws.Hmid[static_cast<std::size_t>(L) - 4]);
        const auto& mLm1 = mw[static_cast<std::size_t>(L) - 2];
        for (std::size_t aL = 0; aL < mL; ++aL) {
            double h = 0.0;
            for (std::size_t am = 0; am < mLm1.size(); ++am)
                h += mLm1.weights[am] * s.wLm1_star[aL * mLm1.size() + am] * aLm2;
            ws.HLm1[aL] = h + s.bLm1_star[aL];
        }
        double HL = 0.0;
        const auto& mLmeas = mw[static_cast<std::size_t>(L) - 1];
        for (std::size_t aL = 0; aL < mL; ++aL)
            HL += mLmeas.weights[aL] * s.wL_star[aL] * spec.act(L - 1).value(ws.HLm1[aL]);
        HL += s.bi_star(L);
        const double yhat = spec.phi_out(HL);

        // backward sweep
        const double dHL = spec.sigma_LH(y, yhat, HL);
        for (std::size_t aL = 0; aL < mL; ++aL)
            acc.wL_star[aL] +=
                dHL * spec.act(L - 1).value(ws.HLm1[aL]) + spec.w_reg(L).grad(s.wL_star[aL]);
        acc.bi_star(L) += dHL + spec.b_reg(L).grad(s.bi_star(L));

        for (std::size_t aL = 0; aL < mL; ++aL)
            ws.dHLm1[aL] = dHL * s.wL_star[aL] * spec.act(L - 1).deriv(ws.HLm1[aL]);

        for (std::size_t aL = 0; aL < mL; ++aL) {
            for (std::size_t am = 0; am < mLm1.size(); ++am) {
                const std::size_t idx = aL * mLm1.size() + am;
                acc.wLm1_star[idx] +=
                    ws.dHLm1[aL] * aLm2 + spec.w_reg(L - 1).grad(s.wLm1_star[idx]);
            }
            acc.bLm1_star[aL] += ws.dHLm1[aL] + spec.b_reg(L - 1).grad(s.bLm1_star[aL]);
        }

        double dHmid = 0.0; // Delta_{L-2}^{H*}
        {
            const double dact = spec.act(L - 2).deriv(ws.Hmid[static_cast<std::size_t>(L) - 4]);
            for (std::size_t aL = 0; aL < mL; ++aL) {
                double inner = 0.0;
                for (std::size_t am = 0; am < mLm1.size(); ++am)
                    inner += mLm1.weights[am] * s.wLm1_star[aL * mLm1.size() + am];
                dHmid += mLmeas.weights[aL] * ws.dHLm1[aL] * inner;
            }
            dHmid *= dact;
        }

        for (int i = L - 2; i >= 3; --i) {
            const auto& m = mw[static_cast<std::size_t>(i) - 1];
            auto& wi_acc = acc.wi_star[static_cast<std::size_t>(i) - 3];
            const auto& wi = s.wi_star[static_cast<std::size_t>(i) - 3];
            const double aprev = spec.act(i - 1).value(ws.Hmid[static_cast<std::size_t>(i) - 3]);
            for (std::size_t a = 0; a < m.size(); ++a)
                wi_acc[a] += dHmid * aprev + spec.w_reg(i).grad(wi[a]);
            acc.bi_star(i) += dHmid + spec.b_reg(i).grad(s.bi_star(i));
            // push Delta^H down one layer
            double mean_w = 0.0;
            for (std::size_t a = 0; a < m.size(); ++a) mean_w += m.weights[a] * wi[a];
            dHmid = dHmid * mean_w * spec.act(i - 1).deriv(ws.Hmid[static_cast<std::size_t>(i) - 3]);
        }

        // layer 2 and layer 1
        const auto& m2 = mw[1];
        for (std::size_t a2 = 0; a2 < m2.size(); ++a2)
            for (std::size_t a1 = 0; a1 < m1; ++a1) {
                const std::size_t idx = a2 * m1 + a1;
                acc.w2_star[idx] += dHmid * ws.A1[a1] + spec.w_reg(2).grad(s.w2_star[idx]);
            }
        acc.bi_star(2) += dHmid + spec.b_reg(2).grad(s.bi_star(2));

        for (std::size_t a1 = 0; a1 < m1; ++a1) {
            double inner = 0.0;
            for (std::size_t a2 = 0; a2 < m2.size(); ++a2)
                inner += m2.weights[a2] * s.w2_star[a2 * m1 + a1];
            ws.dH1[a1] = dHmid * inner * spec.act(1).deriv(ws.H1[a1]);
        }
        for (std::size_t a1 = 0; a1 < m1; ++a1) {
            Vec g = spec.sigma_w1(ws.dH1[a1], s.w1_star[a1], x);
            for (std::size_t c = 0; c < g.size(); ++c) acc.w1_star[a1][c] += g[c];
        }
    }

    const double inv_n = 1.0 / static_cast<double>(data.size());
    for (std::size_t a = 0; a < acc.w1_star.size(); ++a)
        for (auto& v : acc.w1_star[a]) v *= -spec.xi_w(1, t) * inv_n;
    for (auto& v : acc.w2_star) v *= -spec.xi_w(2, t) * inv_n;
    for (int i = 3; i <= L - 2; ++i)
        for (auto& v : acc.wi_star[static_cast<std::size_t>(i) - 3])
            v *= -spec.xi_w(i, t) * inv_n;
    for (auto& v : acc.wLm1_star) v *= -spec.xi_w(L - 1, t) * inv_n;
    for (auto& v : acc.wL_star) v *= -spec.xi_w(L, t) * inv_n;
    for (int i = 2; i <= L; ++i) {
        if (i == L - 1) continue;
        acc.bi_star(i) *= -spec.xi_b(i, t) * inv_n;
    }
    for (auto& v : acc.bLm1_star) v *= -spec.xi_b(L - 1, t) * inv_n;
    return acc;
}

} // namespace

ReducedTrajectory integrate_reduced(const std::vector<QuadratureMeasure>& w_measures,
                                    const std::vector<double>& bias_consts,
                                    const ArchitectureSpec& spec, const Dataset& data,
                                    const TimeGrid& grid) {
    spec.validate();
    grid.validate();
    data.validate(spec.x_dim);
    const int L = spec.L;
    if (L < 5)
        throw std::invalid_argument("reduced dynamics requires at least five layers");
    if (static_cast<int>(w_measures.size()) != L)
        throw std::invalid_argument("need one weight measure per layer");
    if (static_cast<int>(bias_consts.size()) != L - 1)
        throw std::invalid_argument("need one bias constant per layer >= 2");
    for (const auto& m : w_measures) m.validate();
    if (static_cast<int>(w_measures[0].atoms.front().size()) != spec.w1_dim)
        throw std::invalid_argument("layer-1 atom dimension must match w1");
    for (int i = 2; i <= L; ++i)
        if (w_measures[static_cast<std::size_t>(i) - 1].atoms.front().size() != 1)
            throw std::invalid_argument("atoms above layer 1 must be scalar");

    // initialization: w_i^*(0, u) = u, b_i^*(0) = B_i
    ReducedState s;
    s.L = L;
    s.w1_dim = spec.w1_dim;
    s.w1_star = w_measures[0].atoms;
    const std::size_t m1 = w_measures[0].size();
    const std::size_t m2 = w_measures[1].size();
    s.w2_star.resize(m1 * m2);
    for (std::size_t a2 = 0; a2 < m2; ++a2)
        for (std::size_t a1 = 0; a1 < m1; ++a1)
            s.w2_star[a2 * m1 + a1] = w_measures[1].atoms[a2][0];
    for (int i = 3; i <= L - 2; ++i) {
        const auto& m = w_measures[static_cast<std::size_t>(i) - 1];
        std::vector<double> tab(m.size());
        for (std::size_t a = 0; a < m.size(); ++a) tab[a] = m.atoms[a][0];
        s.wi_star.push_back(std::move(tab));
    }
    const std::size_t mLm1 = w_measures[static_cast<std::size_t>(L) - 2].size();
    const std::size_t mL = w_measures[static_cast<std::size_t>(L) - 1].size();
    s.wLm1_star.resize(mLm1 * mL);
    for (std::size_t aL = 0; aL < mL; ++aL)
        for (std::size_t am = 0; am < mLm1; ++am)
            s.wLm1_star[aL * mLm1 + am] = w_measures[static_cast<std::size_t>(L) - 2].atoms[am][0];
    s.wL_star.resize(mL);
    for (std::size_t aL = 0; aL < mL; ++aL)
        s.wL_star[aL] = w_measures[static_cast<std::size_t>(L) - 1].atoms[aL][0];
    s.b_star.assign(static_cast<std::size_t>(L) - 1, 0.0);
    for (int i = 2; i <= L; ++i)
        if (i != L - 1) s.bi_star(i) = bias_consts[static_cast<std::size_t>(i) - 2];
    s.bLm1_star.assign(mL, bias_consts[static_cast<std::size_t>(L) - 3]);

    ReducedWorkspace ws;
    ReducedTrajectory traj;
    auto snapshot = [&](double t) {
        traj.times.push_back(t);
        traj.states.push_back(s);
        traj.states.back().time = t;
    };
    snapshot(0.0);

    const long long steps = grid.steps();
    for (long long k = 0; k < steps; ++k) {
        const double t = grid.time_at(k);
        if (grid.scheme == TimeGrid::Scheme::Euler) {
            ReducedState k1 = reduced_rhs(s, w_measures, spec, data, t, ws);
            axpy_reduced(s, grid.dt, k1);
        } else {
            ReducedState k1 = reduced_rhs(s, w_measures, spec, data, t, ws);
            ReducedState y2 = s;
            axpy_reduced(y2, 0.5 * grid.dt, k1);
            ReducedState k2 = reduced_rhs(y2, w_measures, spec, data, t + 0.5 * grid.dt, ws);
            ReducedState y3 = s;
            axpy_reduced(y3, 0.5 * grid.dt, k2);
            ReducedState k3 = reduced_rhs(y3, w_measures, spec, data, t + 0.5 * grid.dt, ws);
            ReducedState y4 = s;
            axpy_reduced(y4, grid.dt, k3);
            ReducedState k4 = reduced_rhs(y4, w_measures, spec, data, t + grid.dt, ws);
            const double w = grid.dt / 6.0;
            axpy_reduced(s, w, k1);
            axpy_reduced(s, 2.0 * w, k2);
            axpy_reduced(s, 2.0 * w, k3);
            axpy_reduced(s, w, k4);
        }
        if (s.max_abs() > 1e12) throw BlowupError(grid.time_at(k + 1));
        if ((k + 1) % grid.snapshot_stride == 0 || k + 1 == steps)
            snapshot(grid.time_at(k + 1));
    }
    return traj;
}

double ReducedState::max_abs() const {
    double m = 0.0;
    auto upd = [&m](double x) { m = std::max(m, std::abs(x)); };
    for (const auto& v : w1_star)
        for (double x : v) upd(x);
    for (double x : w2_star) upd(x);
    for (const auto& t : wi_star)
        for (double x : t) upd(x);
    for (double x : wLm1_star) upd(x);
    for (double x : wL_star) upd(x);
    for (double x : b_star) upd(x);
    for (double x : bLm1_star) upd(x);
    return m;
}

AtomizedSystem sample_atomized_system(const std::vector<QuadratureMeasure>& w_measures,
                                      const std::vector<double>& bias_consts,
                                      const std::vector<int>& widths, int w1_dim,
                                      std::uint64_t seed) {
    if (w_measures.size() != widths.size())
        throw std::invalid_argument("need one weight measure per layer");
    InitLawSpec laws;
    for (const auto& m : w_measures) laws.w_laws.push_back(m.to_law());
    for (std::size_t i = 0; i + 1 < widths.size(); ++i)
        laws.b_laws.push_back(LawSpec::point(bias_consts[i]));
    EmbeddingTable table = sample_embedding(laws, widths, w1_dim, seed);
    AtomizedSystem sys;
    sys.init = table.tables;
    sys.w1_atoms = table.w1_atoms;
    sys.w_atoms = table.w_atoms;
    return sys;
}

double reduced_vs_particle_gap(const ReducedTrajectory& reduced,
                               const TrajectoryLog& particle_log,
                               const AtomizedSystem& system, int layer, double T) {
    const int L = static_cast<int>(system.init.widths.size());
    if (layer < 3 || layer > L - 2)
        throw std::invalid_argument("gap is defined for the middle layer band");
    const auto& atoms = system.w_atoms[static_cast<std::size_t>(layer) - 2];
    if (atoms.empty()) throw std::invalid_argument("particle system has no atom assignment");

    int atom_count = 0;
    for (int a : atoms) atom_count = std::max(atom_count, a + 1);

    constexpr double tol = 1e-9;
    double gap = 0.0;
    for (std::size_t kt = 0; kt < particle_log.size(); ++kt) {
        const double t = particle_log.times[kt];
        if (t > T + tol) break;
        std::size_t rt = reduced.times.size();
        for (std::size_t r = 0; r < reduced.times.size(); ++r)
            if (std::abs(reduced.times[r] - t) <= tol) {
                rt = r;
                break;
            }
        if (rt == reduced.times.size())
            throw std::invalid_argument("reduced/particle snapshot grids misaligned");

        const auto& table =
            particle_log.states[kt].w[static_cast<std::size_t>(layer) - 2];
        const auto& star = reduced.states[rt].wi_star[static_cast<std::size_t>(layer) - 3];
        std::vector<double> sum(static_cast<std::size_t>(atom_count), 0.0);
        std::vector<int> count(static_cast<std::size_t>(atom_count), 0);
        for (std::size_t e = 0; e < table.size(); ++e) {
            sum[static_cast<std::size_t>(atoms[e])] += table[e];
            count[static_cast<std::size_t>(atoms[e])] += 1;
        }
        for (int a = 0; a < atom_count; ++a) {
            if (count[static_cast<std::size_t>(a)] == 0) continue;
            double mean = sum[static_cast<std::size_t>(a)] /
                          static_cast<double>(count[static_cast<std::size_t>(a)]);
            gap = std::max(gap, std::abs(mean - star[static_cast<std::size_t>(a)]));
        }
    }
    return gap;
}

TranslationProfile translation_profile(const TrajectoryLog& particle_log,
                                       const ArchitectureSpec& spec, int layer,
                                       double t) {
    if (layer < 2 || layer > spec.L) throw std::invalid_argument("layer out of range");
    if (spec.w_reg(layer).active())
        throw std::invalid_argument(
            "translation profile requires no weight regularizer at the probed layer");
    if (particle_log.empty() || std::abs(particle_log.times.front()) > 1e-12)
        throw std::invalid_argument("trajectory must start at t = 0");
    const ParamState& init = particle_log.states.front();
    const ParamState& cur = particle_log.at_time(t);
    const auto& t0 = init.w[static_cast<std::size_t>(layer) - 2];
    const auto& t1 = cur.w[static_cast<std::size_t>(layer) - 2];
    TranslationProfile out;
    double lo = t1[0] - t0[0], hi = lo, acc = 0.0;
    for (std::size_t e = 0; e < t0.size(); ++e) {
        double d = t1[e] - t0[e];
        lo = std::min(lo, d);
        hi = std::max(hi, d);
        acc += d;
    }
    out.mean_displacement = acc / static_cast<double>(t0.size());
    out.spread = hi - lo;
    return out;
}

} // namespace mflab
