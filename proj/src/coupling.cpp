#include "mflab/coupling.hpp"
#include "mflab/forward_backward.hpp"
#include "mflab/keyed_rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace mflab {

namespace {

std::string fmt2(const char* name, double a, double b) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s(%g,%g)", name, a, b);
    return buf;
}

} // namespace

std::string LawSpec::name() const {
    switch (kind) {
        case Kind::Gaussian: return fmt2("gaussian", mu, sigma);
        case Kind::Uniform: return fmt2("uniform", a, b);
        case Kind::Point: {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "point(%g)", c);
            return buf;
        }
        case Kind::Epigraph: return fmt2("epigraph", level, slab);
        case Kind::Discrete: {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "discrete(%zu)", atoms.size());
            return buf;
        }
    }
    return "?";
}

LawSpec LawSpec::gaussian(double mu, double sigma) {
    LawSpec l;
    l.kind = Kind::Gaussian;
    l.mu = mu;
    l.sigma = sigma;
    return l;
}
LawSpec LawSpec::uniform(double a, double b) {
    LawSpec l;
    l.kind = Kind::Uniform;
    l.a = a;
    l.b = b;
    return l;
}
LawSpec LawSpec::point(double c) {
    LawSpec l;
    l.kind = Kind::Point;
    l.c = c;
    return l;
}
LawSpec LawSpec::epigraph(double level, double slab) {
    LawSpec l;
    l.kind = Kind::Epigraph;
    l.level = level;
    l.slab = slab;
    return l;
}
LawSpec LawSpec::discrete(std::vector<Vec> atoms, std::vector<double> probs) {
    if (atoms.empty()) throw std::invalid_argument("discrete law needs atoms");
    if (!probs.empty() && probs.size() != atoms.size())
        throw std::invalid_argument("discrete law atom/prob length mismatch");
    double s = 0.0;
    for (double p : probs) {
        if (p < 0.0) throw std::invalid_argument("discrete law weights must be nonnegative");
        s += p;
    }
    if (!probs.empty() && std::abs(s - 1.0) > 1e-12)
        throw std::invalid_argument("discrete law weights must sum to 1");
    LawSpec l;
    l.kind = Kind::Discrete;
    l.atoms = std::move(atoms);
    l.probs = std::move(probs);
    return l;
}

void InitLawSpec::validate(int L) const {
    if (static_cast<int>(w_laws.size()) != L)
        throw std::invalid_argument("need one weight law per layer");
    if (static_cast<int>(b_laws.size()) != L - 1)
        throw std::invalid_argument("need one bias law per layer >= 2");
    if (b_laws.back().kind != LawSpec::Kind::Point)
        throw std::invalid_argument("last-layer bias law must be a point mass");
    if (w_laws[0].kind == LawSpec::Kind::Epigraph)
        throw std::invalid_argument("epigraph law not supported at layer 1");
    if (enforce_bounded) {
        for (std::size_t i = 1; i < w_laws.size(); ++i)
            if (!w_laws[i].bounded())
                throw std::invalid_argument(
                    "unbounded weight law at layer >= 2 with bound enforcement on");
        for (const auto& l : b_laws)
            if (!l.bounded())
                throw std::invalid_argument(
                    "unbounded bias law at layer >= 2 with bound enforcement on");
    }
}

namespace {

// draws one scalar; atom_out = chosen atom index for discrete laws, else -1
double draw_scalar(const LawSpec& law, KeyedStream& s, int& atom_out) {
    atom_out = -1;
    switch (law.kind) {
        case LawSpec::Kind::Gaussian: return law.mu + law.sigma * s.next_gaussian();
        case LawSpec::Kind::Uniform: return s.next_uniform(law.a, law.b);
        case LawSpec::Kind::Point: return law.c;
        case LawSpec::Kind::Epigraph: return law.level + law.slab * s.next_unit();
        case LawSpec::Kind::Discrete: {
            std::size_t idx;
            if (law.probs.empty()) {
                idx = s.next_index(law.atoms.size());
            } else {
                double u = s.next_unit(), acc = 0.0;
                idx = law.atoms.size() - 1;
                for (std::size_t k = 0; k < law.probs.size(); ++k) {
                    acc += law.probs[k];
                    if (u < acc) {
                        idx = k;
                        break;
                    }
                }
            }
            atom_out = static_cast<int>(idx);
            if (law.atoms[idx].size() != 1)
                throw std::invalid_argument("discrete atoms at layers >= 2 must be scalar");
            return law.atoms[idx][0];
        }
    }
    return 0.0;
}

void draw_vector(const LawSpec& law, KeyedStream& s, int dim, double* out, int& atom_out) {
    atom_out = -1;
    if (law.kind == LawSpec::Kind::Discrete) {
        std::size_t idx;
        if (law.probs.empty()) {
            idx = s.next_index(law.atoms.size());
        } else {
            double u = s.next_unit(), acc = 0.0;
            idx = law.atoms.size() - 1;
            for (std::size_t k = 0; k < law.probs.size(); ++k) {
                acc += law.probs[k];
                if (u < acc) {
                    idx = k;
                    break;
                }
            }
        }
        atom_out = static_cast<int>(idx);
        if (static_cast<int>(law.atoms[idx].size()) != dim)
            throw std::invalid_argument("discrete atom dimension mismatch at layer 1");
        for (int c = 0; c < dim; ++c) out[c] = law.atoms[idx][static_cast<std::size_t>(c)];
        return;
    }
    for (int c = 0; c < dim; ++c) {
        int unused;
        out[c] = draw_scalar(law, s, unused);
    }
}

} // namespace

EmbeddingTable sample_embedding(const InitLawSpec& laws,
                                const std::vector<int>& resolution, int w1_dim,
                                std::uint64_t master_seed) {
    if (resolution.size() < 2 || resolution.back() != 1)
        throw std::invalid_argument("resolution must end in 1 and have length >= 2");
    for (int n : resolution)
        if (n < 1) throw std::invalid_argument("resolution widths must be >= 1");
    const int L = static_cast<int>(resolution.size());
    laws.validate(L);

    EmbeddingTable table;
    table.master_seed = master_seed;
    table.resolution = resolution;
    table.w1_dim = w1_dim;
    table.laws = laws;
    table.tables = make_state(resolution, w1_dim);
    table.w_atoms.resize(static_cast<std::size_t>(L) - 1);
    table.b_atoms.resize(static_cast<std::size_t>(L) - 1);

    const int n1 = resolution[0];
    const bool w1_discrete = laws.w_laws[0].kind == LawSpec::Kind::Discrete;
    if (w1_discrete) table.w1_atoms.assign(static_cast<std::size_t>(n1), -1);
    for (int j = 0; j < n1; ++j) {
        KeyedStream s(master_seed, 1, 1, static_cast<std::uint64_t>(j), 0);
        int atom;
        draw_vector(laws.w_laws[0], s, w1_dim, table.tables.w1_row(j), atom);
        if (w1_discrete) table.w1_atoms[static_cast<std::size_t>(j)] = atom;
    }

    for (int i = 2; i <= L; ++i) {
        const LawSpec& wlaw = laws.w_laws[static_cast<std::size_t>(i) - 1];
        const int n_prev = resolution[static_cast<std::size_t>(i) - 2];
        const int n_cur = resolution[static_cast<std::size_t>(i) - 1];
        const bool disc = wlaw.kind == LawSpec::Kind::Discrete;
        if (disc)
            table.w_atoms[static_cast<std::size_t>(i) - 2].assign(
                static_cast<std::size_t>(n_prev) * static_cast<std::size_t>(n_cur), -1);
        for (int k = 0; k < n_cur; ++k) {
            for (int j = 0; j < n_prev; ++j) {
                KeyedStream s(master_seed, 2, static_cast<std::uint64_t>(i),
                              static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(k));
                int atom;
                table.tables.wi(i, j, k) = draw_scalar(wlaw, s, atom);
                if (disc)
                    table.w_atoms[static_cast<std::size_t>(i) - 2]
                                 [static_cast<std::size_t>(k) * static_cast<std::size_t>(n_prev) +
                                  static_cast<std::size_t>(j)] = atom;
            }
        }
        const LawSpec& blaw = laws.b_laws[static_cast<std::size_t>(i) - 2];
        const bool bdisc = blaw.kind == LawSpec::Kind::Discrete;
        if (bdisc)
            table.b_atoms[static_cast<std::size_t>(i) - 2].assign(static_cast<std::size_t>(n_cur), -1);
        for (int k = 0; k < n_cur; ++k) {
            KeyedStream s(master_seed, 3, static_cast<std::uint64_t>(i),
                          static_cast<std::uint64_t>(k), 0);
            int atom;
            table.tables.bi(i, k) = draw_scalar(blaw, s, atom);
            if (bdisc) table.b_atoms[static_cast<std::size_t>(i) - 2][static_cast<std::size_t>(k)] = atom;
        }
    }
    if (!table.tables.finite())
        throw std::runtime_error("non-finite value generated in embedding table");
    return table;
}

CoupledPair couple(const EmbeddingTable& table, const std::vector<int>& nn_widths) {
    const int L = static_cast<int>(table.resolution.size());
    if (static_cast<int>(nn_widths.size()) != L)
        throw std::invalid_argument("network layer count must match the table");
    for (int i = 0; i < L; ++i)
        if (nn_widths[static_cast<std::size_t>(i)] > table.resolution[static_cast<std::size_t>(i)])
            throw std::invalid_argument("network width exceeds table resolution");
    if (nn_widths.back() != 1) throw std::invalid_argument("last width must be 1");

    CoupledPair pair;
    pair.mf_init = table.tables;
    pair.mf_init.time = 0.0;
    pair.nn_init = make_state(nn_widths, table.w1_dim);
    const ParamState& full = table.tables;
    for (int j = 0; j < nn_widths[0]; ++j)
        for (int c = 0; c < table.w1_dim; ++c)
            pair.nn_init.w1_row(j)[c] = full.w1_row(j)[c];
    for (int i = 2; i <= L; ++i) {
        for (int k = 0; k < nn_widths[static_cast<std::size_t>(i) - 1]; ++k) {
            for (int j = 0; j < nn_widths[static_cast<std::size_t>(i) - 2]; ++j)
                pair.nn_init.wi(i, j, k) = full.wi(i, j, k);
            pair.nn_init.bi(i, k) = full.bi(i, k);
        }
    }
    return pair;
}

void dump_embedding(const EmbeddingTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "# seed=" << table.master_seed << "\n# resolution=";
    for (std::size_t i = 0; i < table.resolution.size(); ++i)
        out << (i ? "x" : "") << table.resolution[i];
    out << "\n# w_laws=";
    for (std::size_t i = 0; i < table.laws.w_laws.size(); ++i)
        out << (i ? "," : "") << table.laws.w_laws[i].name();
    out << "\n# b_laws=";
    for (std::size_t i = 0; i < table.laws.b_laws.size(); ++i)
        out << (i ? "," : "") << table.laws.b_laws[i].name();
    out << "\nlayer,j,k,coord,value\n";
    char buf[64];
    const ParamState& t = table.tables;
    for (int j = 0; j < table.resolution[0]; ++j)
        for (int c = 0; c < table.w1_dim; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", t.w1_row(j)[c]);
            out << "1," << j << ",0," << c << "," << buf << "\n";
        }
    const int L = static_cast<int>(table.resolution.size());
    for (int i = 2; i <= L; ++i) {
        for (int k = 0; k < table.resolution[static_cast<std::size_t>(i) - 1]; ++k)
            for (int j = 0; j < table.resolution[static_cast<std::size_t>(i) - 2]; ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", t.wi(i, j, k));
                out << i << "," << j << "," << k << ",0," << buf << "\n";
            }
        for (int k = 0; k < table.resolution[static_cast<std::size_t>(i) - 1]; ++k) {
            std::snprintf(buf, sizeof(buf), "%.17g", t.bi(i, k));
            out << "b" << i << ",0," << k << ",0," << buf << "\n";
        }
    }
}

// ---------------------------------------------------------------------------

namespace {

double block_distance(const ParamState& nn, const ParamState& mf) {
    double m = 0.0;
    const int n1 = nn.width(1);
    for (int j = 0; j < n1; ++j) {
        const double* a = nn.w1_row(j);
        const double* b = mf.w1_row(j);
        double sq = 0.0;
        for (int c = 0; c < nn.w1_dim; ++c) {
            double d = a[c] - b[c];
            sq += d * d;
        }
        m = std::max(m, std::sqrt(sq));
    }
    const int L = nn.layers();
    for (int i = 2; i <= L; ++i) {
        for (int k = 0; k < nn.width(i); ++k) {
            for (int j = 0; j < nn.width(i - 1); ++j)
                m = std::max(m, std::abs(nn.wi(i, j, k) - mf.wi(i, j, k)));
            m = std::max(m, std::abs(nn.bi(i, k) - mf.bi(i, k)));
        }
    }
    return m;
}

// indices of matching snapshot times (within tol) up to horizon T
std::vector<std::pair<std::size_t, std::size_t>> shared_times(const TrajectoryLog& a,
                                                              const TrajectoryLog& b,
                                                              double T) {
    constexpr double tol = 1e-9;
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t jb = 0;
    for (std::size_t ja = 0; ja < a.size(); ++ja) {
        double t = a.times[ja];
        if (t > T + tol) break;
        while (jb < b.size() && b.times[jb] < t - tol) ++jb;
        if (jb < b.size() && std::abs(b.times[jb] - t) <= tol) {
            out.push_back({ja, jb});
        } else {
            throw std::invalid_argument("misaligned snapshot grids at t = " +
                                        std::to_string(t));
        }
    }
    return out;
}

} // namespace

double traj_distance(const TrajectoryLog& nn_log, const TrajectoryLog& mf_log,
                     const CoupledPair& pair, double epsilon, double T) {
    if (nn_log.empty() || mf_log.empty()) throw std::invalid_argument("empty trajectory log");
    if (nn_log.t_end() < T - 1e-9 || mf_log.t_end() < T - 1e-9)
        throw std::invalid_argument("logs do not cover the requested horizon");
    if (!nn_log.states[0].same_shape(pair.nn_init) ||
        !mf_log.states[0].same_shape(pair.mf_init))
        throw std::invalid_argument("trajectory shapes do not match the coupled pair");
    if (epsilon > 0.0) {
        for (double t : nn_log.times) {
            double steps = t / epsilon;
            if (std::abs(steps - std::round(steps)) > 1e-6)
                throw std::invalid_argument("network snapshots are not on the step grid");
        }
    }
    double m = 0.0;
    for (auto [ja, jb] : shared_times(nn_log, mf_log, T))
        m = std::max(m, block_distance(nn_log.states[ja], mf_log.states[jb]));
    return m;
}

double test_function_gap(const TrajectoryLog& nn_log, const TrajectoryLog& mf_log,
                         const CoupledPair& pair, int layer,
                         const std::function<double(double)>& psi, const Dataset& data,
                         const ArchitectureSpec& spec, double T) {
    if (layer < 1 || layer > spec.L) throw std::invalid_argument("layer out of range");
    data.validate(spec.x_dim);
    (void)pair;

    auto side_mean = [&](const ParamState& s) {
        ForwardCache cache;
        double acc = 0.0;
        for (std::size_t z = 0; z < data.size(); ++z) {
            forward(s, spec, data.xs[z], cache);
            const auto& H = cache.H[static_cast<std::size_t>(layer) - 1];
            double m = 0.0;
            for (double h : H) m += psi(h);
            acc += m / static_cast<double>(H.size());
        }
        return acc / static_cast<double>(data.size());
    };

    double gap = 0.0;
    for (auto [ja, jb] : shared_times(nn_log, mf_log, T))
        gap = std::max(gap,
                       std::abs(side_mean(nn_log.states[ja]) - side_mean(mf_log.states[jb])));
    return gap;
}

double output_function_gap(const TrajectoryLog& nn_log, const TrajectoryLog& mf_log,
                           const std::function<double(double, double)>& psi,
                           const Dataset& data, const ArchitectureSpec& spec, double T) {
    data.validate(spec.x_dim);
    auto side_mean = [&](const ParamState& s) {
        ForwardCache cache;
        double acc = 0.0;
        for (std::size_t z = 0; z < data.size(); ++z) {
            forward(s, spec, data.xs[z], cache);
            acc += psi(data.ys[z], cache.yhat);
        }
        return acc / static_cast<double>(data.size());
    };
    double gap = 0.0;
    for (auto [ja, jb] : shared_times(nn_log, mf_log, T))
        gap = std::max(gap,
                       std::abs(side_mean(nn_log.states[ja]) - side_mean(mf_log.states[jb])));
    return gap;
}

} // namespace mflab
