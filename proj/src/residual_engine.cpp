#include "koop/residual_engine.hpp"

#include "koop/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace koop {

std::string to_string(ResidualMode m) {
    switch (m) {
        case ResidualMode::NetSearch: return "NetSearch";
        case ResidualMode::RatioNetSearch: return "RatioNetSearch";
        case ResidualMode::MatrixSigmaInf: return "MatrixSigmaInf";
        case ResidualMode::P2Oracle: return "P2Oracle";
    }
    return "?";
}

ResidualMode parse_residual_mode(const std::string& s) {
    for (auto m : {ResidualMode::NetSearch, ResidualMode::RatioNetSearch, ResidualMode::MatrixSigmaInf,
                   ResidualMode::P2Oracle})
        if (to_string(m) == s) return m;
    throw ConfigError("unknown residual mode '" + s + "'");
}

// ---------------------------------------------------------------- sampling

namespace {

void check_section(const Dictionary& dict, std::size_t n2, int n1) {
    if (n2 == 0) throw ConfigError("empty section");
    if (n2 > dict.size())
        throw IndexOutOfRange("section size " + std::to_string(n2) + " exceeds dictionary size " +
                              std::to_string(dict.size()));
    dict.tree().level_size(n1);
}

constexpr std::size_t kDenseGramLimit = 2048;

}  // namespace

SampledSection sample_section(const MapOracle& F, const Dictionary& dict, std::size_t n2, int n1, int precision) {
    check_section(dict, n2, n1);
    const DyadicTree& tree = dict.tree();
    std::size_t cells = tree.level_size(n1);
    SampledSection s;
    s.n2 = n2;
    s.n1 = n1;
    s.w.resize(cells);
    std::vector<Eigen::Triplet<double>> ta, tb;
    std::vector<SparseValue> va, vb;
    for (std::size_t i = 0; i < cells; ++i) {
        Point x = tree.rep(n1, i);
        Point y = F.evaluate(x, precision);
        va.clear();
        vb.clear();
        dict.values_at(y, n2, va);
        dict.values_at(x, n2, vb);
        for (const auto& v : va) ta.emplace_back(static_cast<int>(i), static_cast<int>(v.index), v.value);
        for (const auto& v : vb) tb.emplace_back(static_cast<int>(i), static_cast<int>(v.index), v.value);
        s.w[i] = tree.atom_mass_d(n1, i);
    }
    s.A.resize(static_cast<Eigen::Index>(cells), static_cast<Eigen::Index>(n2));
    s.B.resize(static_cast<Eigen::Index>(cells), static_cast<Eigen::Index>(n2));
    s.A.setFromTriplets(ta.begin(), ta.end());
    s.B.setFromTriplets(tb.begin(), tb.end());
    return s;
}

GramBlocks GramBlocks::leading(std::size_t n) const {
    if (n > n2) throw IndexOutOfRange("leading block larger than the section");
    auto k = static_cast<Eigen::Index>(n);
    GramBlocks g;
    g.n2 = n;
    g.n1 = n1;
    g.AA = AA.topLeftCorner(k, k);
    g.AB = AB.topLeftCorner(k, k);
    g.BB = BB.topLeftCorner(k, k);
    return g;
}

GramBlocks accumulate_gram(const MapOracle& F, const Dictionary& dict, std::size_t n2, int n1, int precision) {
    check_section(dict, n2, n1);
    const DyadicTree& tree = dict.tree();
    std::size_t cells = tree.level_size(n1);
    auto n = static_cast<Eigen::Index>(n2);
    GramBlocks g;
    g.n2 = n2;
    g.n1 = n1;
    std::vector<SparseValue> va, vb;
    if (n2 <= kDenseGramLimit) {
        Eigen::MatrixXd AA = Eigen::MatrixXd::Zero(n, n), AB = AA, BB = AA;
        for (std::size_t i = 0; i < cells; ++i) {
            Point x = tree.rep(n1, i);
            Point y = F.evaluate(x, precision);
            va.clear();
            vb.clear();
            dict.values_at(y, n2, va);
            dict.values_at(x, n2, vb);
            double w = tree.atom_mass_d(n1, i);
            for (const auto& a : va) {
                double wa = w * a.value;
                auto r = static_cast<Eigen::Index>(a.index);
                for (const auto& b : va) AA(r, static_cast<Eigen::Index>(b.index)) += wa * b.value;
                for (const auto& b : vb) AB(r, static_cast<Eigen::Index>(b.index)) += wa * b.value;
            }
            for (const auto& a : vb) {
                double wa = w * a.value;
                auto r = static_cast<Eigen::Index>(a.index);
                for (const auto& b : vb) BB(r, static_cast<Eigen::Index>(b.index)) += wa * b.value;
            }
        }
        g.AA = AA.sparseView(0.0, 0.0);
        g.AB = AB.sparseView(0.0, 0.0);
        g.BB = BB.sparseView(0.0, 0.0);
        return g;
    }
    std::vector<Eigen::Triplet<double>> taa, tab, tbb;
    for (std::size_t i = 0; i < cells; ++i) {
        Point x = tree.rep(n1, i);
        Point y = F.evaluate(x, precision);
        va.clear();
        vb.clear();
        dict.values_at(y, n2, va);
        dict.values_at(x, n2, vb);
        double w = tree.atom_mass_d(n1, i);
        for (const auto& a : va) {
            for (const auto& b : va) taa.emplace_back(a.index, b.index, w * a.value * b.value);
            for (const auto& b : vb) tab.emplace_back(a.index, b.index, w * a.value * b.value);
        }
        for (const auto& a : vb)
            for (const auto& b : vb) tbb.emplace_back(a.index, b.index, w * a.value * b.value);
    }
    g.AA.resize(n, n);
    g.AB.resize(n, n);
    g.BB.resize(n, n);
    g.AA.setFromTriplets(taa.begin(), taa.end());
    g.AB.setFromTriplets(tab.begin(), tab.end());
    g.BB.setFromTriplets(tbb.begin(), tbb.end());
    return g;
}

GramBlocks gram_of(const SampledSection& s) {
    SpMatD W(static_cast<Eigen::Index>(s.w.size()), static_cast<Eigen::Index>(s.w.size()));
    std::vector<Eigen::Triplet<double>> t;
    for (std::size_t i = 0; i < s.w.size(); ++i) t.emplace_back(i, i, s.w[i]);
    W.setFromTriplets(t.begin(), t.end());
    GramBlocks g;
    g.n2 = s.n2;
    g.n1 = s.n1;
    g.AA = SpMatD(s.A.transpose()) * W * s.A;
    g.AB = SpMatD(s.A.transpose()) * W * s.B;
    g.BB = SpMatD(s.B.transpose()) * W * s.B;
    return g;
}

StepFunctionT<cd> apply_koopman_sampled(const MapOracle& F, const Dictionary& dict, const std::vector<cd>& c, int n1,
                                        int precision) {
    check_section(dict, c.size(), n1);
    const DyadicTree& tree = dict.tree();
    StepFunctionT<cd> out{n1, std::vector<cd>(tree.level_size(n1))};
    std::vector<SparseValue> v;
    for (std::size_t i = 0; i < out.coeffs.size(); ++i) {
        Point y = F.evaluate(tree.rep(n1, i), precision);
        v.clear();
        dict.values_at(y, c.size(), v);
        cd s = 0;
        for (const auto& sv : v) s += c[sv.index] * sv.value;
        out.coeffs[i] = s;
    }
    return out;
}

double truncated_norm(const DyadicTree& tree, const StepFunctionT<cd>& f, double p) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.coeffs.size(); ++i) s += std::pow(std::abs(f.coeffs[i]), p) * tree.atom_mass_d(f.level, i);
    return std::pow(s, 1.0 / p);
}

// ---------------------------------------------------------------- p = 2

P2Solution p2_min_ratio(const Eigen::MatrixXcd& H, const Eigen::MatrixXcd& G) {
    if (H.rows() != H.cols() || G.rows() != H.rows() || G.cols() != H.cols()) throw ShapeMismatch("p2 blocks");
    const Eigen::Index n = H.rows();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G);
    const auto& lam = es.eigenvalues();
    double lmax = lam.cwiseAbs().maxCoeff();
    double tol = 1e-11 * std::max(lmax, 1e-300);
    std::vector<Eigen::Index> rng, ker;
    for (Eigen::Index i = 0; i < n; ++i) (lam(i) > tol ? rng : ker).push_back(i);
    if (rng.empty()) throw NumericError("every section element vanishes at the sample points");
    auto r = static_cast<Eigen::Index>(rng.size()), k = static_cast<Eigen::Index>(ker.size());
    Eigen::MatrixXcd Y(n, r), K(n, k);
    for (Eigen::Index i = 0; i < r; ++i) Y.col(i) = es.eigenvectors().col(rng[static_cast<std::size_t>(i)]) / std::sqrt(lam(rng[static_cast<std::size_t>(i)]));
    for (Eigen::Index i = 0; i < k; ++i) K.col(i) = es.eigenvectors().col(ker[static_cast<std::size_t>(i)]);
    Eigen::MatrixXcd S = Y.adjoint() * H * Y;
    Eigen::MatrixXcd Kpinv_HkrS;
    Eigen::MatrixXcd Hkr;
    Eigen::MatrixXcd Hk_pinv;
    if (k > 0) {
        Eigen::MatrixXcd Hk = K.adjoint() * H * K;
        Hkr = K.adjoint() * H * Y;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ek(Hk);
        double kmax = ek.eigenvalues().cwiseAbs().maxCoeff();
        Eigen::VectorXd inv = Eigen::VectorXd::Zero(k);
        for (Eigen::Index i = 0; i < k; ++i)
            if (ek.eigenvalues()(i) > 1e-12 * std::max(kmax, 1e-300)) inv(i) = 1.0 / ek.eigenvalues()(i);
        Hk_pinv = ek.eigenvectors() * inv.asDiagonal() * ek.eigenvectors().adjoint();
        S -= Hkr.adjoint() * Hk_pinv * Hkr;
    }
    S = 0.5 * (S + S.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ss(S);
    P2Solution out;
    out.value = std::sqrt(std::max(ss.eigenvalues()(0), 0.0));
    Eigen::VectorXcd s = ss.eigenvectors().col(0);
    out.vec = Y * s;
    if (k > 0) out.vec -= K * (Hk_pinv * (Hkr * s));
    return out;
}

namespace {

bool is_diagonal(const SpMatD& m) {
    for (Eigen::Index j = 0; j < m.outerSize(); ++j)
        for (SpMatD::InnerIterator it(m, j); it; ++it)
            if (it.row() != it.col() && it.value() != 0.0) return false;
    return true;
}

constexpr std::size_t kDenseP2Limit = 600;

}  // namespace

P2Residual::P2Residual(GramBlocks g) : g_(std::move(g)) {
    if (g_.n2 > kDenseP2Limit) {
        if (!is_diagonal(g_.BB)) throw NumericError("large p=2 sections need an orthogonal sampled basis");
        sparse_ = true;
        Eigen::VectorXd d = g_.BB.diagonal();
        Eigen::VectorXd s(d.size());
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            if (!(d(i) > 0.0)) throw NumericError("section element vanishes at the samples");
            s(i) = 1.0 / std::sqrt(d(i));
        }
        const auto S = s.asDiagonal();
        SpMatD DB = S * SpMatD(g_.AB - g_.BB) * S;
        SpMatD DD = S * SpMatD((g_.AA - g_.AB) - (SpMatD(g_.AB.transpose()) - g_.BB)) * S;
        SpMatD BB = S * g_.BB * S;
        // Fill-reducing order computed once from the union pattern.
        SpMatD pat = DD + DB + SpMatD(DB.transpose()) + BB;
        for (Eigen::Index j = 0; j < pat.outerSize(); ++j)
            for (SpMatD::InnerIterator it(pat, j); it; ++it) it.valueRef() = 1.0;
        Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm;
        Eigen::AMDOrdering<int> amd;
        amd(pat.selfadjointView<Eigen::Lower>(), perm);
        const Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> Pi = perm.inverse();
        auto reorder = [&](const SpMatD& m) {
            SpMatD r = Pi * m * Pi.transpose();
            r.makeCompressed();
            return r;
        };
        sDD_ = reorder(DD);
        sDB_ = reorder(DB);
        sDBt_ = SpMatD(sDB_.transpose());
        sBB_ = reorder(BB);
    } else {
        Eigen::MatrixXd AA(g_.AA), AB(g_.AB);
        BB_ = Eigen::MatrixXd(g_.BB);
        // Blocks of D = A - B: exact zeros when F acts trivially on the section.
        DD_ = (AA - AB) - (AB.transpose() - BB_);
        DB_ = AB - BB_;
    }
}

P2Solution P2Residual::solve(cd z) const {
    if (sparse_) {
        P2Solution s;
        s.value = sparse_value(z);
        return s;
    }
    // A - zB = D + (1 - z)B
    const cd w = 1.0 - z;
    Eigen::MatrixXcd H = DD_.cast<cd>() + w * DB_.cast<cd>() + std::conj(w) * DB_.transpose().cast<cd>() +
                         std::norm(w) * BB_.cast<cd>();
    H = 0.5 * (H + H.adjoint()).eval();
    Eigen::MatrixXcd G = BB_.cast<cd>();
    P2Solution sol = p2_min_ratio(H, G);
    // Rayleigh quotient at the minimizer.
    double num = std::real(sol.vec.dot(H * sol.vec)), den = std::real(sol.vec.dot(G * sol.vec));
    if (den > 1e-10 * sol.vec.squaredNorm() * G.cwiseAbs().maxCoeff() && std::isfinite(num / den))
        sol.value = std::sqrt(std::max(num / den, 0.0));
    return sol;
}

double P2Residual::value(cd z) const { return sparse_ ? sparse_value(z) : solve(z).value; }

double P2Residual::sparse_value(cd z) const {
    const auto n = static_cast<Eigen::Index>(g_.n2);
    const cd w = 1.0 - z;
    const double tau = 1e-8;
    SpMatC I(n, n);
    I.setIdentity();
    SpMatC Ht = sDD_.cast<cd>() + w * sDB_.cast<cd>() + std::conj(w) * sDBt_.cast<cd>() + std::norm(w) * sBB_.cast<cd>() +
                cd(tau, 0.0) * I;
    Eigen::SimplicialLDLT<SpMatC, Eigen::Lower, Eigen::NaturalOrdering<int>> ldlt(Ht);
    if (ldlt.info() != Eigen::Success) throw NumericError("sparse factorization failed");

    // Lanczos on the inverse with full reorthogonalization.
    const int kmax = static_cast<int>(std::min<Eigen::Index>(80, n));
    Eigen::MatrixXcd Q(n, kmax);
    Eigen::VectorXcd q(n);
    for (Eigen::Index i = 0; i < n; ++i) q(i) = cd(1.0 + 0.5 * std::sin(0.7 * static_cast<double>(i) + 0.3), 0.0);
    q.normalize();
    std::vector<double> alpha, beta;
    double theta = 0.0;
    for (int k = 0; k < kmax; ++k) {
        Q.col(k) = q;
        Eigen::VectorXcd y = ldlt.solve(q);
        double a = std::real(q.dot(y));
        alpha.push_back(a);
        auto Qk = Q.leftCols(k + 1);
        for (int pass = 0; pass < 2; ++pass) y -= Qk * (Qk.adjoint() * y);
        double b = y.norm();
        int m = k + 1;
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            T(i, i) = alpha[static_cast<std::size_t>(i)];
            if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[static_cast<std::size_t>(i)];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
        theta = es.eigenvalues()(m - 1);
        double resid = std::abs(b * es.eigenvectors()(m - 1, m - 1));
        if (resid <= 1e-10 * theta || b <= 1e-14 * theta) break;
        beta.push_back(b);
        q = y / b;
    }
    double lam = 1.0 / theta - tau;
    return std::sqrt(std::max(lam, 0.0));
}

// ---------------------------------------------------------------- net search

RatioProblem::RatioProblem(SpMatC A, SpMatC B, std::vector<double> w, double p)
    : A_(std::move(A)), B_(std::move(B)), w_(std::move(w)), p_(p) {
    if (A_.rows() != B_.rows() || A_.cols() != B_.cols() || static_cast<std::size_t>(A_.rows()) != w_.size())
        throw ShapeMismatch("ratio problem blocks");
    if (!(p_ >= 1.0)) throw ConfigError("exponent must be at least 1");
    A_.makeCompressed();
    B_.makeCompressed();
}

namespace {

inline double pw(cd v, double p) { return p == 2.0 ? std::norm(v) : std::pow(std::abs(v), p); }

double psum(const Eigen::VectorXcd& u, const std::vector<double>& w, double p) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) s += w[static_cast<std::size_t>(i)] * pw(u(i), p);
    return s;
}

bool lex_less(const std::vector<cd>& a, const std::vector<cd>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].real() != b[i].real()) return a[i].real() < b[i].real();
        if (a[i].imag() != b[i].imag()) return a[i].imag() < b[i].imag();
    }
    return false;
}

Eigen::VectorXcd to_vec(const std::vector<cd>& c) {
    Eigen::VectorXcd v(static_cast<Eigen::Index>(c.size()));
    for (std::size_t i = 0; i < c.size(); ++i) v(static_cast<Eigen::Index>(i)) = c[i];
    return v;
}

}  // namespace

double RatioProblem::numerator(cd z, const std::vector<cd>& c) const {
    SpMatC M = A_ - z * B_;
    return std::pow(psum(M * to_vec(c), w_, p_), 1.0 / p_);
}

double RatioProblem::denominator(const std::vector<cd>& c) const {
    return std::pow(psum(B_ * to_vec(c), w_, p_), 1.0 / p_);
}

double RatioProblem::ratio(cd z, const std::vector<cd>& c) const {
    double d = denominator(c);
    if (d == 0.0) return std::numeric_limits<double>::infinity();
    return numerator(z, c) / d;
}

double RatioProblem::norm_bound(std::optional<cd> z) const {
    SpMatC M = z ? SpMatC(A_ - *z * B_) : B_;
    std::vector<double> row(static_cast<std::size_t>(M.rows()), 0.0);
    double col_max = 0.0;
    for (Eigen::Index j = 0; j < M.outerSize(); ++j) {
        double cs = 0.0;
        for (SpMatC::InnerIterator it(M, j); it; ++it) {
            double s = std::pow(w_[static_cast<std::size_t>(it.row())], 1.0 / p_) * std::abs(it.value());
            cs += s;
            row[static_cast<std::size_t>(it.row())] += s;
        }
        col_max = std::max(col_max, cs);
    }
    double row_max = row.empty() ? 0.0 : *std::max_element(row.begin(), row.end());
    return std::pow(col_max, 1.0 / p_) * std::pow(row_max, 1.0 - 1.0 / p_);
}

std::vector<NetResult> RatioProblem::candidates(cd z, const NetOptions& opt) const {
    const std::size_t n = dim();
    if (opt.bits < 1 || opt.bits > 40) throw ConfigError("net resolution must lie in [1,40]");
    const double unit = std::ldexp(1.0, -opt.bits);
    SpMatC M = A_ - z * B_;
    M.makeCompressed();

    std::vector<std::vector<cd>> starts;
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<cd> c(n, 0.0);
        c[j] = 1.0;
        starts.push_back(c);
    }
    auto round_net = [&](double v) { return std::clamp(std::round(v / unit), -std::ldexp(1.0, opt.bits), std::ldexp(1.0, opt.bits)) * unit; };
    if (opt.warm_start && n <= 64) {
        Eigen::MatrixXcd Md(M), Bd(B_);
        Eigen::VectorXd wv(static_cast<Eigen::Index>(w_.size()));
        for (std::size_t i = 0; i < w_.size(); ++i) wv(static_cast<Eigen::Index>(i)) = w_[i];
        Eigen::MatrixXcd H = Md.adjoint() * wv.asDiagonal() * Md;
        Eigen::MatrixXcd G = Bd.adjoint() * wv.asDiagonal() * Bd;
        try {
            P2Solution s = p2_min_ratio(H, G);
            double mx = 0.0;
            for (Eigen::Index i = 0; i < s.vec.size(); ++i)
                mx = std::max({mx, std::abs(s.vec(i).real()), std::abs(s.vec(i).imag())});
            if (mx > 0) {
                std::vector<cd> c(n);
                bool nz = false;
                for (std::size_t i = 0; i < n; ++i) {
                    cd v = s.vec(static_cast<Eigen::Index>(i)) / mx;
                    c[i] = cd(round_net(v.real()), round_net(v.imag()));
                    nz = nz || c[i] != cd(0.0);
                }
                if (nz) starts.push_back(c);
            }
        } catch (const NumericError&) {
        }
    }
    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<long long> dist(-(1LL << opt.bits), 1LL << opt.bits);
    for (int r = 0; r < opt.random_starts; ++r) {
        std::vector<cd> c(n);
        bool nz = false;
        for (auto& v : c) {
            v = cd(static_cast<double>(dist(rng)) * unit, static_cast<double>(dist(rng)) * unit);
            nz = nz || v != cd(0.0);
        }
        if (nz) starts.push_back(c);
    }

    std::vector<NetResult> out;
    const cd moves[4] = {cd(1, 0), cd(-1, 0), cd(0, 1), cd(0, -1)};
    for (auto c : starts) {
        Eigen::VectorXcd u = M * to_vec(c), v = B_ * to_vec(c);
        double Su = psum(u, w_, p_), Sv = psum(v, w_, p_);
        if (Sv == 0.0) continue;
        for (int lev = 1; lev <= opt.bits; ++lev) {
            const double s = std::ldexp(1.0, -lev);
            for (int sweep = 0; sweep < 100000; ++sweep) {
                bool improved = false;
                for (std::size_t j = 0; j < n; ++j) {
                    double cur = Su / Sv;
                    int best = -1;
                    double best_r = cur, bSu = 0, bSv = 0;
                    for (int k = 0; k < 4; ++k) {
                        cd d = moves[k] * s;
                        cd nc = c[j] + d;
                        if (std::abs(nc.real()) > 1.0 || std::abs(nc.imag()) > 1.0) continue;
                        double dSu = 0.0, dSv = 0.0;
                        for (SpMatC::InnerIterator it(M, static_cast<Eigen::Index>(j)); it; ++it) {
                            double wi = w_[static_cast<std::size_t>(it.row())];
                            cd old = u(it.row());
                            dSu += wi * (pw(old + it.value() * d, p_) - pw(old, p_));
                        }
                        for (SpMatC::InnerIterator it(B_, static_cast<Eigen::Index>(j)); it; ++it) {
                            double wi = w_[static_cast<std::size_t>(it.row())];
                            cd old = v(it.row());
                            dSv += wi * (pw(old + it.value() * d, p_) - pw(old, p_));
                        }
                        double nSu = std::max(Su + dSu, 0.0), nSv = Sv + dSv;
                        if (!(nSv > 1e-300)) continue;
                        double r = nSu / nSv;
                        if (r < best_r * (1.0 - 1e-12) - 1e-300) {
                            best = k;
                            best_r = r;
                            bSu = nSu;
                            bSv = nSv;
                        }
                    }
                    if (best >= 0) {
                        cd d = moves[best] * s;
                        c[j] += d;
                        for (SpMatC::InnerIterator it(M, static_cast<Eigen::Index>(j)); it; ++it) u(it.row()) += it.value() * d;
                        for (SpMatC::InnerIterator it(B_, static_cast<Eigen::Index>(j)); it; ++it) v(it.row()) += it.value() * d;
                        Su = bSu;
                        Sv = bSv;
                        improved = true;
                    }
                }
                if (!improved) break;
            }
            u = M * to_vec(c);
            v = B_ * to_vec(c);
            Su = psum(u, w_, p_);
            Sv = psum(v, w_, p_);
        }
        NetResult r;
        r.c = c;
        r.value = std::pow(Su / Sv, 1.0 / p_);
        out.push_back(std::move(r));
    }
    if (out.empty()) throw NumericError("no admissible net start");
    std::sort(out.begin(), out.end(), [](const NetResult& a, const NetResult& b) {
        if (a.value != b.value) return a.value < b.value;
        return lex_less(a.c, b.c);
    });
    return out;
}

NetResult RatioProblem::minimize(cd z, const NetOptions& opt) const { return candidates(z, opt).front(); }

double norm_equivalence_surrogate(const SampledSection& s, double p, int bits) {
    const auto rows = s.A.rows(), n = s.A.cols();
    std::vector<Eigen::Triplet<cd>> ta, tb;
    for (Eigen::Index j = 0; j < s.B.outerSize(); ++j)
        for (SpMatD::InnerIterator it(s.B, j); it; ++it) ta.emplace_back(it.row(), it.col(), cd(it.value(), 0.0));
    for (Eigen::Index i = 0; i < n; ++i) tb.emplace_back(rows + i, i, cd(1.0, 0.0));
    SpMatC A(rows + n, n), B(rows + n, n);
    A.setFromTriplets(ta.begin(), ta.end());
    B.setFromTriplets(tb.begin(), tb.end());
    std::vector<double> w = s.w;
    w.resize(static_cast<std::size_t>(rows + n), 1.0);
    RatioProblem prob(std::move(A), std::move(B), std::move(w), p);
    NetOptions opt;
    opt.bits = bits;
    opt.random_starts = 2;
    return prob.minimize(0.0, opt).value;
}

// ---------------------------------------------------------------- matrices

Eigen::MatrixXcd compression_matrix(const GramBlocks& g, const DualSystem& duals) {
    if (duals.n != g.n2) throw DualsMissing("duals built for " + std::to_string(duals.n) + " elements, section has " +
                                            std::to_string(g.n2));
    Eigen::MatrixXd C(duals.coeff);
    Eigen::MatrixXd BA = Eigen::MatrixXd(g.AB).transpose();
    return (C * BA).cast<cd>();
}

Eigen::MatrixXcd compression_matrix(const MapOracle& F, const Dictionary& dict, const DualSystem& duals, std::size_t n2,
                                    int n1, int precision) {
    if (duals.n < n2) throw DualsMissing("duals do not cover the section");
    DualSystem d = duals;
    if (duals.n > n2) {
        d.n = n2;
        d.coeff = SpMatD(duals.coeff.topLeftCorner(static_cast<Eigen::Index>(n2), static_cast<Eigen::Index>(n2)));
    }
    return compression_matrix(accumulate_gram(F, dict, n2, n1, precision), d);
}

double induced_norm_bound(const Eigen::MatrixXcd& D, double p) {
    if (D.size() == 0) return 0.0;
    Eigen::MatrixXd a = D.cwiseAbs();
    double n1 = a.colwise().sum().maxCoeff();
    double ninf = a.rowwise().sum().maxCoeff();
    if (p == 1.0) return n1;
    if (std::isinf(p)) return ninf;
    if (p == 2.0) {
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(D);
        return svd.singularValues()(0);
    }
    return std::pow(n1, 1.0 / p) * std::pow(ninf, 1.0 - 1.0 / p);
}

double perturbation_bound(const Eigen::MatrixXcd& M, const Eigen::MatrixXcd& N, double p) {
    if (M.rows() != N.rows() || M.cols() != N.cols()) throw ShapeMismatch("perturbation operands differ in shape");
    return induced_norm_bound(M - N, p);
}

ResidualResult sigma_inf_net(const Eigen::MatrixXcd& M, cd z, double p, int bits, const NetOptions& base) {
    if (M.rows() != M.cols()) throw NonSquare("sigma_inf needs a square matrix");
    const auto n = M.rows();
    SpMatC A = M.sparseView(0.0, 0.0);
    SpMatC I(n, n);
    I.setIdentity();
    RatioProblem prob(A, I, std::vector<double>(static_cast<std::size_t>(n), 1.0), p);
    NetOptions opt = base;
    opt.bits = bits;
    NetResult r = prob.minimize(z, opt);
    ResidualResult out;
    out.value = r.value;
    out.coeffs = r.c;
    double delta = std::pow(static_cast<double>(n), 1.0 / p) * std::sqrt(2.0) * std::ldexp(1.0, -bits - 1);
    Eigen::MatrixXcd Mz = M - z * Eigen::MatrixXcd::Identity(n, n);
    out.error_bar = delta < 1.0 ? (induced_norm_bound(Mz, p) + r.value) * delta / (1.0 - delta)
                                : std::numeric_limits<double>::infinity();
    return out;
}

ResidualResult sigma_inf_matrix(const Eigen::MatrixXcd& M, cd z, double p, int bits, const NetOptions& base) {
    if (M.rows() != M.cols()) throw NonSquare("sigma_inf needs a square matrix");
    if (p == 2.0) {
        Eigen::MatrixXcd Mz = M - z * Eigen::MatrixXcd::Identity(M.rows(), M.cols());
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Mz);
        ResidualResult out;
        out.value = M.size() ? svd.singularValues()(svd.singularValues().size() - 1) : 0.0;
        out.error_bar = 1e-14 * std::max(1.0, M.size() ? svd.singularValues()(0) : 0.0);
        return out;
    }
    return sigma_inf_net(M, z, p, bits, base);
}

// ---------------------------------------------------------------- evaluator

SectionResidual::SectionResidual(const MapOracle& F, const Dictionary& dict, std::size_t n2, int n1, ResidualOptions opt)
    : opt_(opt), n2_(n2), n1_(n1) {
    if (!(opt_.p > 1.0) || std::isinf(opt_.p)) throw ConfigError("residual exponent must lie in (1,inf)");
    switch (opt_.mode) {
        case ResidualMode::P2Oracle:
            if (opt_.p != 2.0) throw ConfigError("P2Oracle needs p = 2");
            p2_.emplace(accumulate_gram(F, dict, n2, n1, opt_.precision));
            break;
        case ResidualMode::MatrixSigmaInf: {
            DualSystem duals = build_duals(dict, n2);
            compression_ = compression_matrix(accumulate_gram(F, dict, n2, n1, opt_.precision), duals);
            break;
        }
        case ResidualMode::NetSearch:
        case ResidualMode::RatioNetSearch: {
            section_ = sample_section(F, dict, n2, n1, opt_.precision);
            problem_.emplace(section_->A.cast<cd>(), section_->B.cast<cd>(), section_->w, opt_.p);
            alpha_ = 0.5 * norm_equivalence_surrogate(*section_, opt_.p);
            break;
        }
    }
}

ResidualResult SectionResidual::operator()(cd z) const {
    ResidualResult out;
    switch (opt_.mode) {
        case ResidualMode::P2Oracle:
            out.value = p2_->value(z);
            out.error_bar = 1e-12;
            return out;
        case ResidualMode::MatrixSigmaInf:
            return sigma_inf_matrix(*compression_, z, opt_.p, opt_.net.bits, opt_.net);
        case ResidualMode::RatioNetSearch:
        case ResidualMode::NetSearch: {
            auto cands = problem_->candidates(z, opt_.net);
            const int bits = opt_.net.bits;
            double delta = std::pow(static_cast<double>(n2_), 1.0 / opt_.p) * std::sqrt(2.0) * std::ldexp(1.0, -bits - 1);
            double nb = problem_->norm_bound(std::nullopt);
            double nm = problem_->norm_bound(z);
            out.heuristic = true;
            if (opt_.mode == ResidualMode::RatioNetSearch) {
                out.value = cands.front().value;
                out.coeffs = cands.front().c;
            } else {
                // Rescale to the unit sphere, round onto the net and keep points inside the band.
                const double band = std::ldexp(1.0, -n1_);
                const double unit = std::ldexp(1.0, -bits);
                bool found = false;
                double best = std::numeric_limits<double>::infinity();
                for (const auto& c : cands) {
                    double d = problem_->denominator(c.c);
                    std::vector<cd> r(c.c.size());
                    for (std::size_t i = 0; i < r.size(); ++i)
                        r[i] = cd(std::round(c.c[i].real() / d / unit) * unit, std::round(c.c[i].imag() / d / unit) * unit);
                    double nd = problem_->denominator(r);
                    if (std::abs(nd - 1.0) > band) continue;
                    double v = problem_->numerator(z, r);
                    if (!found || v < best || (v == best && lex_less(r, out.coeffs))) {
                        best = v;
                        out.coeffs = r;
                    }
                    found = true;
                }
                if (!found) throw EmptyNet("no net point in the normalization band; use RatioNetSearch");
                out.value = best;
            }
            double den = alpha_ - nb * delta;
            out.error_bar = den > 0 ? (nm + out.value * nb) * delta / den : std::numeric_limits<double>::infinity();
            return out;
        }
    }
    return out;
}

}  // namespace koop
