#include "koop/tower_runner.hpp"

#include "koop/errors.hpp"
#include "koop/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace koop {

std::vector<ComplexQ> make_grid(const GridSpec& spec) {
    if (spec.mesh <= 0) throw ConfigError("grid mesh must be positive");
    if (spec.radius < 0) throw ConfigError("grid radius must be nonnegative");
    Rational ratio = spec.radius / spec.mesh;
    Integer K = floor_int(ratio);
    if (K > 4096) throw ConfigError("grid too fine: radius/mesh exceeds 4096");
    long k_max = static_cast<long>(K);
    Rational r2 = ratio * ratio;
    std::vector<ComplexQ> out;
    for (long k = -k_max; k <= k_max; ++k)
        for (long l = -k_max; l <= k_max; ++l)
            if (Rational(k * k + l * l) <= r2) out.push_back({spec.mesh * k, spec.mesh * l});
    return out;
}

std::string to_string(TowerMode m) {
    switch (m) {
        case TowerMode::Sigma2General: return "Sigma2General";
        case TowerMode::Sigma2Stabilized: return "Sigma2Stabilized";
        case TowerMode::Sigma1Modulus: return "Sigma1Modulus";
        case TowerMode::Sigma1Markov: return "Sigma1Markov";
        case TowerMode::ArithmeticSigma2: return "ArithmeticSigma2";
        case TowerMode::ArithmeticSigma3: return "ArithmeticSigma3";
    }
    return "?";
}

TowerMode parse_tower_mode(const std::string& s) {
    for (auto m : {TowerMode::Sigma2General, TowerMode::Sigma2Stabilized, TowerMode::Sigma1Modulus, TowerMode::Sigma1Markov,
                   TowerMode::ArithmeticSigma2, TowerMode::ArithmeticSigma3})
        if (to_string(m) == s) return m;
    throw ConfigError("unknown tower mode: " + s);
}

PointSet CompactSet::as_points() const {
    PointSet out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(p.to_complex());
    return out;
}

std::vector<double> evaluate_on_grid(const ResidualFn& h, const std::vector<ComplexQ>& grid, int threads) {
    std::vector<cd> zs(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) zs[i] = grid[i].to_complex();
    std::vector<double> out(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) { out[i] = h(zs[i]); }, threads);
    return out;
}

CompactSet threshold_set(const std::vector<ComplexQ>& grid, const std::vector<double>& h, double threshold) {
    if (grid.size() != h.size()) throw ShapeMismatch("grid and residual sizes differ");
    CompactSet s;
    s.threshold = threshold;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (h[i] < threshold) s.points.push_back(grid[i]);
    return s;
}

namespace {

ResidualFn as_fn(const std::shared_ptr<SectionResidual>& r) {
    return [r](cd z) { return (*r)(z).value; };
}

}  // namespace

CompactSet gamma_base(const MapOracle& F, const Dictionary& dict, double eps, std::size_t n2, int n1, const GridSpec& grid,
                      const ResidualOptions& opt) {
    if (n2 == 0) throw ConfigError("n2 must be positive");
    auto r = std::make_shared<SectionResidual>(F, dict, n2, n1, opt);
    auto pts = make_grid(grid);
    double thr = eps - 1.0 / static_cast<double>(n2);
    CompactSet s = threshold_set(pts, evaluate_on_grid(as_fn(r), pts), thr);
    s.tower = to_string(TowerMode::Sigma2General);
    s.epsilon = eps;
    s.indices = {{"n2", static_cast<long>(n2)}, {"n1", n1}};
    if (thr <= 0) s.warnings.push_back("threshold eps - 1/n2 is not positive; set is empty");
    return s;
}

std::vector<CompactSet> gamma_stabilized_trace(const std::vector<ResidualFn>& by_k, double threshold,
                                               const std::vector<ComplexQ>& grid) {
    std::vector<char> accepted(grid.size(), 0);
    std::vector<CompactSet> out;
    for (const auto& h : by_k) {
        auto vals = evaluate_on_grid(h, grid);
        CompactSet s;
        s.threshold = threshold;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (vals[i] < threshold) accepted[i] = 1;
            if (accepted[i]) s.points.push_back(grid[i]);
        }
        out.push_back(std::move(s));
    }
    return out;
}

CompactSet gamma_stabilized(const MapOracle& F, const Dictionary& dict, double eps, std::size_t n2, int n1,
                            const GridSpec& grid, const ResidualOptions& opt, int k_min) {
    if (n2 == 0) throw ConfigError("n2 must be positive");
    if (k_min < 0 || k_min > n1) throw ConfigError("need 0 <= k_min <= n1");
    std::vector<ResidualFn> fns;
    for (int k = k_min; k <= n1; ++k) fns.push_back(as_fn(std::make_shared<SectionResidual>(F, dict, n2, k, opt)));
    double thr = eps - 1.0 / static_cast<double>(n2);
    auto trace = gamma_stabilized_trace(fns, thr, make_grid(grid));
    CompactSet s = std::move(trace.back());
    s.tower = to_string(TowerMode::Sigma2Stabilized);
    s.epsilon = eps;
    s.indices = {{"n2", static_cast<long>(n2)}, {"n1", n1}, {"k_min", k_min}};
    if (thr <= 0) s.warnings.push_back("threshold eps - 1/n2 is not positive; set is empty");
    return s;
}

// ---------------------------------------------------------------- Sigma1

namespace {

Sigma1Level sigma1_level(const MapOracle& F, const Dictionary& dict, std::size_t n, double R, double p, double lipschitz,
                         int q0) {
    const auto& mod = F.flags().modulus;
    if (!mod) throw ModulusMissing("map '" + F.name() + "' has no modulus of continuity");
    if (!(p > 1.0) || std::isinf(p)) throw ConfigError("exponent must lie in (1,inf)");
    if (R <= 0) throw ConfigError("radius must be positive");
    if (n == 0 || n > dict.size()) throw CountExceedsTree("element count outside the dictionary");

    q0 = std::min(dict.tree().depth(), q0);
    double alpha;
    if (p == 2.0) {
        GramBlocks g = accumulate_gram(F, dict, n, q0);
        Eigen::MatrixXd BB(g.BB);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(BB, Eigen::EigenvaluesOnly);
        alpha = std::sqrt(std::max(0.0, es.eigenvalues()(0)));
    } else {
        alpha = norm_equivalence_surrogate(sample_section(F, dict, n, q0), p);
    }
    if (!(alpha > 0)) throw SingularGram("dictionary section is numerically dependent");

    Sigma1Level out;
    out.alpha = alpha;
    out.radius = R;
    out.lipschitz = lipschitz;
    double dn = static_cast<double>(n);
    double K1 = std::pow(dn, 1.0 - 1.0 / p) / alpha;
    out.constant = p * std::pow((1.0 + R) * K1, p - 1.0) * K1 * out.lipschitz * std::max(1.0, R);
    double target = 1.0 / (4.0 * dn);
    for (int m = 0; m <= 60; ++m) {
        if (out.constant * ((*mod)(m) + std::ldexp(1.0, -m)) <= target) {
            out.m = m;
            return out;
        }
    }
    throw NumericError("no quadrature level up to 60 meets the error target");
}

CompactSet sigma1_run(const MapOracle& F, const Dictionary& dict, const Sigma1Level& lv, double eps, std::size_t n,
                      const GridSpec& grid, const ResidualOptions& opt) {
    if (lv.m > dict.tree().depth())
        throw LevelOutOfRange("quadrature level " + std::to_string(lv.m) + " exceeds tree depth " +
                              std::to_string(dict.tree().depth()));
    auto r = std::make_shared<SectionResidual>(F, dict, n, lv.m, opt);
    auto pts = make_grid(grid);
    double thr = eps - 1.0 / static_cast<double>(n);
    CompactSet s = threshold_set(pts, evaluate_on_grid(as_fn(r), pts), thr);
    s.tower = to_string(TowerMode::Sigma1Modulus);
    s.epsilon = eps;
    s.indices = {{"n", static_cast<long>(n)}, {"m", lv.m}};
    if (thr <= 0) s.warnings.push_back("threshold eps - 1/n is not positive; set is empty");
    return s;
}

}  // namespace

Sigma1Level sigma1_quadrature_level(const MapOracle& F, const ThetaDictionary& dict, std::size_t n, double R, double p) {
    return sigma1_level(F, dict, n, R, p, dict.lipschitz_bound(std::min(n, dict.size())),
                        static_cast<int>(dict.levels().size()) + 8);
}

Sigma1Level sigma1_quadrature_level(const MapOracle& F, const LipschitzDictionary& dict, std::size_t n, double R, double p) {
    return sigma1_level(F, dict, n, R, p, dict.lipschitz_bound(), dict.level() + 8);
}

CompactSet run_sigma1_modulus(const MapOracle& F, const ThetaDictionary& dict, double eps, std::size_t n,
                              const GridSpec& grid, double R, const ResidualOptions& opt, Sigma1Level* level) {
    Sigma1Level lv = sigma1_quadrature_level(F, dict, n, R, opt.p);
    if (level) *level = lv;
    return sigma1_run(F, dict, lv, eps, n, grid, opt);
}

CompactSet run_sigma1_modulus(const MapOracle& F, const LipschitzDictionary& dict, double eps, std::size_t n,
                              const GridSpec& grid, double R, const ResidualOptions& opt, Sigma1Level* level) {
    Sigma1Level lv = sigma1_quadrature_level(F, dict, n, R, opt.p);
    if (level) *level = lv;
    return sigma1_run(F, dict, lv, eps, n, grid, opt);
}

// ---------------------------------------------------------------- cascade

CascadeReport sigma_ap_cascade(const ResidualFn& h, double eps0, int m_max, std::size_t n2, const GridSpec& grid) {
    if (n2 == 0) throw ConfigError("n2 must be positive");
    if (m_max < 0) throw ConfigError("cascade depth must be nonnegative");
    auto pts = make_grid(grid);
    auto vals = evaluate_on_grid(h, pts);
    CascadeReport rep;
    for (int m = 0; m <= m_max; ++m) {
        double e = std::ldexp(eps0, -m);
        double thr = e - 1.0 / static_cast<double>(n2);
        CompactSet s = threshold_set(pts, vals, thr);
        s.tower = "SigmaAp";
        s.epsilon = e;
        s.indices = {{"n2", static_cast<long>(n2)}, {"m", m}};
        rep.degenerate.push_back(thr <= 0);
        if (thr <= 0) s.warnings.push_back("threshold is not positive");
        if (!rep.sets.empty()) {
            const auto& prev = rep.sets.back().points;
            for (const auto& z : s.points) {
                bool found = std::any_of(prev.begin(), prev.end(), [&](const ComplexQ& w) { return w.re == z.re && w.im == z.im; });
                if (!found) {
                    ++rep.nesting_violations;
                    break;
                }
            }
        }
        rep.eps.push_back(e);
        rep.sets.push_back(std::move(s));
    }
    return rep;
}

CascadeReport sigma_ap_cascade(const MapOracle& F, const Dictionary& dict, double eps0, int m_max, std::size_t n2, int n1,
                               const GridSpec& grid, const ResidualOptions& opt) {
    auto r = std::make_shared<SectionResidual>(F, dict, n2, n1, opt);
    return sigma_ap_cascade(as_fn(r), eps0, m_max, n2, grid);
}

// ---------------------------------------------------------------- arithmetic

namespace {

struct ArithmeticTables {
    std::vector<std::vector<Rational>> a, b;   // [cell][element]
    std::vector<Rational> mass;
};

ArithmeticTables arithmetic_tables(const MapOracle& F, const Dictionary& dict, std::size_t n2, int n1) {
    const auto* haar = dynamic_cast<const HaarDictionary*>(&dict);
    const auto* ind = dynamic_cast<const IndicatorDictionary*>(&dict);
    if (!haar && !ind) throw IrrationalMassModel("exact residual needs a Haar or indicator dictionary, got " + dict.kind());
    if (n2 == 0 || n2 > dict.size()) throw CountExceedsTree("element count outside the dictionary");
    const auto& tree = dict.tree();
    int L = std::max(n1, dict.step_level(n2).value_or(0));
    if (L > tree.depth()) throw LevelOutOfRange("level exceeds tree depth");

    std::vector<std::vector<Rational>> table(n2);
    for (std::size_t j = 0; j < n2; ++j) {
        if (haar) {
            table[j] = haar->unnormalized_step(j, L);
        } else {
            table[j].assign(tree.level_size(L), Rational(0));
            for (std::size_t Q = 0; Q < table[j].size(); ++Q)
                if (tree.locate(ind->level(), tree.rep(L, Q)) == j) table[j][Q] = 1;
        }
    }
    ArithmeticTables t;
    std::size_t cells = tree.level_size(n1);
    t.a.assign(cells, std::vector<Rational>(n2));
    t.b.assign(cells, std::vector<Rational>(n2));
    t.mass.resize(cells);
    for (std::size_t P = 0; P < cells; ++P) {
        Point x = tree.rep(n1, P);
        std::size_t qb = tree.locate(L, x);
        std::size_t qa = tree.locate(L, F.evaluate(x));
        for (std::size_t j = 0; j < n2; ++j) {
            t.a[P][j] = table[j][qa];
            t.b[P][j] = table[j][qb];
        }
        t.mass[P] = tree.atom_mass({n1, P});
    }
    return t;
}

// All nonzero vectors with entries (k + il)/2^bits, |k|,|l| <= 2^bits, in a fixed order.
template <class Fn>
void for_each_net_vector(std::size_t n, int bits, Fn&& fn) {
    if (bits < 0 || bits > 4) throw ConfigError("exact net bits must lie in [0,4]");
    long side = 2L * (1L << bits) + 1;
    long per = side * side;
    double total = std::pow(static_cast<double>(per), static_cast<double>(n));
    if (total > 2e5) throw ConfigError("exact net too large; reduce n2 or net bits");
    std::vector<long> idx(n, 0);
    const long half = 1L << bits;
    std::vector<std::pair<long, long>> c(n);
    for (;;) {
        bool nonzero = false;
        for (std::size_t j = 0; j < n; ++j) {
            c[j] = {idx[j] / side - half, idx[j] % side - half};
            nonzero = nonzero || c[j].first != 0 || c[j].second != 0;
        }
        if (nonzero) fn(c);
        std::size_t j = 0;
        while (j < n && ++idx[j] == per) idx[j++] = 0;
        if (j == n) return;
    }
}

int relative_bits(const Rational& v, int n0, int scale_num = 1, int scale_den = 1) {
    if (v == 0) return n0 + 8;
    return n0 + 8 - (floor_log2(v) * scale_num) / scale_den;
}

}  // namespace

Rational arithmetic_residual(const MapOracle& F, const Dictionary& dict, const ComplexQ& z, std::size_t n2, int n1, int n0,
                             unsigned p, int net_bits) {
    if (p < 1) throw ConfigError("exponent must be a positive integer");
    auto t = arithmetic_tables(F, dict, n2, n1);
    const std::size_t cells = t.mass.size();
    std::vector<Rational> mlo(cells), mhi(cells);
    for (std::size_t P = 0; P < cells; ++P) {
        int k = relative_bits(t.mass[P], n0);
        mlo[P] = floor_dyadic(t.mass[P], k);
        mhi[P] = ceil_dyadic(t.mass[P], k);
    }
    std::vector<std::vector<ComplexQ>> d(cells, std::vector<ComplexQ>(n2));
    for (std::size_t P = 0; P < cells; ++P)
        for (std::size_t j = 0; j < n2; ++j) d[P][j] = ComplexQ{t.a[P][j], Rational(0)} - z * t.b[P][j];

    const Rational unit = Rational(1, Integer(1) << net_bits);
    bool have = false;
    Rational best;
    for_each_net_vector(n2, net_bits, [&](const std::vector<std::pair<long, long>>& c) {
        Rational num = 0, den = 0;
        for (std::size_t P = 0; P < cells; ++P) {
            ComplexQ zeta{0, 0}, eta{0, 0};
            for (std::size_t j = 0; j < n2; ++j) {
                if (c[j].first == 0 && c[j].second == 0) continue;
                ComplexQ cj{unit * c[j].first, unit * c[j].second};
                zeta = zeta + cj * d[P][j];
                eta = eta + cj * t.b[P][j];
            }
            Rational sz = zeta.norm2(), se = eta.norm2();
            if (sz != 0) {
                int k = relative_bits(sz, n0, static_cast<int>(p), 2);
                num += pow_floor(sz, p, 2, k) * mlo[P];
            }
            if (se != 0) {
                int k = relative_bits(se, n0, static_cast<int>(p), 2);
                den += pow_ceil(se, p, 2, k) * mhi[P];
            }
        }
        if (den == 0) return;
        Rational r = num / den;
        if (!have || r < best) {
            best = r;
            have = true;
        }
    });
    if (!have) throw EmptyNet("every net vector vanishes on the section");
    return best;
}

double arithmetic_residual_float(const MapOracle& F, const Dictionary& dict, std::complex<double> z, std::size_t n2, int n1,
                                 unsigned p, int net_bits) {
    if (p < 1) throw ConfigError("exponent must be a positive integer");
    auto t = arithmetic_tables(F, dict, n2, n1);
    const std::size_t cells = t.mass.size();
    std::vector<std::vector<cd>> d(cells, std::vector<cd>(n2));
    std::vector<std::vector<double>> b(cells, std::vector<double>(n2));
    std::vector<double> w(cells);
    for (std::size_t P = 0; P < cells; ++P) {
        w[P] = to_double(t.mass[P]);
        for (std::size_t j = 0; j < n2; ++j) {
            b[P][j] = to_double(t.b[P][j]);
            d[P][j] = to_double(t.a[P][j]) - z * b[P][j];
        }
    }
    const double unit = std::ldexp(1.0, -net_bits);
    double best = std::numeric_limits<double>::infinity();
    const double pd = static_cast<double>(p);
    for_each_net_vector(n2, net_bits, [&](const std::vector<std::pair<long, long>>& c) {
        double num = 0, den = 0;
        for (std::size_t P = 0; P < cells; ++P) {
            cd zeta = 0, eta = 0;
            for (std::size_t j = 0; j < n2; ++j) {
                cd cj(unit * static_cast<double>(c[j].first), unit * static_cast<double>(c[j].second));
                zeta += cj * d[P][j];
                eta += cj * b[P][j];
            }
            num += std::pow(std::abs(zeta), pd) * w[P];
            den += std::pow(std::abs(eta), pd) * w[P];
        }
        if (den > 0) best = std::min(best, num / den);
    });
    if (std::isinf(best)) throw EmptyNet("every net vector vanishes on the section");
    return best;
}

namespace {

Rational qpow_int(const Rational& x, unsigned k) {
    Rational r = 1;
    for (unsigned i = 0; i < k; ++i) r *= x;
    return r;
}

}  // namespace

CompactSet arithmetic_gamma(const MapOracle& F, const Dictionary& dict, const Rational& eps, std::size_t n2, int n1, int n0,
                            unsigned p, const GridSpec& grid, TowerMode mode, int net_bits) {
    if (mode != TowerMode::ArithmeticSigma2 && mode != TowerMode::ArithmeticSigma3)
        throw ConfigError("arithmetic_gamma needs an arithmetic tower mode");
    if (n2 == 0) throw ConfigError("n2 must be positive");
    auto pts = make_grid(grid);
    CompactSet s;
    s.tower = to_string(mode);
    s.epsilon = to_double(eps);
    s.indices = {{"n2", static_cast<long>(n2)}, {"n1", n1}, {"n0", n0}};
    Rational lo, hi;
    if (mode == TowerMode::ArithmeticSigma2) {
        lo = eps - Rational(1, static_cast<long>(n2));
        hi = lo;
    } else {
        Rational gap = Rational(1, Integer(1) << (n2 + 2));
        lo = eps - gap;
        hi = eps + gap;
    }
    s.threshold = to_double(lo);
    if (lo <= 0) {
        s.warnings.push_back("threshold is not positive; set is empty");
        return s;
    }
    Rational lo_p = qpow_int(lo, p), hi_p = qpow_int(hi, p);
    std::vector<Rational> vals(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) { vals[i] = arithmetic_residual(F, dict, pts[i], n2, n1, n0, p, net_bits); });
    std::size_t undecided = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        bool keep = mode == TowerMode::ArithmeticSigma2 ? vals[i] < lo_p : vals[i] <= lo_p;
        if (keep) s.points.push_back(pts[i]);
        else if (mode == TowerMode::ArithmeticSigma3 && vals[i] < hi_p) ++undecided;
    }
    if (undecided) s.warnings.push_back(std::to_string(undecided) + " grid points in the undecided band");
    return s;
}

HausdorffTrace hausdorff_trace(const std::vector<CompactSet>& sets, const PointSet& reference) {
    HausdorffTrace t;
    for (const auto& s : sets) {
        bool e = s.empty() || reference.empty();
        t.empty.push_back(s.empty());
        t.values.push_back(e ? std::numeric_limits<double>::infinity() : hausdorff(s.as_points(), reference));
    }
    return t;
}

}  // namespace koop
