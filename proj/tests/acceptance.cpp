#include "koop/adversary_lab.hpp"
#include "koop/config.hpp"
#include "koop/dictionary.hpp"
#include "koop/errors.hpp"
#include "koop/map_library.hpp"
#include "koop/markov_expectation.hpp"
#include "koop/residual_engine.hpp"
#include "koop/spectral_reference.hpp"
#include "koop/step_function.hpp"
#include "koop/tower_runner.hpp"

#include <Eigen/SVD>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace koop;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Rational random_rational(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> num(-20, 20), den(1, 9);
    return Rational(num(rng), den(rng));
}

// ---------------------------------------------------------------- 1

Outcome identity_exactness() {
    auto t0 = std::chrono::steady_clock::now();
    auto tree = DyadicTree::build(SpaceDesc::interval(), 6);
    auto F = make_oracle(BuiltinMap::identity(), tree);
    HaarDictionary dict(tree, 2.0, 8);
    ResidualOptions opt;
    opt.mode = ResidualMode::RatioNetSearch;
    SectionResidual h(F, dict, 8, 6, opt);
    auto grid = make_grid(GridSpec{Rational(1, 5), Rational(2)});
    grid.resize(200);
    double worst = 0.0;
    for (const auto& zq : grid) {
        cd z = zq.to_complex();
        worst = std::max(worst, std::abs(h(z).value - std::abs(1.0 - z)));
    }
    double secs = seconds_since(t0);
    return {worst <= 1e-12 && secs <= 10.0, fmt("max error %.3g over 200 points, %.2f s", worst, secs)};
}

// ---------------------------------------------------------------- 2

Outcome rational_rotation_tower() {
    auto t0 = std::chrono::steady_clock::now();
    const double eps = 0.3, r = 1.0 / 64;
    double worst_margin = 1e300;
    std::ostringstream os;
    bool ok = true;
    for (Rational theta : {Rational(1, 2), Rational(1, 4)}) {
        PointSet ref = rotation_reference(theta, eps).sample(r);
        for (std::size_t n : {8u, 16u, 32u}) {
            int level = 0;
            while ((std::size_t(1) << level) < n) ++level;
            auto tree = DyadicTree::build(SpaceDesc::circle(), level + 2);
            auto F = make_oracle(BuiltinMap::rotation(theta), tree);
            HaarDictionary dict(tree, 2.0, n);
            ResidualOptions opt;
            opt.mode = ResidualMode::P2Oracle;
            auto s = gamma_base(F, dict, eps, n, level + 2, GridSpec{Rational(1, static_cast<long>(n)), Rational(2)}, opt);
            double bound = 2.0 / static_cast<double>(n) + r;
            double d = s.empty() ? INFINITY : hausdorff(s.as_points(), ref);
            worst_margin = std::min(worst_margin, bound - d);
            if (!(d <= bound)) ok = false;
            os << " " << to_string(theta) << "/n" << n << ":" << fmt("%.4f<=%.4f", d, bound);
        }
    }
    double secs = seconds_since(t0);
    return {ok && secs <= 120.0, "d_H" + os.str() + fmt(", %.1f s", secs)};
}

// ---------------------------------------------------------------- 3

Outcome spectral_distance_identity() {
    const int n1 = 14;
    auto tree = DyadicTree::build(SpaceDesc::circle(), n1);
    auto F = make_oracle(BuiltinMap::rotation(IrrationalAngle::golden()), tree);
    HaarDictionary dict(tree, 2.0, 32);
    ResidualOptions opt;
    opt.mode = ResidualMode::P2Oracle;
    std::vector<cd> zs;
    for (double rad : {0.6, 0.9, 1.0, 1.1, 1.4})
        for (int k = 0; k < 10; ++k) zs.push_back(std::polar(rad, 2.0 * M_PI * (k + 0.37) / 10.0));
    std::vector<std::size_t> ns{8, 16, 32};
    std::vector<std::vector<double>> vals(ns.size());
    std::size_t below = 0, nonmono = 0;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        SectionResidual h(F, dict, ns[i], n1, opt);
        for (cd z : zs) {
            auto res = h(z);
            vals[i].push_back(res.value);
            if (res.value < std::abs(std::abs(z) - 1.0) - res.error_bar) ++below;
        }
    }
    double gap8 = 0.0, gap32 = 0.0;
    for (std::size_t k = 0; k < zs.size(); ++k) {
        for (std::size_t i = 1; i < ns.size(); ++i)
            if (vals[i][k] > vals[i - 1][k] + 1e-12) ++nonmono;
        double exact = std::abs(std::abs(zs[k]) - 1.0);
        gap8 += vals[0][k] - exact;
        gap32 += vals[2][k] - exact;
    }
    double shrink = gap8 > 0 ? 1.0 - gap32 / gap8 : 1.0;
    bool ok = below == 0 && nonmono == 0 && shrink >= 0.25;
    return {ok, fmt("below-bound %.0f, monotonicity violations %.0f, mean gap shrink %.1f%% (n2=8 -> 32)",
                    static_cast<double>(below), static_cast<double>(nonmono), 100.0 * shrink)};
}

// ---------------------------------------------------------------- 4

Outcome hausdorff_gap() {
    const double r = 1.0 / 64;
    PointSet circle = ReferenceSpectrum::annulus(1.0, 1.0).sample(r);
    double worst = 0.0;
    for (long q : {2L, 3L, 4L, 5L})
        for (double eps : {0.0, 0.1, 0.5}) {
            double d = hausdorff(circle, rotation_reference(1, q, eps).sample(r));
            worst = std::max(worst, std::abs(d - gap_formula(q, eps)));
        }
    const double eps = 0.1;
    double two = hausdorff(ReferenceSpectrum::disk(1.0, eps).sample(r), ReferenceSpectrum::annulus(1.0 - eps, 1.0 + eps).sample(r));
    bool ok = worst <= 2 * r && std::abs(two - 2.0) <= 0.02;
    return {ok, fmt("max deviation from gap formula %.4f (limit %.4f), disk vs annulus %.4f", worst, 2 * r, two)};
}

// ---------------------------------------------------------------- 5

Outcome diophantine_bound() {
    auto t0 = std::chrono::steady_clock::now();
    auto s = diophantine_sweep(101);
    double secs = seconds_since(t0);
    return {s.violations == 0 && secs <= 60.0,
            fmt("%.0f cases, %.0f violations, worst ratio %.3f", static_cast<double>(s.cases), static_cast<double>(s.violations),
                s.worst_ratio) +
                fmt(", %.2f s", secs)};
}

// ---------------------------------------------------------------- 6

std::vector<DyadicTree> law_trees() {
    auto g3 = Grouping::pair(Grouping::single(0), Grouping::pair(Grouping::single(1), Grouping::single(2)));
    std::vector<DyadicTree> out;
    out.push_back(DyadicTree::build(SpaceDesc::interval(), 6));
    out.push_back(DyadicTree::build(SpaceDesc::circle(), 5));
    out.push_back(DyadicTree::build(SpaceDesc::atoms({Rational(1, 7), Rational(2, 7), Rational(4, 7)}, g3), 3));
    out.push_back(DyadicTree::build(
        SpaceDesc::disjoint_union({Rational(1, 3), Rational(1, 6), Rational(1, 2)},
                                  {SpaceDesc::interval(), SpaceDesc::atoms({Rational(2, 5), Rational(3, 5)}), SpaceDesc::circle()}),
        6));
    return out;
}

Outcome truncated_norm_laws() {
    std::mt19937_64 rng(11);
    auto trees = law_trees();
    std::size_t violations = 0, checks = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto& t = trees[static_cast<std::size_t>(trial) % trees.size()];
        int L = std::uniform_int_distribution<int>(0, t.depth())(rng);
        std::vector<Rational> c(t.level_size(L));
        for (auto& v : c) v = random_rational(rng);
        auto f = make_step(t, L, c);
        for (unsigned p : {1u, 2u, 3u}) {
            Rational exact = truncated_norm_pow(t, f, p);
            for (int n = L; n <= t.depth(); ++n) {
                ++checks;
                if (truncated_norm_pow(t, refine(t, f, n), p) != exact) ++violations;
            }
        }
        int a = std::uniform_int_distribution<int>(0, L)(rng), b = std::uniform_int_distribution<int>(0, L)(rng);
        auto Eb = conditional_expectation(t, b, f);
        auto lhs = a <= b ? conditional_expectation(t, a, Eb) : conditional_expectation(t, a, refine(t, Eb, a));
        auto rhs = conditional_expectation(t, std::min(a, b), f);
        ++checks;
        if (refine(t, lhs, L).coeffs != refine(t, rhs, L).coeffs) ++violations;
    }
    return {violations == 0, fmt("%.0f exact checks on 1000 random step functions, %.0f violations", static_cast<double>(checks),
                                 static_cast<double>(violations))};
}

// ---------------------------------------------------------------- 7

Rational norm_pow_exact(const std::vector<Rational>& m, const std::vector<Rational>& g, unsigned p) {
    Rational s = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        Rational a = abs(g[i]), ap = 1;
        for (unsigned k = 0; k < p; ++k) ap *= a;
        s += ap * m[i];
    }
    return s;
}

Outcome ef_projection_suite() {
    std::mt19937_64 rng(23);
    std::size_t violations = 0;
    for (int trial = 0; trial < 500; ++trial) {
        int N = std::uniform_int_distribution<int>(2, 10)(rng);
        std::vector<int> perm(static_cast<std::size_t>(N));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        // Masses constant along cycles, so the permutation preserves them.
        std::vector<long> w(static_cast<std::size_t>(N), 0);
        for (int s = 0; s < N; ++s) {
            if (w[static_cast<std::size_t>(s)]) continue;
            long c = std::uniform_int_distribution<long>(1, 5)(rng);
            for (int k = s; !w[static_cast<std::size_t>(k)]; k = perm[static_cast<std::size_t>(k)]) w[static_cast<std::size_t>(k)] = c;
        }
        long total = std::accumulate(w.begin(), w.end(), 0L);
        std::vector<Rational> m;
        for (long x : w) m.emplace_back(x, total);
        auto part = invariant_blocks_from_cycles(perm, m);
        if (!is_invariant(MarkovSpec::from_permutation(perm, m), part)) ++violations;

        std::vector<Rational> g(static_cast<std::size_t>(N));
        for (auto& v : g) v = random_rational(rng);
        auto Eg = expectation_EF<Rational>(part, m, g);
        if (expectation_EF<Rational>(part, m, Eg) != Eg) ++violations;
        for (unsigned p : {2u, 3u})
            if (norm_pow_exact(m, Eg, p) > norm_pow_exact(m, g, p)) ++violations;
        std::vector<double> gd, Egd;
        for (std::size_t i = 0; i < g.size(); ++i) {
            gd.push_back(to_double(g[i]));
            Egd.push_back(to_double(Eg[i]));
        }
        if (atom_norm_pow(m, Egd, 1.5) > atom_norm_pow(m, gd, 1.5) * (1 + 1e-12)) ++violations;
        if (expectation_EF<Rational>(part, m, compose_permutation(perm, g)) != compose_permutation(perm, Eg)) ++violations;
        std::vector<Rational> h(static_cast<std::size_t>(N));
        for (const auto& b : part.blocks) {
            Rational v = random_rational(rng);
            for (int a : b) h[static_cast<std::size_t>(a)] = v;
        }
        if (expectation_EF<Rational>(part, m, h) != h) ++violations;
    }
    return {violations == 0, fmt("500 random functions over random permutations, %.0f violations", static_cast<double>(violations))};
}

// ---------------------------------------------------------------- 8

std::vector<Eigen::MatrixXcd> random_compressions(std::mt19937_64& rng, std::size_t count) {
    std::vector<Eigen::MatrixXcd> out;
    auto circle = DyadicTree::build(SpaceDesc::circle(), 6);
    auto atoms = DyadicTree::build(SpaceDesc::uniform_atoms(8), 3);
    HaarDictionary hc(circle, 2.0, 4), ha(atoms, 2.0, 4);
    auto dc = build_duals(hc, 4), da = build_duals(ha, 4);
    for (std::size_t i = 0; out.size() < count; ++i) {
        if (i % 2 == 0) {
            long k = std::uniform_int_distribution<long>(0, 15)(rng);
            auto F = make_oracle(BuiltinMap::rotation(Rational(k, 16)), circle);
            out.push_back(compression_matrix(F, hc, dc, 4, 6));
        } else {
            std::vector<int> perm(8);
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            auto F = make_oracle(BuiltinMap::permutation(perm), atoms);
            out.push_back(compression_matrix(F, ha, da, 4, 3));
        }
    }
    return out;
}

Outcome p2_oracle_equivalence() {
    std::mt19937_64 rng(31);
    auto mats = random_compressions(rng, 100);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    std::size_t outside = 0;
    double final_gap = 0.0;
    for (const auto& M : mats) {
        cd z(u(rng), u(rng));
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M - z * Eigen::MatrixXcd::Identity(4, 4));
        double smin = svd.singularValues()(3);
        for (int bits = 6; bits <= 10; ++bits) {
            auto r = sigma_inf_net(M, z, 2.0, bits);
            if (std::abs(r.value - smin) > r.error_bar + 1e-12) ++outside;
            if (bits == 10) final_gap = std::max(final_gap, std::abs(r.value - smin));
        }
    }
    return {outside == 0 && final_gap <= 1e-2,
            fmt("%.0f of 500 net values outside their error bar, final gap %.2e", static_cast<double>(outside), final_gap)};
}

// ---------------------------------------------------------------- 9

Outcome theta_locking() {
    std::size_t pairs = 0, mismatches = 0;
    std::vector<std::string> covered;
    auto run = [&](const std::string& name, const AlgorithmContext& ctx, const MapOracle& F0, const MapOracle& alt) {
        auto rep = lock_experiment(name, base_algorithm(name, ctx), F0, alt, *ctx.tree);
        ++pairs;
        if (!rep.identical) ++mismatches;
        if (std::find(covered.begin(), covered.end(), name) == covered.end()) covered.push_back(name);
    };

    AlgorithmContext circ;
    circ.tree = std::make_shared<DyadicTree>(DyadicTree::build(SpaceDesc::circle(), 6));
    circ.dict = std::make_shared<HaarDictionary>(*circ.tree, 2.0, 4);
    circ.residual.mode = ResidualMode::P2Oracle;
    circ.epsilon = 0.75;
    circ.n2 = 4;
    circ.n1 = 4;
    circ.grid = GridSpec{Rational(1, 2), Rational(2)};
    auto F0 = make_oracle(BuiltinMap::rotation(Rational(1, 4)), *circ.tree);
    std::vector<MapOracle> alts{make_oracle(BuiltinMap::rotation(IrrationalAngle::golden()), *circ.tree),
                                make_oracle(BuiltinMap::rotation(Rational(3, 8)), *circ.tree),
                                make_oracle(BuiltinMap::identity(), *circ.tree)};
    for (const char* name : {"gamma_base", "gamma_stabilized", "sigma_ap_cascade", "arithmetic_sigma2", "arithmetic_sigma3", "residual_sweep"})
        for (const auto& alt : alts) run(name, circ, F0, alt);

    AlgorithmContext lip = circ;
    lip.tree = std::make_shared<DyadicTree>(DyadicTree::build(SpaceDesc::circle(), 18));
    lip.dict = std::make_shared<LipschitzDictionary>(*lip.tree, 2);
    lip.n2 = 2;
    lip.epsilon = 1.0;
    auto L0 = make_oracle(BuiltinMap::rotation(Rational(1, 4)), *lip.tree);
    for (auto alt : {make_oracle(BuiltinMap::rotation(IrrationalAngle::golden()), *lip.tree),
                     make_oracle(BuiltinMap::identity(), *lip.tree)})
        run("sigma1_modulus", lip, L0, alt);

    AlgorithmContext mk = circ;
    mk.tree = std::make_shared<DyadicTree>(DyadicTree::build(SpaceDesc::uniform_atoms(4, true), 2));
    mk.dict = std::make_shared<HaarDictionary>(*mk.tree, 2.0, 4);
    mk.epsilon = 0.5;
    auto M0 = make_oracle(BuiltinMap::cycle(4), *mk.tree);
    for (auto alt : {make_oracle(BuiltinMap::permutation({1, 0, 3, 2}), *mk.tree), make_oracle(BuiltinMap::identity(), *mk.tree)})
        run("markov_tower", mk, M0, alt);

    bool all = covered.size() == base_algorithm_names().size();
    return {mismatches == 0 && pairs >= 20 && all,
            fmt("%.0f (algorithm, alt) pairs over %.0f algorithms, %.0f mismatches", static_cast<double>(pairs),
                static_cast<double>(covered.size()), static_cast<double>(mismatches))};
}

// ---------------------------------------------------------------- 10

Outcome two_threshold_dichotomy() {
    auto t0 = std::chrono::steady_clock::now();
    using B = BlockSpec;
    const B golden{BlockKind::GoldenRotation, 0};
    std::size_t wrong = 0, steps = 0;
    auto cycles = dichotomy_experiment({B{BlockKind::Cycle, 2}, B{BlockKind::Cycle, 3}, B{BlockKind::Cycle, 5}});
    for (const auto& s : cycles.steps) {
        ++steps;
        double need = 4.0 / (static_cast<double>(s.probe.prime) * 5.0);
        if (s.probe.prime <= 5 || s.probe.verdict != Verdict::Yes || s.probe.beta < need) ++wrong;
    }
    for (auto blocks : {std::vector<B>{golden}, std::vector<B>{B{BlockKind::Cycle, 2}, golden},
                        std::vector<B>{B{BlockKind::Cycle, 3}, B{BlockKind::Cycle, 5}, golden}}) {
        auto rep = dichotomy_experiment(blocks);
        for (auto v : rep.verdicts()) {
            ++steps;
            if (v != Verdict::No) ++wrong;
        }
    }
    double secs = seconds_since(t0);
    return {wrong == 0 && secs <= 120.0,
            fmt("%.0f probe steps, %.0f misclassifications, %.1f s", static_cast<double>(steps), static_cast<double>(wrong), secs)};
}

// ---------------------------------------------------------------- 11

Outcome arithmetic_monotonicity() {
    std::mt19937_64 rng(47);
    auto circle = std::make_shared<DyadicTree>(DyadicTree::build(SpaceDesc::circle(), 4));
    auto interval = std::make_shared<DyadicTree>(DyadicTree::build(SpaceDesc::interval(), 4));
    auto atoms = std::make_shared<DyadicTree>(DyadicTree::build(SpaceDesc::uniform_atoms(4), 2));
    std::size_t nonmono = 0, disagree = 0;
    double worst = 0.0;
    std::uniform_int_distribution<int> zi(-12, 12);
    for (int trial = 0; trial < 100; ++trial) {
        std::shared_ptr<DyadicTree> tree;
        BuiltinMap map;
        switch (trial % 4) {
            case 0:
                tree = circle;
                map = BuiltinMap::rotation(Rational(std::uniform_int_distribution<int>(0, 15)(rng), 16));
                break;
            case 1:
                tree = interval;
                map = BuiltinMap::identity();
                break;
            case 2:
                tree = atoms;
                map = BuiltinMap::cycle(4);
                break;
            default: {
                tree = atoms;
                std::vector<int> perm{0, 1, 2, 3};
                std::shuffle(perm.begin(), perm.end(), rng);
                map = BuiltinMap::permutation(perm);
            }
        }
        auto F = make_oracle(map, *tree);
        HaarDictionary dict(*tree, 2.0, 2);
        unsigned p = trial % 3 == 0 ? 3u : 2u;
        ComplexQ z{Rational(zi(rng), 8), Rational(zi(rng), 8)};
        double f = arithmetic_residual_float(F, dict, z.to_complex(), 2, tree->depth(), p);
        Rational prev = -1;
        for (int n0 : {4, 6, 8, 10, 12}) {
            Rational v = arithmetic_residual(F, dict, z, 2, tree->depth(), n0, p);
            if (v < prev) ++nonmono;
            prev = v;
            double err = std::abs(to_double(v) - f);
            double tol = 2.0 * std::ldexp(1.0, -n0) + 1e-12;
            worst = std::max(worst, err / tol);
            if (err > tol) ++disagree;
        }
    }
    return {nonmono == 0 && disagree == 0,
            fmt("%.0f monotonicity violations, %.0f float disagreements, worst error/tolerance %.3f", static_cast<double>(nonmono),
                static_cast<double>(disagree), worst)};
}

// ---------------------------------------------------------------- 12

Outcome quadrature_bound() {
    const std::size_t n = 8;
    const double R = 1.0;
    const GridSpec grid{Rational(1, 4), Rational(1)};
    auto pts = make_grid(grid);
    double worst = 0.0;
    int m_seen = 0;
    for (int which = 0; which < 3; ++which) {
        BuiltinMap map = which == 0 ? BuiltinMap::identity()
                                    : which == 1 ? BuiltinMap::rotation(Rational(1, 4)) : BuiltinMap::rotation(IrrationalAngle::golden());
        auto probe_tree = DyadicTree::build(SpaceDesc::circle(), 12);
        LipschitzDictionary probe_dict(probe_tree, 3);
        auto lv = sigma1_quadrature_level(make_oracle(map, probe_tree), probe_dict, n, R, 2.0);
        m_seen = std::max(m_seen, lv.m);
        auto tree = DyadicTree::build(SpaceDesc::circle(), lv.m + 2);
        auto F = make_oracle(map, tree);
        LipschitzDictionary dict(tree, 3);
        ResidualOptions opt;
        opt.mode = ResidualMode::P2Oracle;
        SectionResidual base(F, dict, n, lv.m, opt);
        std::vector<double> b;
        for (const auto& z : pts) b.push_back(base(z.to_complex()).value);
        for (int k = 1; k <= 2; ++k) {
            SectionResidual fine(F, dict, n, lv.m + k, opt);
            for (std::size_t i = 0; i < pts.size(); ++i) worst = std::max(worst, std::abs(fine(pts[i].to_complex()).value - b[i]));
        }
    }
    double target = 1.0 / (4.0 * static_cast<double>(n));
    return {worst <= target, fmt("quadrature level m=%.0f, max change %.3e at m+1, m+2 (bound %.4f)", m_seen, worst, target)};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    std::vector<Criterion> criteria{
        {"identity-map exactness", identity_exactness},
        {"rational rotation tower", rational_rotation_tower},
        {"spectral distance identity", spectral_distance_identity},
        {"hausdorff gap", hausdorff_gap},
        {"diophantine bound", diophantine_bound},
        {"truncated-norm laws", truncated_norm_laws},
        {"E_F projection suite", ef_projection_suite},
        {"p=2 oracle equivalence", p2_oracle_equivalence},
        {"transcript locking", theta_locking},
        {"two-threshold dichotomy", two_threshold_dichotomy},
        {"arithmetic monotonicity", arithmetic_monotonicity},
        {"quadrature bound", quadrature_bound},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s [%zu] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
