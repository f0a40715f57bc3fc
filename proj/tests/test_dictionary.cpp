#include "koop/dictionary.hpp"
#include "koop/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace koop;

namespace {

// Independent oracle: inner product of two dictionary elements by quadrature at a fine level.
double inner(const Dictionary& d, std::size_t i, std::size_t j, int level) {
    const auto& t = d.tree();
    double s = 0.0;
    for (std::size_t c = 0; c < t.level_size(level); ++c) {
        auto x = t.rep(level, c);
        s += d.evaluate(i, x) * d.evaluate(j, x) * t.atom_mass_d(level, c);
    }
    return s;
}

}  // namespace

TEST_CASE("haar normalizer on an unequal split") {
    auto g = Grouping::pair(Grouping::single(0), Grouping::single(1));
    auto t = DyadicTree::build(SpaceDesc::atoms({Rational(1, 3), Rational(2, 3)}, g), 1);
    HaarDictionary h(t, 2.0, 2);
    auto e = h.element(1);
    CHECK(e.norm == doctest::Approx(1.0 / std::sqrt(4.5)));
    CHECK(inner(h, 1, 1, 1) == doctest::Approx(1.0));
    CHECK(inner(h, 0, 1, 1) == doctest::Approx(0.0));
    CHECK(e.value_pos * to_double(e.mass_pos) + e.value_neg * to_double(e.mass_neg) == doctest::Approx(0.0));
}

TEST_CASE("haar system on the interval is orthonormal for p=2") {
    auto t = DyadicTree::build(SpaceDesc::interval(), 4);
    HaarDictionary h(t, 2.0, 16);
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < 16; ++j) CHECK(inner(h, i, j, 4) == doctest::Approx(i == j ? 1.0 : 0.0));
    CHECK(h.step_level(1) == 0);
    CHECK(h.step_level(2) == 1);
    CHECK(h.step_level(5) == 3);
    CHECK(h.cutoff(2) == 4);
}

TEST_CASE("haar p-norm is one for every element") {
    auto sp = SpaceDesc::disjoint_union({Rational(1, 4), Rational(3, 4)}, {SpaceDesc::interval(), SpaceDesc::circle()});
    auto t = DyadicTree::build(sp, 4);
    for (double p : {1.0, 1.5, 3.0}) {
        HaarDictionary h(t, p, t.level_size(4));
        for (std::size_t j = 1; j < h.size(); ++j) {
            auto st = h.step(j, 4);
            CHECK(truncated_norm(t, StepFunction{4, st}, p) == doctest::Approx(1.0));
        }
    }
}

TEST_CASE("haar errors") {
    auto t = DyadicTree::build(SpaceDesc::interval(), 2);
    CHECK_THROWS_AS(HaarDictionary(t, 2.0, 5), CountExceedsTree);
    CHECK_THROWS_AS(HaarDictionary(t, 0.5, 2), ConfigError);
    HaarDictionary h(t, 2.0, 4);
    CHECK_THROWS_AS(h.element(4), IndexOutOfRange);
}

TEST_CASE("exact duals pair to the identity") {
    auto g = Grouping::pair(Grouping::single(0), Grouping::pair(Grouping::single(1), Grouping::single(2)));
    auto sp = SpaceDesc::disjoint_union({Rational(1, 3), Rational(2, 3)},
                                        {SpaceDesc::interval(), SpaceDesc::atoms({Rational(1, 5), Rational(1, 5), Rational(3, 5)}, g)});
    auto t = DyadicTree::build(sp, 4);
    HaarDictionary h(t, 3.0, t.level_size(3));
    auto d = build_duals_exact(h, h.size());
    auto G = dual_gram(t, d);
    for (std::size_t i = 0; i < G.size(); ++i)
        for (std::size_t j = 0; j < G.size(); ++j) CHECK(G[i][j] == (i == j ? 1 : 0));
}

TEST_CASE("floating duals are biorthogonal") {
    auto t = DyadicTree::build(SpaceDesc::circle(), 3);
    for (double p : {2.0, 4.0}) {
        HaarDictionary h(t, p, 8);
        auto duals = build_duals(h, 8);
        std::vector<SparseValue> scratch;
        std::vector<double> dv;
        Eigen::MatrixXd pair = Eigen::MatrixXd::Zero(8, 8);
        for (std::size_t c = 0; c < 8; ++c) {
            auto x = t.rep(3, c);
            dual_values_at(h, duals, x, scratch, dv);
            for (std::size_t i = 0; i < 8; ++i)
                for (std::size_t j = 0; j < 8; ++j) pair(i, j) += dv[i] * h.evaluate(j, x) * t.atom_mass_d(3, c);
        }
        CHECK((pair - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-12);
    }
    IndicatorDictionary ind(t, 2);
    auto di = build_duals(ind, 4);
    CHECK(di.coeff.coeff(1, 1) == doctest::Approx(4.0));
    auto lt = DyadicTree::build(SpaceDesc::interval(), 3);
    LipschitzDictionary lip(lt, 2);
    CHECK_THROWS_AS(build_duals(lip, 2), DualsMissing);
}

TEST_CASE("conditional expectation of the identity function") {
    auto t = DyadicTree::build(SpaceDesc::interval(), 3);
    std::vector<Rational> mids;
    for (int k = 0; k < 8; ++k) mids.push_back(Rational(2 * k + 1, 16));
    auto e = conditional_expectation(t, 2, make_step(t, 3, mids));
    REQUIRE(e.coeffs.size() == 4);
    CHECK(e.coeffs[0] == Rational(1, 8));
    CHECK(e.coeffs[1] == Rational(3, 8));
    CHECK(e.coeffs[2] == Rational(5, 8));
    CHECK(e.coeffs[3] == Rational(7, 8));
    auto s = conditional_expectation_sampled(
        DyadicTree::build(SpaceDesc::interval(), 12), 2, [](const Point& x) { return x.x; }, 12);
    CHECK(s.coeffs[2] == doctest::Approx(0.625).epsilon(1e-3));
    CHECK_THROWS_AS(make_step(t, 2, std::vector<double>(3)), ShapeMismatch);
}

TEST_CASE("conditional expectation is a contraction and idempotent") {
    auto sp = SpaceDesc::disjoint_union({Rational(1, 2), Rational(1, 2)}, {SpaceDesc::uniform_atoms(4), SpaceDesc::circle()});
    auto t = DyadicTree::build(sp, 5);
    std::vector<double> f(t.level_size(5));
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::sin(3.0 * static_cast<double>(i)) + 0.1 * static_cast<double>(i % 3);
    StepFunction g{5, f};
    for (int m = 0; m <= 5; ++m) {
        auto e = conditional_expectation(t, m, g);
        for (double p : {1.0, 2.0, 3.5}) CHECK(truncated_norm(t, e, p) <= truncated_norm(t, g, p) + 1e-12);
        auto ee = conditional_expectation(t, m, e);
        for (std::size_t i = 0; i < e.coeffs.size(); ++i) CHECK(ee.coeffs[i] == doctest::Approx(e.coeffs[i]));
    }
}

TEST_CASE("lipschitz weights form a partition of unity") {
    for (auto sp : {SpaceDesc::interval(), SpaceDesc::circle()}) {
        auto t = DyadicTree::build(sp, 4);
        for (int pstar : {1, 2}) {
            LipschitzDictionary lip(t, 3, Rational(1, 2), pstar);
            for (int k = 0; k < 97; ++k) {
                Rational x(k, 97);
                Rational s = 0;
                for (std::size_t j = 0; j < lip.size(); ++j) {
                    Rational v = lip.value_exact(j, x);
                    CHECK(v >= 0);
                    s += v;
                }
                CHECK(s == 1);
            }
            CHECK(lip.multiplicity() >= 1);
            // Numerical Lipschitz quotients stay below the declared bound.
            double worst = 0.0;
            for (std::size_t j = 0; j < lip.size(); ++j)
                for (int k = 0; k < 400; ++k) {
                    double a = k / 400.0, b = a + 1e-4;
                    if (b >= 1.0) continue;
                    worst = std::max(worst, std::abs(lip.value(j, b) - lip.value(j, a)) / 1e-4);
                }
            CHECK(worst <= lip.lipschitz_bound() * (1 + 1e-6));
        }
    }
}

TEST_CASE("theta dictionary drops one weight per level") {
    auto t = DyadicTree::build(SpaceDesc::interval(), 4);
    ThetaDictionary th(t, 3);
    std::size_t expect = 1;
    for (const auto& l : th.levels()) expect += l.size() - 1;
    CHECK(th.size() == expect);
    CHECK(th.evaluate(0, Point::at(0.3)) == 1.0);
    CHECK(th.lipschitz_bound(1) == 0.0);
    CHECK(th.lipschitz_bound(th.size()) >= th.levels().back().lipschitz_bound() - 1e-12);
}

TEST_CASE("lipschitz dictionary rejects atom spaces") {
    auto t = DyadicTree::build(SpaceDesc::uniform_atoms(4), 2);
    CHECK_THROWS_AS(LipschitzDictionary(t, 1), UnsupportedSpace);
}

TEST_CASE("csv dump lists elements") {
    auto t = DyadicTree::build(SpaceDesc::interval(), 2);
    HaarDictionary h(t, 2.0, 4);
    std::ostringstream os;
    h.dump_csv(os, 4);
    CHECK(os.str().find("\n") != std::string::npos);
}
