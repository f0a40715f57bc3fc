#include "koop/dictionary.hpp"
#include "koop/errors.hpp"
#include "koop/map_library.hpp"
#include "koop/parallel.hpp"
#include "koop/residual_engine.hpp"

#include <doctest.h>

#include <cmath>

using namespace koop;

TEST_CASE("two-cycle residual at i") {
    auto t = DyadicTree::build(SpaceDesc::uniform_atoms(2), 1);
    auto F = make_oracle(BuiltinMap::cycle(2), t);
    IndicatorDictionary d(t, 1);
    ResidualOptions o;
    o.mode = ResidualMode::P2Oracle;
    SectionResidual h(F, d, 2, 1, o);
    CHECK(h(cd(0, 1)).value == doctest::Approx(std::sqrt(2.0)));
    CHECK(h(cd(1, 0)).value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(h(cd(-1, 0)).value == doctest::Approx(0.0).epsilon(1e-12));
    // Independent oracle: distance from z to the eigenvalues {1,-1} of a normal operator.
    for (double re = -1.5; re <= 1.5; re += 0.5)
        for (double im = -1.0; im <= 1.0; im += 0.5) {
            cd z(re, im);
            CHECK(h(z).value == doctest::Approx(std::min(std::abs(z - 1.0), std::abs(z + 1.0))));
        }
}

TEST_CASE("compression matrices") {
    auto c = DyadicTree::build(SpaceDesc::circle(), 3);
    HaarDictionary h(c, 2.0, 2);
    auto F = make_oracle(BuiltinMap::rotation(Rational(1, 2)), c);
    auto M = compression_matrix(F, h, build_duals(h, 2), 2, 3);
    CHECK(std::abs(M(0, 0) - 1.0) < 1e-12);
    CHECK(std::abs(M(1, 1) + 1.0) < 1e-12);
    CHECK(std::abs(M(0, 1)) < 1e-12);
    CHECK(std::abs(M(1, 0)) < 1e-12);

    auto a = DyadicTree::build(SpaceDesc::uniform_atoms(2), 1);
    IndicatorDictionary ind(a, 1);
    auto S = compression_matrix(make_oracle(BuiltinMap::cycle(2), a), ind, build_duals(ind, 2), 2, 1);
    CHECK(std::abs(S(0, 1) - 1.0) < 1e-12);
    CHECK(std::abs(S(1, 0) - 1.0) < 1e-12);
    CHECK(std::abs(S(0, 0)) < 1e-12);
}

TEST_CASE("sigma_inf of small matrices") {
    Eigen::MatrixXcd D(2, 2);
    D << 2, 0, 0, 3;
    CHECK(sigma_inf_matrix(D, 0.0, 2.0, 6).value == doctest::Approx(2.0));
    Eigen::MatrixXcd S(2, 2);
    S << 0, 1, 1, 0;
    CHECK(sigma_inf_matrix(S, 0.5, 2.0, 6).value == doctest::Approx(0.5));
    // p != 2 uses the net; for a diagonal matrix the best vector is a coordinate vector.
    auto r = sigma_inf_matrix(D, 0.0, 3.0, 4);
    CHECK(r.value == doctest::Approx(2.0).epsilon(1e-9));
    Eigen::MatrixXcd N(2, 2);
    N << 0.1, 0, 0, 0;
    CHECK(perturbation_bound(N, Eigen::MatrixXcd::Zero(2, 2), 2.0) == doctest::Approx(0.1));
    CHECK(perturbation_bound(N, Eigen::MatrixXcd::Zero(2, 2), 1.0) == doctest::Approx(0.1));
    CHECK(induced_norm_bound(D, 1.0) == doctest::Approx(3.0));
}

TEST_CASE("p2_min_ratio handles a singular denominator") {
    Eigen::MatrixXcd H(2, 2), G(2, 2);
    H << 4, 0, 0, 1;
    G << 1, 0, 0, 0;
    CHECK(p2_min_ratio(H, G).value == doctest::Approx(std::sqrt(4.0 - 0.0)));
    Eigen::MatrixXcd H2(2, 2), G2(2, 2);
    H2 << 9, 0, 0, 4;
    G2 << 1, 0, 0, 1;
    auto s = p2_min_ratio(H2, G2);
    CHECK(s.value == doctest::Approx(2.0));
    CHECK(std::abs(s.vec(0)) < 1e-12);
}

TEST_CASE("dense and sparse p=2 paths agree") {
    auto t = DyadicTree::build(SpaceDesc::circle(), 11);
    auto F = make_oracle(BuiltinMap::rotation(Rational(1, 8)), t);
    IndicatorDictionary d(t, 10);
    auto g = accumulate_gram(F, d, d.size(), 11);
    P2Residual big(g);
    CHECK(big.sparse_path());
    P2Residual small(g.leading(512));
    CHECK_FALSE(small.sparse_path());
    // Rotation by 1/8 permutes level-10 arcs; the section residual vanishes at 8th roots of unity.
    for (int k = 0; k < 8; ++k) CHECK(big.value(std::polar(1.0, 2 * M_PI * k / 8.0)) < 1e-6);
    CHECK(big.value(cd(0.0, 0.0)) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("net search agrees with the exact p=2 residual from above") {
    auto t = DyadicTree::build(SpaceDesc::interval(), 5);
    auto F = make_oracle(BuiltinMap::identity(), t);
    HaarDictionary d(t, 2.0, 4);
    ResidualOptions exact;
    exact.mode = ResidualMode::P2Oracle;
    ResidualOptions net;
    net.mode = ResidualMode::RatioNetSearch;
    net.net.bits = 4;
    SectionResidual he(F, d, 4, 5, exact), hn(F, d, 4, 5, net);
    for (cd z : {cd(0, 0), cd(0.5, 0.5), cd(2, 0), cd(1, 0)}) {
        CHECK(he(z).value == doctest::Approx(std::abs(z - 1.0)).epsilon(1e-9));
        CHECK(hn(z).value >= he(z).value - 1e-9);
        CHECK(hn(z).value == doctest::Approx(he(z).value).epsilon(1e-6));
    }
}

TEST_CASE("residual is deterministic across thread counts") {
    auto t = DyadicTree::build(SpaceDesc::circle(), 6);
    auto F = make_oracle(BuiltinMap::rotation(IrrationalAngle::golden()), t);
    HaarDictionary d(t, 3.0, 8);
    ResidualOptions o;
    o.p = 3.0;
    o.net.bits = 3;
    SectionResidual h(F, d, 8, 6, o);
    double a = h(cd(0.3, 0.2)).value;
    set_default_threads(4);
    SectionResidual h4(F, d, 8, 6, o);
    double b = h4(cd(0.3, 0.2)).value;
    set_default_threads(1);
    CHECK(a == b);
}

TEST_CASE("residual mode names round trip") {
    for (auto m : {ResidualMode::NetSearch, ResidualMode::RatioNetSearch, ResidualMode::MatrixSigmaInf, ResidualMode::P2Oracle})
        CHECK(parse_residual_mode(to_string(m)) == m);
    CHECK_THROWS_AS(parse_residual_mode("nope"), ConfigError);
}

TEST_CASE("halving residual on the interval stays nonnegative and finite") {
    auto t = DyadicTree::build(SpaceDesc::interval(), 6);
    auto F = make_oracle(BuiltinMap::halving(), t);
    HaarDictionary d(t, 2.0, 8);
    ResidualOptions o;
    o.mode = ResidualMode::P2Oracle;
    SectionResidual h(F, d, 8, 6, o);
    for (double re : {-1.0, 0.0, 0.5, 1.0}) {
        double v = h(cd(re, 0.0)).value;
        CHECK(v >= 0.0);
        CHECK(std::isfinite(v));
    }
}
