#include "koop/errors.hpp"
#include "koop/map_library.hpp"

#include <doctest.h>

#include <cmath>

using namespace koop;

TEST_CASE("evaluate examples") {
    auto circle = DyadicTree::build(SpaceDesc::circle(), 4);
    auto rot = make_oracle(BuiltinMap::rotation(Rational(1, 4)), circle);
    CHECK(rot.evaluate(Point::at(0.9)).x == doctest::Approx(0.15).epsilon(1e-15));
    auto id = make_oracle(BuiltinMap::identity(), circle);
    CHECK(id.evaluate(Point::at(0.3)).x == 0.3);
    auto atoms = DyadicTree::build(SpaceDesc::atoms({Rational(1, 3), Rational(1, 3), Rational(1, 3)}, Grouping::balanced(0, 3)), 2);
    auto cyc = make_oracle(BuiltinMap::cycle(3), atoms);
    CHECK(cyc.evaluate(Point::atom_at(2)).atom == 0);
    CHECK_THROWS_AS(rot.evaluate(Point::at(1.5)), PointOutsideSpace);
}

TEST_CASE("query counter increments once per call") {
    auto t = DyadicTree::build(SpaceDesc::interval(), 2);
    auto F = make_oracle(BuiltinMap::identity(), t);
    auto before = F.query_count();
    for (int i = 0; i < 7; ++i) F.evaluate(Point::at(0.1 * i));
    CHECK(F.query_count() == before + 7);
}

TEST_CASE("koopman norm bound") {
    auto t = DyadicTree::build(SpaceDesc::interval(), 2);
    auto c = DyadicTree::build(SpaceDesc::circle(), 2);
    CHECK(koopman_norm_bound(make_oracle(BuiltinMap::rotation(Rational(1, 3)), c), 3.0) == 1.0);
    CHECK(koopman_norm_bound(make_oracle(BuiltinMap::identity(), t), 1.7) == 1.0);
    CHECK(koopman_norm_bound(make_oracle(BuiltinMap::halving(), t), 2.0) == doctest::Approx(std::sqrt(2.0)));
    MapOracle bare("bare", [](const Point& x, int) { return x; }, MapFlags{}, [](const Point&) {});
    CHECK_THROWS_AS(koopman_norm_bound(bare, 2.0), UnknownDensity);
}

TEST_CASE("measure preservation checks") {
    auto t = DyadicTree::build(SpaceDesc::interval(), 3);
    auto r = check_measure_preservation(make_oracle(BuiltinMap::rotation(Rational(1, 4)), t), t, 3, 4096);
    CHECK(r.max_deviation <= 0.05);
    CHECK(r.max_deviation <= r.tolerance);
    auto id = check_measure_preservation(make_oracle(BuiltinMap::identity(), t), t, 2, 1024);
    CHECK(id.max_deviation == 0.0);
    auto h = check_measure_preservation(make_oracle(BuiltinMap::halving(), t), t, 1, 4096);
    CHECK(h.deviations[0] == doctest::Approx(0.5));
}

TEST_CASE("golden approximants") {
    auto g = IrrationalAngle::golden();
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int k = 0; k <= 50; ++k) CHECK(std::abs(to_double(g.approximant(k)) - golden) <= std::ldexp(1.0, -k) + 1e-16);
    auto c = DyadicTree::build(SpaceDesc::circle(), 2);
    auto F = make_oracle(BuiltinMap::rotation(g), c);
    for (int k = 2; k < 40; k += 5) {
        double a = F.evaluate(Point::at(0.3), k).x, b = F.evaluate(Point::at(0.3), k + 7).x;
        double d = std::abs(a - b);
        d = std::min(d, 1.0 - d);
        CHECK(d <= std::ldexp(1.0, -k) + std::ldexp(1.0, -k - 7) + 1e-15);
    }
}

TEST_CASE("block union acts per component") {
    auto sp = SpaceDesc::disjoint_union({Rational(1, 2), Rational(1, 2)}, {SpaceDesc::uniform_atoms(2), SpaceDesc::circle()});
    auto t = DyadicTree::build(sp, 3);
    auto F = make_oracle(BuiltinMap::block_union({BuiltinMap::cycle(2), BuiltinMap::rotation(Rational(1, 2))}), t);
    CHECK(F.evaluate(Point::atom_at(1, 0)).atom == 0);
    CHECK(F.evaluate(Point::at(0.25, 1)).x == 0.75);
    CHECK(F.flags().measure_preserving);
}
