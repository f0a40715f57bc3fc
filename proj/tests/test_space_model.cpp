#include "koop/errors.hpp"
#include "koop/space_model.hpp"

#include <doctest.h>

using namespace koop;

TEST_CASE("interval root and level 3") {
    auto t = DyadicTree::build(SpaceDesc::interval(), 3);
    CHECK(t.level_size(0) == 1);
    CHECK(t.atom_mass({0, 0}) == 1);
    REQUIRE(t.level_size(3) == 8);
    for (std::size_t k = 0; k < 8; ++k) {
        auto a = t.atom(3, k);
        CHECK(a.mass == Rational(1, 8));
        CHECK(a.lo == doctest::Approx(static_cast<double>(k) / 8));
        CHECK(t.contains(a, a.rep));
        CHECK(a.rep.x == static_cast<double>(k) / 8);   // left endpoint
    }
    CHECK(t.mesh(2) == 0.25);
}

TEST_CASE("masses sum to one and children add up") {
    auto sp = SpaceDesc::disjoint_union({Rational(1, 3), Rational(2, 3)},
                                        {SpaceDesc::circle(), SpaceDesc::atoms({Rational(1, 3), Rational(2, 3)})});
    auto t = DyadicTree::build(sp, 5);
    CHECK(t.atom_mass({1, 0}) == Rational(1, 3));
    CHECK(t.atom_mass({1, 1}) == Rational(2, 3));
    for (int m = 0; m <= 5; ++m) {
        Rational s = 0;
        for (std::size_t i = 0; i < t.level_size(m); ++i) s += t.atom_mass({m, i});
        CHECK(s == 1);
        if (m < 5)
            for (std::size_t i = 0; i < t.level_size(m); ++i) {
                Rational c = 0;
                for (auto k : t.children(m, i)) c += t.atom_mass({m + 1, k});
                CHECK(c == t.atom_mass({m, i}));
            }
    }
    for (int m = 0; m < 5; ++m) CHECK(t.mesh(m + 1) <= t.mesh(m));
}

TEST_CASE("four equal atoms group pairwise") {
    auto t = DyadicTree::build(SpaceDesc::uniform_atoms(4), 2);
    REQUIRE(t.level_size(1) == 2);
    CHECK(t.atom(1, 0).atoms == std::vector<int>{0, 1});
    CHECK(t.atom(1, 1).atoms == std::vector<int>{2, 3});
    CHECK(t.level_size(2) == 4);
    CHECK(t.mesh(2) == 0.0);
}

TEST_CASE("circle half arc has diameter one half") {
    auto t = DyadicTree::build(SpaceDesc::circle(), 3);
    CHECK(t.mesh(1) == doctest::Approx(0.5));
    CHECK(t.mesh(3) == doctest::Approx(0.125));
}

TEST_CASE("error paths") {
    CHECK_THROWS_AS(DyadicTree::build(SpaceDesc::atoms({Rational(1, 3), Rational(1, 3), Rational(1, 3)}), 2),
                    NonDyadicAtomCount);
    CHECK_THROWS_AS(DyadicTree::build(SpaceDesc::interval(), 40, 1 << 20), DepthOverflow);
    auto t = DyadicTree::build(SpaceDesc::interval(), 2);
    CHECK_THROWS_AS(t.mesh(3), LevelOutOfRange);
    CHECK_THROWS_AS(t.atom_mass({2, 9}), UnknownAtom);
}

TEST_CASE("explicit grouping for three atoms") {
    auto g = Grouping::pair(Grouping::single(0), Grouping::pair(Grouping::single(1), Grouping::single(2)));
    auto t = DyadicTree::build(SpaceDesc::atoms({Rational(1, 2), Rational(1, 4), Rational(1, 4)}, g), 2);
    CHECK(t.level_size(1) == 2);
    CHECK(t.level_size(2) == 3);   // atom 0 is carried unchanged
    CHECK(t.terminal_atoms(1) == std::vector<std::size_t>{0});
    CHECK(t.atom_mass({1, 1}) == Rational(1, 2));
}

TEST_CASE("representatives lie in their atoms") {
    auto sp = SpaceDesc::disjoint_union({Rational(1, 2), Rational(1, 2)}, {SpaceDesc::interval(), SpaceDesc::uniform_atoms(2)});
    auto t = DyadicTree::build(sp, 4);
    for (int m = 0; m <= 4; ++m)
        for (std::size_t i = 0; i < t.level_size(m); ++i) {
            auto a = t.atom(m, i);
            CHECK(t.contains(a, a.rep));
            CHECK(t.locate(m, a.rep) == i);
        }
}
