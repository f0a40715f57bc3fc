#include "koop/errors.hpp"
#include "koop/spectral_reference.hpp"

#include <doctest.h>

#include <cmath>

using namespace koop;

TEST_CASE("gap formula") {
    CHECK(gap_formula(2, 0.1) == doctest::Approx(1.31421).epsilon(1e-5));
    CHECK(gap_formula(2, 1.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(gap_formula(1, 0.1), ConfigError);
}

TEST_CASE("diophantine margin") {
    auto c = diophantine_margin(5, 2);
    CHECK(c.bound == doctest::Approx(0.4));
    // Brute force: q = 1 gives 2 sin(pi/5), q = 2 gives 2 sin(pi/10).
    CHECK(c.true_min == doctest::Approx(2.0 * std::sin(M_PI / 10.0)));
    CHECK(c.true_min >= c.bound);
    auto c1 = diophantine_margin(5, 1);
    CHECK(c1.true_min == doctest::Approx(1.17557).epsilon(1e-5));
    CHECK_THROWS_AS(diophantine_margin(6, 2), NotPrime);
    CHECK_THROWS_AS(diophantine_margin(5, 5), ConfigError);
}

TEST_CASE("diophantine sweep up to 101 has no violations") {
    auto s = diophantine_sweep(101);
    CHECK(s.violations == 0);
    CHECK(s.worst_ratio >= 1.0);
    CHECK(s.cases > 1000);
}

TEST_CASE("primes") {
    CHECK(nth_prime(1) == 2);
    CHECK(nth_prime(4) == 7);
    CHECK(nth_prime(7) == 17);
    CHECK_FALSE(is_prime(1));
    CHECK(is_prime(101));
}

TEST_CASE("rotation references") {
    bool reduced = false;
    auto r = rotation_reference(2, 4, 0.0, &reduced);
    CHECK(reduced);
    REQUIRE(r.points.size() == 2);
    CHECK(std::abs(r.points[1] + 1.0) < 1e-15);
    auto q = rotation_reference(Rational(3, 8), 0.0);
    CHECK(q.points.size() == 8);
    auto a = irrational_rotation_reference(0.1);
    CHECK(a.inner == doctest::Approx(0.9));
    CHECK(a.outer == doctest::Approx(1.1));
    CHECK(sigma_inf_rotation_exact({0.0, 0.5}) == doctest::Approx(0.5));
    CHECK(sigma_inf_rotation_exact({2.0, 0.0}) == doctest::Approx(1.0));
}

TEST_CASE("hausdorff distances") {
    PointSet a{{0, 0}, {1, 0}}, b{{0, 0}};
    CHECK(hausdorff(a, b) == doctest::Approx(1.0));
    CHECK(directed_hausdorff(b, a) == 0.0);
    CHECK(hausdorff(roots_of_unity(4), roots_of_unity(2)) == doctest::Approx(std::sqrt(2.0)));
    CHECK_THROWS_AS(hausdorff(a, PointSet{}), EmptyInput);
    // Nearest-neighbour search against brute force on scattered points.
    PointSet big, probe;
    for (int k = 0; k < 500; ++k) big.push_back(std::polar(0.3 + 0.001 * k, 0.7 * k));
    for (int k = 0; k < 60; ++k) probe.push_back({std::cos(1.3 * k) * 2.0, std::sin(0.4 * k)});
    double brute = 0.0;
    for (auto p : probe) {
        double best = 1e300;
        for (auto q : big) best = std::min(best, std::abs(p - q));
        brute = std::max(brute, best);
    }
    CHECK(directed_hausdorff(probe, big) == doctest::Approx(brute));
}

TEST_CASE("samples cover the reference set") {
    const double r = 0.05;
    for (auto ref : {ReferenceSpectrum::disk({0.5, 0.0}, 0.3), ReferenceSpectrum::annulus(0.8, 1.2),
                     ReferenceSpectrum::unite({ReferenceSpectrum::disk({1, 0}, 0.1), ReferenceSpectrum::finite({{0, 0}})})}) {
        auto s = ref.sample(r);
        // Dense check points inside the set.
        PointSet in;
        for (int i = -60; i <= 60; ++i)
            for (int j = -60; j <= 60; ++j) {
                std::complex<double> z(i / 40.0, j / 40.0);
                bool inside = false;
                if (ref.kind == ReferenceSpectrum::Kind::Disk) inside = std::abs(z - ref.center) <= ref.radius;
                if (ref.kind == ReferenceSpectrum::Kind::Annulus) inside = std::abs(z) >= ref.inner && std::abs(z) <= ref.outer;
                if (ref.kind == ReferenceSpectrum::Kind::Union) inside = std::abs(z - 1.0) <= 0.1;
                if (inside) in.push_back(z);
            }
        if (!in.empty()) CHECK(directed_hausdorff(in, s) <= r);
    }
    CHECK_THROWS_AS(ReferenceSpectrum::disk(0.0, -1.0), ConfigError);
}
