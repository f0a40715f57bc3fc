#pragma once

#include "koop/rational.hpp"

#include <complex>
#include <string>
#include <vector>

namespace koop {

using PointSet = std::vector<std::complex<double>>;

struct ReferenceSpectrum {
    enum class Kind { FiniteSet, Disk, Annulus, Union };
    Kind kind = Kind::FiniteSet;
    PointSet points;                  // FiniteSet
    std::complex<double> center;      // Disk
    double radius = 0.0;              // Disk
    double inner = 1.0, outer = 1.0;  // Annulus around 0
    std::vector<ReferenceSpectrum> parts;

    static ReferenceSpectrum finite(PointSet pts);
    static ReferenceSpectrum disk(std::complex<double> c, double r);
    static ReferenceSpectrum annulus(double inner, double outer);
    static ReferenceSpectrum unite(std::vector<ReferenceSpectrum> parts);

    // Finite subset whose r-neighbourhood covers the set.
    PointSet sample(double r) const;
    std::string describe() const;
};

PointSet roots_of_unity(long q);
ReferenceSpectrum rotation_reference(const Rational& theta, double eps);
// Lowest terms enforced; a reduced fraction is reported through `reduced`.
ReferenceSpectrum rotation_reference(long p, long q, double eps, bool* reduced = nullptr);
ReferenceSpectrum irrational_rotation_reference(double eps);

double sigma_inf_rotation_exact(std::complex<double> z);

// Exact Hausdorff distance between finite point sets.
double hausdorff(const PointSet& a, const PointSet& b);
// sup over a of the distance to b.
double directed_hausdorff(const PointSet& a, const PointSet& b);

double gap_formula(long q, double eps);

bool is_prime(long n);
long nth_prime(int n);

struct DiophantineCheck {
    long p = 0;
    long D = 0;
    double bound = 0.0;
    double true_min = 0.0;
};
DiophantineCheck diophantine_margin(long p, long D);

struct DiophantineSweep {
    std::size_t cases = 0;
    std::size_t violations = 0;
    double worst_ratio = 0.0;   // min over cases of true_min / bound
};
DiophantineSweep diophantine_sweep(long pmax);

}  // namespace koop
