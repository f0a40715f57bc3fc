#pragma once

#include "koop/dictionary.hpp"
#include "koop/map_library.hpp"
#include "koop/rational.hpp"
#include "koop/residual_engine.hpp"
#include "koop/spectral_reference.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace koop {

struct GridSpec {
    Rational mesh{1, 4};
    Rational radius{2};
    static GridSpec paper(long n) { return GridSpec{Rational(1, n), Rational(n)}; }
};

// Lattice points mesh*(k + il) inside the closed disk, sorted by (re, im).
std::vector<ComplexQ> make_grid(const GridSpec& spec);

enum class TowerMode { Sigma2General, Sigma2Stabilized, Sigma1Modulus, Sigma1Markov, ArithmeticSigma2, ArithmeticSigma3 };
std::string to_string(TowerMode m);
TowerMode parse_tower_mode(const std::string& s);

struct CompactSet {
    std::vector<ComplexQ> points;
    std::string tower;
    std::map<std::string, long> indices;
    double epsilon = 0.0;
    double threshold = 0.0;
    std::vector<std::string> warnings;

    PointSet as_points() const;
    bool empty() const { return points.empty(); }
};

using ResidualFn = std::function<double(cd)>;

std::vector<double> evaluate_on_grid(const ResidualFn& h, const std::vector<ComplexQ>& grid, int threads = 0);
// Grid points with h < threshold (strict).
CompactSet threshold_set(const std::vector<ComplexQ>& grid, const std::vector<double>& h, double threshold);

CompactSet gamma_base(const MapOracle& F, const Dictionary& dict, double eps, std::size_t n2, int n1, const GridSpec& grid,
                      const ResidualOptions& opt);

// Accepts z when some inner index k in [k_min, n1] has h_k(z) < threshold.
// Returns the accepted sets for n1 = k_min, ..., n1 (monotone by construction).
std::vector<CompactSet> gamma_stabilized_trace(const std::vector<ResidualFn>& by_k, double threshold,
                                               const std::vector<ComplexQ>& grid);
CompactSet gamma_stabilized(const MapOracle& F, const Dictionary& dict, double eps, std::size_t n2, int n1,
                            const GridSpec& grid, const ResidualOptions& opt, int k_min = 0);

struct Sigma1Level {
    int m = 0;
    double constant = 0.0;     // C_n
    double alpha = 0.0;        // norm-equivalence surrogate
    double lipschitz = 0.0;    // largest element Lipschitz bound
    double radius = 0.0;
};
// Smallest quadrature level with C_n (modulus(mesh) + mesh) <= 1/(4n).
Sigma1Level sigma1_quadrature_level(const MapOracle& F, const ThetaDictionary& dict, std::size_t n, double R, double p);
Sigma1Level sigma1_quadrature_level(const MapOracle& F, const LipschitzDictionary& dict, std::size_t n, double R, double p);
CompactSet run_sigma1_modulus(const MapOracle& F, const ThetaDictionary& dict, double eps, std::size_t n,
                              const GridSpec& grid, double R, const ResidualOptions& opt, Sigma1Level* level = nullptr);
CompactSet run_sigma1_modulus(const MapOracle& F, const LipschitzDictionary& dict, double eps, std::size_t n,
                              const GridSpec& grid, double R, const ResidualOptions& opt, Sigma1Level* level = nullptr);

struct CascadeReport {
    std::vector<CompactSet> sets;
    std::vector<double> eps;
    std::vector<bool> degenerate;
    std::size_t nesting_violations = 0;
};
CascadeReport sigma_ap_cascade(const ResidualFn& h, double eps0, int m_max, std::size_t n2, const GridSpec& grid);
CascadeReport sigma_ap_cascade(const MapOracle& F, const Dictionary& dict, double eps0, int m_max, std::size_t n2, int n1,
                               const GridSpec& grid, const ResidualOptions& opt);

// Exact rational residual in p-power form over a fixed dyadic net (entries
// k/2^net_bits, |Re|,|Im| <= 1), with dyadic masses and powers bracketed to
// relative precision 2^-n0: floor brackets in the numerator, ceilings below.
Rational arithmetic_residual(const MapOracle& F, const Dictionary& dict, const ComplexQ& z, std::size_t n2, int n1, int n0,
                             unsigned p, int net_bits = 1);
// Same net in binary64, p-power form.
double arithmetic_residual_float(const MapOracle& F, const Dictionary& dict, std::complex<double> z, std::size_t n2, int n1,
                                 unsigned p, int net_bits = 1);
// Arithmetic base sets: Sigma2 keeps value < (eps - 1/n2)^p; Sigma3 keeps value <= a^p with
// a = eps - 2^-(n2+2) and reports the undecided band (a, b) in the warnings.
CompactSet arithmetic_gamma(const MapOracle& F, const Dictionary& dict, const Rational& eps, std::size_t n2, int n1, int n0,
                            unsigned p, const GridSpec& grid, TowerMode mode, int net_bits = 1);

struct HausdorffTrace {
    std::vector<double> values;   // +inf for empty sets
    std::vector<bool> empty;
};
HausdorffTrace hausdorff_trace(const std::vector<CompactSet>& sets, const PointSet& reference);

}  // namespace koop
