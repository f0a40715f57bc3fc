#pragma once

#include "koop/dictionary.hpp"
#include "koop/map_library.hpp"
#include "koop/step_function.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace koop {

using cd = std::complex<double>;
using SpMatC = Eigen::SparseMatrix<cd>;
using SpMatD = Eigen::SparseMatrix<double>;

enum class ResidualMode { NetSearch, RatioNetSearch, MatrixSigmaInf, P2Oracle };
std::string to_string(ResidualMode m);
ResidualMode parse_residual_mode(const std::string& s);

struct ResidualResult {
    double value = 0.0;
    double error_bar = 0.0;
    std::vector<cd> coeffs;     // minimizing net vector (net modes)
    bool heuristic = false;     // error bar relies on the numerical norm-equivalence surrogate
};

// ---------------------------------------------------------------- sampling

// Dictionary values at the level-n1 representatives (B) and at their images (A).
struct SampledSection {
    std::size_t n2 = 0;
    int n1 = 0;
    SpMatD A, B;              // rows: cells, columns: elements
    std::vector<double> w;    // cell masses
};

SampledSection sample_section(const MapOracle& F, const Dictionary& dict, std::size_t n2, int n1,
                              int precision = kDefaultPrecision);

// Weighted Gram blocks A^T W A, A^T W B, B^T W B accumulated without storing rows.
struct GramBlocks {
    std::size_t n2 = 0;
    int n1 = 0;
    SpMatD AA, AB, BB;
    // Leading n x n sub-blocks (the section of the first n elements).
    GramBlocks leading(std::size_t n) const;
};

GramBlocks accumulate_gram(const MapOracle& F, const Dictionary& dict, std::size_t n2, int n1,
                           int precision = kDefaultPrecision);
GramBlocks gram_of(const SampledSection& s);

// (K g)(x_P) = g(F x_P) at the level-n1 representatives for g = sum c_j phi_j.
StepFunctionT<cd> apply_koopman_sampled(const MapOracle& F, const Dictionary& dict, const std::vector<cd>& c, int n1,
                                        int precision = kDefaultPrecision);
double truncated_norm(const DyadicTree& tree, const StepFunctionT<cd>& f, double p);

// ---------------------------------------------------------------- p = 2

struct P2Solution {
    double value = 0.0;
    Eigen::VectorXcd vec;
};

// min over c of sqrt(c*Hc / c*Gc) with G positive semidefinite; directions with
// Gc = 0 are eliminated by a Schur complement.
P2Solution p2_min_ratio(const Eigen::MatrixXcd& H, const Eigen::MatrixXcd& G);

// Section residual for p = 2 from Gram blocks.
class P2Residual {
public:
    explicit P2Residual(GramBlocks g);
    double value(cd z) const;
    P2Solution solve(cd z) const;
    bool sparse_path() const { return sparse_; }
    const GramBlocks& gram() const { return g_; }

private:
    double sparse_value(cd z) const;
    GramBlocks g_;
    bool sparse_ = false;
    Eigen::MatrixXd DD_, DB_, BB_;
    SpMatD sDD_, sDB_, sDBt_, sBB_;  // scaled and reordered for the sparse path
};

// ---------------------------------------------------------------- net search

struct NetOptions {
    int bits = 6;                 // net entries k/2^bits, |Re|,|Im| <= 1
    int random_starts = 3;
    std::uint64_t seed = 1;
    bool warm_start = true;       // rounded l2 minimizer as an extra start
};

struct NetResult {
    double value = 0.0;           // ratio (not p-th power)
    std::vector<cd> c;
};

// min over nonzero net points of ||(A - zB)c||_{p,w} / ||Bc||_{p,w}.
class RatioProblem {
public:
    RatioProblem(SpMatC A, SpMatC B, std::vector<double> w, double p);
    NetResult minimize(cd z, const NetOptions& opt) const;
    // All local minima reached from the starts, best first.
    std::vector<NetResult> candidates(cd z, const NetOptions& opt) const;
    double ratio(cd z, const std::vector<cd>& c) const;
    double numerator(cd z, const std::vector<cd>& c) const;
    double denominator(const std::vector<cd>& c) const;
    std::size_t dim() const { return static_cast<std::size_t>(A_.cols()); }
    // Riesz-Thorin bound of c -> W^{1/p} M c with M = A - zB (or B when z is empty).
    double norm_bound(std::optional<cd> z) const;

private:
    SpMatC A_, B_;
    std::vector<double> w_;
    double p_;
};

// Numerical norm-equivalence constant: min ||Bc||_{p,w} / ||c||_p over a coarse net.
double norm_equivalence_surrogate(const SampledSection& s, double p, int bits = 3);

// ---------------------------------------------------------------- matrices

Eigen::MatrixXcd compression_matrix(const GramBlocks& g, const DualSystem& duals);
Eigen::MatrixXcd compression_matrix(const MapOracle& F, const Dictionary& dict, const DualSystem& duals, std::size_t n2,
                                    int n1, int precision = kDefaultPrecision);

// p = 2: smallest singular value of M - zI; otherwise the net search below.
ResidualResult sigma_inf_matrix(const Eigen::MatrixXcd& M, cd z, double p, int bits, const NetOptions& base = {});
ResidualResult sigma_inf_net(const Eigen::MatrixXcd& M, cd z, double p, int bits, const NetOptions& base = {});
double perturbation_bound(const Eigen::MatrixXcd& M, const Eigen::MatrixXcd& N, double p);
double induced_norm_bound(const Eigen::MatrixXcd& D, double p);

// ---------------------------------------------------------------- evaluator

struct ResidualOptions {
    ResidualMode mode = ResidualMode::RatioNetSearch;
    double p = 2.0;
    NetOptions net;
    int precision = kDefaultPrecision;
};

// Finite-section residual h_{n2,n1}(z) for one (map, dictionary, n2, n1); the
// oracle is queried once per representative at construction and reused for every z.
class SectionResidual {
public:
    SectionResidual(const MapOracle& F, const Dictionary& dict, std::size_t n2, int n1, ResidualOptions opt);
    ResidualResult operator()(cd z) const;
    const ResidualOptions& options() const { return opt_; }
    std::size_t n2() const { return n2_; }
    int n1() const { return n1_; }
    double alpha() const { return alpha_; }

private:
    ResidualOptions opt_;
    std::size_t n2_;
    int n1_;
    std::optional<SampledSection> section_;
    std::optional<RatioProblem> problem_;
    std::optional<P2Residual> p2_;
    std::optional<Eigen::MatrixXcd> compression_;
    double alpha_ = 0.0;
};

}  // namespace koop
