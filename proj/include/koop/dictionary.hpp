#pragma once

#include "koop/rational.hpp"
#include "koop/space_model.hpp"
#include "koop/step_function.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace koop {

struct SparseValue {
    std::size_t index = 0;
    double value = 0.0;
};

class Dictionary {
public:
    explicit Dictionary(const DyadicTree& tree) : tree_(std::make_shared<const DyadicTree>(tree)) {}
    virtual ~Dictionary() = default;

    virtual std::string kind() const = 0;
    virtual std::size_t size() const = 0;
    // Appends the nonzero values phi_j(x), j < n.
    virtual void values_at(const Point& x, std::size_t n, std::vector<SparseValue>& out) const = 0;
    // Level on which the first n elements are step functions, if any.
    virtual std::optional<int> step_level(std::size_t n) const = 0;
    virtual void dump_csv(std::ostream& os, std::size_t n) const;

    double evaluate(std::size_t j, const Point& x) const;
    const DyadicTree& tree() const { return *tree_; }

protected:
    void check_count(std::size_t n) const;
    std::shared_ptr<const DyadicTree> tree_;
};

struct HaarElement {
    int level = 0;                 // generating level
    std::size_t parent = 0;        // split atom at level-1
    std::size_t pos = 0, neg = 0;  // child atoms at level
    Rational mass_pos, mass_neg;
    double norm = 1.0;             // normalizer
    double value_pos = 1.0, value_neg = 0.0;
};

class HaarDictionary : public Dictionary {
public:
    HaarDictionary(const DyadicTree& tree, double p, std::size_t count);

    std::string kind() const override { return "haar"; }
    std::size_t size() const override { return count_; }
    void values_at(const Point& x, std::size_t n, std::vector<SparseValue>& out) const override;
    std::optional<int> step_level(std::size_t n) const override;
    void dump_csv(std::ostream& os, std::size_t n) const override;

    double p() const { return p_; }
    // Number of elements spanning the level-m step functions.
    std::size_t cutoff(int m) const { return level_offset_.at(static_cast<std::size_t>(m)); }
    HaarElement element(std::size_t j) const;
    // Values of the unnormalized element 1_P/mu(P) - 1_N/mu(N) (scaling: 1) on level atoms.
    std::vector<Rational> unnormalized_step(std::size_t j, int level) const;
    std::vector<double> step(std::size_t j, int level) const;

private:
    std::size_t atom_of_rank(int level, std::size_t rank) const;
    std::size_t rank_of_atom(int level, std::size_t atom) const;

    double p_;
    std::size_t count_;
    std::vector<std::size_t> level_offset_;            // N(m)
    std::vector<std::vector<std::size_t>> terminals_;  // per level
};

// Indicators of the atoms of one level.
class IndicatorDictionary : public Dictionary {
public:
    IndicatorDictionary(const DyadicTree& tree, int level);
    std::string kind() const override { return "indicator"; }
    std::size_t size() const override { return tree_->level_size(level_); }
    void values_at(const Point& x, std::size_t n, std::vector<SparseValue>& out) const override;
    std::optional<int> step_level(std::size_t) const override { return level_; }
    void dump_csv(std::ostream& os, std::size_t n) const override;
    int level() const { return level_; }

private:
    int level_;
};

// Distance-quotient partition of unity subordinate to the level-m atoms of an
// interval or circle.
class LipschitzDictionary : public Dictionary {
public:
    LipschitzDictionary(const DyadicTree& tree, int level, Rational rho = Rational(1, 2), int pstar = 1);

    std::string kind() const override { return "lipschitz"; }
    std::size_t size() const override { return count_; }
    void values_at(const Point& x, std::size_t n, std::vector<SparseValue>& out) const override;
    std::optional<int> step_level(std::size_t) const override { return std::nullopt; }

    int level() const { return level_; }
    int multiplicity() const { return multiplicity_; }
    double lebesgue_bound() const { return lebesgue_; }
    double lipschitz_bound() const { return lip_; }
    const Rational& rho() const { return rho_; }
    int pstar() const { return pstar_; }

    // Exact value of the j-th weight at a rational point.
    Rational value_exact(std::size_t j, const Rational& x) const;
    double value(std::size_t j, double x) const;

private:
    template <class T>
    T thickening() const;
    template <class T>
    T delta(std::size_t cell, const T& x) const;
    template <class T>
    T weight(std::size_t j, const T& x) const;

    int level_;
    Rational rho_;
    double rho_d_;
    int pstar_;
    bool circle_;
    std::size_t count_;
    int multiplicity_ = 1;
    double lebesgue_ = 0.0;
    double lip_ = 0.0;
};

// Constant, then the weights of levels 1..L, each level without its last
// weight (the weights of one level sum to the constant).
class ThetaDictionary : public Dictionary {
public:
    ThetaDictionary(const DyadicTree& tree, int max_level, Rational rho = Rational(1, 2), int pstar = 1);

    std::string kind() const override { return "theta"; }
    std::size_t size() const override { return offset_.back(); }
    void values_at(const Point& x, std::size_t n, std::vector<SparseValue>& out) const override;
    std::optional<int> step_level(std::size_t) const override { return std::nullopt; }

    const std::vector<LipschitzDictionary>& levels() const { return levels_; }
    // Largest per-element Lipschitz bound among the first n elements.
    double lipschitz_bound(std::size_t n) const;

private:
    std::vector<LipschitzDictionary> levels_;
    std::vector<std::size_t> offset_;  // offset_[k]: first index of levels_[k]; back(): size
};

// Dual system phi_i^# = sum_k coeff(i,k) phi_k for the first n elements.
struct DualSystem {
    std::size_t n = 0;
    int level = 0;
    Eigen::SparseMatrix<double> coeff;  // column k: contributions of phi_k
};

DualSystem build_duals(const Dictionary& dict, std::size_t n);

// Exact duals of the unnormalized Haar system as rational step functions on the
// generating level, with their primal counterparts.
struct ExactDuals {
    int level = 0;
    std::vector<std::vector<Rational>> primal;
    std::vector<std::vector<Rational>> dual;
};
ExactDuals build_duals_exact(const HaarDictionary& dict, std::size_t n);
// Matrix of pairings <dual_i, primal_j>.
std::vector<std::vector<Rational>> dual_gram(const DyadicTree& tree, const ExactDuals& d);

// Evaluate the dual functions at x (dense length n).
void dual_values_at(const Dictionary& dict, const DualSystem& duals, const Point& x, std::vector<SparseValue>& scratch,
                    std::vector<double>& out);

template <class T>
StepFunctionT<T> conditional_expectation(const DyadicTree& tree, int m, const StepFunctionT<T>& f);

// Cell averages of a sampled function using the representatives of the given quadrature level.
StepFunction conditional_expectation_sampled(const DyadicTree& tree, int m, const std::function<double(const Point&)>& f,
                                             int quadrature_level);

}  // namespace koop
