#pragma once

#include "koop/errors.hpp"
#include "koop/rational.hpp"
#include "koop/space_model.hpp"

#include <cmath>
#include <vector>

namespace koop {

// Step function on the atoms of one tree level.
template <class T>
struct StepFunctionT {
    int level = 0;
    std::vector<T> coeffs;
};
using StepFunction = StepFunctionT<double>;
using StepFunctionQ = StepFunctionT<Rational>;

template <class T>
StepFunctionT<T> make_step(const DyadicTree& tree, int level, std::vector<T> coeffs) {
    if (coeffs.size() != tree.level_size(level))
        throw ShapeMismatch("step function needs " + std::to_string(tree.level_size(level)) + " coefficients, got " +
                            std::to_string(coeffs.size()));
    return StepFunctionT<T>{level, std::move(coeffs)};
}

template <class T>
T atom_weight(const DyadicTree& tree, int level, std::size_t idx);

template <>
inline double atom_weight<double>(const DyadicTree& tree, int level, std::size_t idx) {
    return tree.atom_mass_d(level, idx);
}

template <>
inline Rational atom_weight<Rational>(const DyadicTree& tree, int level, std::size_t idx) {
    return tree.atom_mass(AtomId{level, idx});
}

// Same function written on a finer level.
template <class T>
StepFunctionT<T> refine(const DyadicTree& tree, const StepFunctionT<T>& f, int level) {
    if (level < f.level) throw LevelOutOfRange("refine needs a finer level");
    StepFunctionT<T> out{level, std::vector<T>(tree.level_size(level))};
    for (std::size_t i = 0; i < out.coeffs.size(); ++i) out.coeffs[i] = f.coeffs[tree.locate(f.level, tree.rep(level, i))];
    return out;
}

// sum_P |a_P|^p w(P) for integer p, exact in rational mode.
template <class T>
T truncated_norm_pow(const DyadicTree& tree, const StepFunctionT<T>& f, unsigned p) {
    T s = 0;
    for (std::size_t i = 0; i < f.coeffs.size(); ++i) {
        T a = f.coeffs[i] < 0 ? T(-f.coeffs[i]) : f.coeffs[i];
        T ap = 1;
        for (unsigned k = 0; k < p; ++k) ap *= a;
        s += ap * atom_weight<T>(tree, f.level, i);
    }
    return s;
}

inline double truncated_norm(const DyadicTree& tree, const StepFunction& f, double p) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.coeffs.size(); ++i)
        s += std::pow(std::abs(f.coeffs[i]), p) * tree.atom_mass_d(f.level, i);
    return std::pow(s, 1.0 / p);
}

}  // namespace koop
