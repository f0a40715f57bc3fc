#include "koop/dictionary.hpp"

#include "koop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace koop {

void Dictionary::dump_csv(std::ostream&, std::size_t) const {
    throw ConfigError(kind() + " dictionary has no step representation to dump");
}

void Dictionary::check_count(std::size_t n) const {
    if (n > size())
        throw IndexOutOfRange("element count " + std::to_string(n) + " exceeds dictionary size " + std::to_string(size()));
}

double Dictionary::evaluate(std::size_t j, const Point& x) const {
    if (j >= size()) throw IndexOutOfRange("element " + std::to_string(j));
    tree_->validate_point(x);
    std::vector<SparseValue> v;
    values_at(x, j + 1, v);
    for (const auto& sv : v)
        if (sv.index == j) return sv.value;
    return 0.0;
}

// ---------------------------------------------------------------- Haar

namespace {

double haar_norm(double mp, double mn, double p) {
    return std::pow(std::pow(mp, 1.0 - p) + std::pow(mn, 1.0 - p), -1.0 / p);
}

}  // namespace

HaarDictionary::HaarDictionary(const DyadicTree& tree, double p, std::size_t count)
    : Dictionary(tree), p_(p), count_(count) {
    if (!(p >= 1.0)) throw ConfigError("Haar exponent must be at least 1");
    for (int m = 0; m <= tree.depth(); ++m) {
        level_offset_.push_back(tree.level_size(m));
        terminals_.push_back(tree.terminal_atoms(m));
    }
    if (count == 0 || count > level_offset_.back())
        throw CountExceedsTree("requested " + std::to_string(count) + " elements, tree provides " +
                               std::to_string(level_offset_.back()));
}

std::size_t HaarDictionary::atom_of_rank(int level, std::size_t rank) const {
    std::size_t a = rank;
    for (std::size_t t : terminals_[static_cast<std::size_t>(level)])
        if (t <= a) ++a;
    return a;
}

std::size_t HaarDictionary::rank_of_atom(int level, std::size_t atom) const {
    const auto& t = terminals_[static_cast<std::size_t>(level)];
    return atom - static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), atom) - t.begin());
}

HaarElement HaarDictionary::element(std::size_t j) const {
    if (j >= count_) throw IndexOutOfRange("Haar element " + std::to_string(j));
    HaarElement e;
    if (j == 0) return e;
    auto it = std::upper_bound(level_offset_.begin(), level_offset_.end(), j);
    int level = static_cast<int>(it - level_offset_.begin());
    e.level = level;
    e.parent = atom_of_rank(level - 1, j - level_offset_[static_cast<std::size_t>(level - 1)]);
    auto kids = tree_->children(level - 1, e.parent);
    e.pos = kids[0];
    e.neg = kids[1];
    e.mass_pos = tree_->atom_mass(AtomId{level, e.pos});
    e.mass_neg = tree_->atom_mass(AtomId{level, e.neg});
    double mp = to_double(e.mass_pos), mn = to_double(e.mass_neg);
    e.norm = haar_norm(mp, mn, p_);
    e.value_pos = e.norm / mp;
    e.value_neg = -e.norm / mn;
    return e;
}

void HaarDictionary::values_at(const Point& x, std::size_t n, std::vector<SparseValue>& out) const {
    check_count(n);
    if (n == 0) return;
    out.push_back({0, 1.0});
    for (int l = 1; l <= tree_->depth(); ++l) {
        std::size_t first = level_offset_[static_cast<std::size_t>(l - 1)];
        if (first >= n) break;
        std::size_t a = tree_->locate(l - 1, x);
        if (!tree_->splits(l - 1, a)) continue;
        std::size_t j = first + rank_of_atom(l - 1, a);
        if (j >= n) continue;
        auto kids = tree_->children(l - 1, a);
        std::size_t c = tree_->locate(l, x);
        double mp = tree_->atom_mass_d(l, kids[0]), mn = tree_->atom_mass_d(l, kids[1]);
        double nrm = p_ == 2.0 ? 1.0 / std::sqrt(1.0 / mp + 1.0 / mn) : haar_norm(mp, mn, p_);
        out.push_back({j, c == kids[0] ? nrm / mp : -nrm / mn});
    }
}

std::optional<int> HaarDictionary::step_level(std::size_t n) const {
    check_count(n);
    auto it = std::lower_bound(level_offset_.begin(), level_offset_.end(), n);
    return static_cast<int>(it - level_offset_.begin());
}

std::vector<Rational> HaarDictionary::unnormalized_step(std::size_t j, int level) const {
    HaarElement e = element(j);
    if (level < e.level) throw LevelOutOfRange("element is not a step function at level " + std::to_string(level));
    std::vector<Rational> out(tree_->level_size(level));
    if (j == 0) {
        std::fill(out.begin(), out.end(), Rational(1));
        return out;
    }
    Rational vp = 1 / e.mass_pos, vn = -1 / e.mass_neg;
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::size_t c = tree_->locate(e.level, tree_->rep(level, i));
        if (c == e.pos) out[i] = vp;
        else if (c == e.neg) out[i] = vn;
    }
    return out;
}

std::vector<double> HaarDictionary::step(std::size_t j, int level) const {
    HaarElement e = element(j);
    auto u = unnormalized_step(j, level);
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] > 0) out[i] = e.value_pos;
        else if (u[i] < 0) out[i] = e.value_neg;
    }
    if (j == 0) std::fill(out.begin(), out.end(), 1.0);
    return out;
}

void HaarDictionary::dump_csv(std::ostream& os, std::size_t n) const {
    check_count(n);
    os << "element,level,path,coefficient\n";
    os.precision(17);
    for (std::size_t j = 0; j < n; ++j) {
        HaarElement e = element(j);
        if (j == 0) {
            os << 0 << ",0," << tree_->atom(0, 0).path << ",1\n";
            continue;
        }
        os << j << "," << e.level << "," << tree_->atom(e.level, e.pos).path << "," << e.value_pos << "\n";
        os << j << "," << e.level << "," << tree_->atom(e.level, e.neg).path << "," << e.value_neg << "\n";
    }
}

// ---------------------------------------------------------------- indicators

IndicatorDictionary::IndicatorDictionary(const DyadicTree& tree, int level) : Dictionary(tree), level_(level) {
    tree.level_size(level);
}

void IndicatorDictionary::values_at(const Point& x, std::size_t n, std::vector<SparseValue>& out) const {
    check_count(n);
    std::size_t i = tree_->locate(level_, x);
    if (i < n) out.push_back({i, 1.0});
}

void IndicatorDictionary::dump_csv(std::ostream& os, std::size_t n) const {
    check_count(n);
    os << "element,level,path,coefficient\n";
    for (std::size_t j = 0; j < n; ++j) os << j << "," << level_ << "," << tree_->atom(level_, j).path << ",1\n";
}

// ---------------------------------------------------------------- Lipschitz weights

namespace {

template <class T>
T unit(int m);
template <>
double unit<double>(int m) { return std::ldexp(1.0, -m); }
template <>
Rational unit<Rational>(int m) { return Rational(Integer(1), Integer(1) << m); }

template <class T>
T conv(const Rational& q);
template <>
double conv<double>(const Rational& q) { return to_double(q); }
template <>
Rational conv<Rational>(const Rational& q) { return q; }

template <class T>
std::size_t cell_of(const T& x, int m);
template <>
std::size_t cell_of<double>(const double& x, int m) {
    double v = std::floor(std::ldexp(x, m));
    return v < 0 ? 0 : static_cast<std::size_t>(v);
}
template <>
std::size_t cell_of<Rational>(const Rational& x, int m) {
    Integer k = floor_int(x * Rational(Integer(1) << m));
    return k < 0 ? 0 : static_cast<std::size_t>(k);
}

template <class T>
T ipow(const T& v, int k) {
    T r = 1;
    for (int i = 0; i < k; ++i) r *= v;
    return r;
}

}  // namespace

LipschitzDictionary::LipschitzDictionary(const DyadicTree& tree, int level, Rational rho, int pstar)
    : Dictionary(tree), level_(level), rho_(std::move(rho)), rho_d_(to_double(rho_)), pstar_(pstar) {
    if (tree.component_count() != 1 ||
        (tree.component_kind(0) != SpaceKind::UnitInterval && tree.component_kind(0) != SpaceKind::Circle))
        throw UnsupportedSpace("Lipschitz weights need an interval or circle space");
    if (level < 0 || level > 40) throw LevelOutOfRange("Lipschitz level " + std::to_string(level));
    if (rho_ <= 0 || rho_ > 1) throw ConfigError("thickening must lie in (0,1]");
    if (pstar < 1) throw ConfigError("weight exponent must be at least 1");
    circle_ = tree.component_kind(0) == SpaceKind::Circle;
    count_ = std::size_t(1) << level;
    if (level == 0) return;
    if (circle_ && (1 + 2 * rho_) / Rational(Integer(1) << level) > 1)
        throw ConfigError("thickened arcs cover the whole circle");

    // Multiplicity by an endpoint sweep over the open thickenings.
    double h = std::ldexp(1.0, -level), r = to_double(rho_);
    std::vector<std::pair<double, int>> ev;
    for (std::size_t k = 0; k < count_; ++k) {
        double lo = static_cast<double>(k) * h - r * h, hi = static_cast<double>(k + 1) * h + r * h;
        for (int s = circle_ ? -1 : 0; s <= (circle_ ? 1 : 0); ++s) {
            ev.push_back({lo + s, +1});
            ev.push_back({hi + s, -1});
        }
    }
    std::sort(ev.begin(), ev.end());  // ends sort before starts at equal coordinates
    int cur = 0;
    for (const auto& e : ev) {
        cur += e.second;
        multiplicity_ = std::max(multiplicity_, cur);
    }
    lebesgue_ = r / 2.0 * h;
    lip_ = 2.0 * std::max(1.0, std::pow(static_cast<double>(multiplicity_ - 1), 1.0 / pstar_)) / lebesgue_;
}

template <>
double LipschitzDictionary::thickening<double>() const {
    return rho_d_;
}

template <>
Rational LipschitzDictionary::thickening<Rational>() const {
    return rho_;
}

template <class T>
T LipschitzDictionary::delta(std::size_t cell, const T& x) const {
    T h = unit<T>(level_);
    T r = thickening<T>();
    T lo = T(static_cast<long long>(cell)) * h - r * h;
    T hi = T(static_cast<long long>(cell + 1)) * h + r * h;
    if (circle_) {
        T y = x;
        while (y <= lo) y += 1;
        while (y > lo + 1) y -= 1;
        if (y >= hi) return T(0);
        T a = y - lo, b = hi - y;
        return a < b ? a : b;
    }
    if (x <= lo || x >= hi) return T(0);
    bool have = false;
    T d = 0;
    if (lo >= 0) {
        d = x - lo;
        have = true;
    }
    if (hi <= 1) {
        T b = hi - x;
        d = have && d < b ? d : b;
        have = true;
    }
    if (!have) throw ConfigError("thickened cell covers the whole interval");
    return d;
}

template <class T>
T LipschitzDictionary::weight(std::size_t j, const T& x) const {
    if (j >= count_) throw IndexOutOfRange("Lipschitz weight " + std::to_string(j));
    if (level_ == 0) return T(1);
    std::size_t k0 = std::min(cell_of<T>(x, level_), count_ - 1);
    std::size_t cand[3];
    int nc = 0;
    for (int d = -1; d <= 1; ++d) {
        long long k = static_cast<long long>(k0) + d;
        if (circle_) k = (k + static_cast<long long>(count_)) % static_cast<long long>(count_);
        else if (k < 0 || k >= static_cast<long long>(count_)) continue;
        auto ku = static_cast<std::size_t>(k);
        if (std::find(cand, cand + nc, ku) == cand + nc) cand[nc++] = ku;
    }
    T sum = 0, mine = 0;
    for (int i = 0; i < nc; ++i) {
        T v = ipow(delta<T>(cand[i], x), pstar_);
        sum += v;
        if (cand[i] == j) mine = v;
    }
    return mine / sum;
}

Rational LipschitzDictionary::value_exact(std::size_t j, const Rational& x) const {
    if (x < 0 || x > 1 || (circle_ && x == 1)) throw PointOutsideSpace("point " + to_string(x));
    return weight<Rational>(j, x);
}

double LipschitzDictionary::value(std::size_t j, double x) const {
    tree_->validate_point(Point::at(x));
    return weight<double>(j, x);
}

void LipschitzDictionary::values_at(const Point& x, std::size_t n, std::vector<SparseValue>& out) const {
    check_count(n);
    if (n == 0) return;
    if (level_ == 0) {
        out.push_back({0, 1.0});
        return;
    }
    std::size_t k0 = std::min(cell_of<double>(x.x, level_), count_ - 1);
    std::size_t cand[3];
    double val[3];
    int nc = 0;
    double sum = 0.0;
    for (int d = -1; d <= 1; ++d) {
        long long k = static_cast<long long>(k0) + d;
        if (circle_) k = (k + static_cast<long long>(count_)) % static_cast<long long>(count_);
        else if (k < 0 || k >= static_cast<long long>(count_)) continue;
        auto ku = static_cast<std::size_t>(k);
        if (std::find(cand, cand + nc, ku) != cand + nc) continue;
        double v = ipow(delta<double>(ku, x.x), pstar_);
        cand[nc] = ku;
        val[nc++] = v;
        sum += v;
    }
    for (int i = 0; i < nc; ++i)
        if (val[i] > 0 && cand[i] < n) out.push_back({cand[i], val[i] / sum});
}

ThetaDictionary::ThetaDictionary(const DyadicTree& tree, int max_level, Rational rho, int pstar) : Dictionary(tree) {
    if (max_level < 0) throw LevelOutOfRange("negative Theta level");
    offset_.push_back(0);
    for (int m = 0; m <= max_level; ++m) {
        levels_.emplace_back(tree, m, rho, pstar);
        std::size_t c = m == 0 ? 1 : levels_.back().size() - 1;
        offset_.push_back(offset_.back() + c);
    }
}

void ThetaDictionary::values_at(const Point& x, std::size_t n, std::vector<SparseValue>& out) const {
    check_count(n);
    std::vector<SparseValue> tmp;
    for (std::size_t k = 0; k < levels_.size() && offset_[k] < n; ++k) {
        tmp.clear();
        const auto& lv = levels_[k];
        lv.values_at(x, lv.size(), tmp);
        std::size_t keep = offset_[k + 1] - offset_[k];
        for (const auto& sv : tmp)
            if (sv.index < keep && offset_[k] + sv.index < n) out.push_back({offset_[k] + sv.index, sv.value});
    }
}

double ThetaDictionary::lipschitz_bound(std::size_t n) const {
    double b = 0.0;
    for (std::size_t k = 0; k < levels_.size() && offset_[k] < n; ++k) b = std::max(b, levels_[k].lipschitz_bound());
    return b;
}

// ---------------------------------------------------------------- duals

namespace {

constexpr std::size_t kDenseDualLimit = 1024;
constexpr std::size_t kDenseLevelLimit = 1 << 14;

}  // namespace

DualSystem build_duals(const Dictionary& dict, std::size_t n) {
    if (n > dict.size()) throw IndexOutOfRange("dual count exceeds dictionary size");
    auto lvl = dict.step_level(n);
    if (!lvl) throw DualsMissing(dict.kind() + " dictionary has no step duals");
    const DyadicTree& tree = dict.tree();
    DualSystem d;
    d.n = n;
    d.level = *lvl;
    d.coeff.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::size_t cells = tree.level_size(*lvl);

    if (n <= kDenseDualLimit && cells <= kDenseLevelLimit) {
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        std::vector<SparseValue> v;
        for (std::size_t c = 0; c < cells; ++c) {
            v.clear();
            dict.values_at(tree.rep(*lvl, c), n, v);
            double w = tree.atom_mass_d(*lvl, c);
            for (const auto& a : v)
                for (const auto& b : v)
                    G(static_cast<Eigen::Index>(a.index), static_cast<Eigen::Index>(b.index)) += w * a.value * b.value;
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(G);
        if (lu.rank() < static_cast<Eigen::Index>(n)) throw SingularGram("dictionary Gram matrix is singular");
        Eigen::MatrixXd inv = lu.inverse();
        double scale = inv.cwiseAbs().maxCoeff();
        std::vector<Eigen::Triplet<double>> trip;
        for (Eigen::Index j = 0; j < inv.cols(); ++j)
            for (Eigen::Index i = 0; i < inv.rows(); ++i)
                if (std::abs(inv(i, j)) > 1e-13 * scale) trip.emplace_back(i, j, inv(i, j));
        d.coeff.setFromTriplets(trip.begin(), trip.end());
        return d;
    }

    // Orthogonal step systems: diagonal inverse Gram.
    std::vector<Eigen::Triplet<double>> trip;
    if (auto* ind = dynamic_cast<const IndicatorDictionary*>(&dict)) {
        for (std::size_t j = 0; j < n; ++j) trip.emplace_back(j, j, 1.0 / tree.atom_mass_d(ind->level(), j));
    } else if (auto* haar = dynamic_cast<const HaarDictionary*>(&dict)) {
        for (std::size_t j = 0; j < n; ++j) {
            HaarElement e = haar->element(j);
            double g = 1.0;
            if (j > 0) g = e.value_pos * e.value_pos * to_double(e.mass_pos) + e.value_neg * e.value_neg * to_double(e.mass_neg);
            trip.emplace_back(j, j, 1.0 / g);
        }
    } else {
        throw DualsMissing("dual system too large for a dense solve");
    }
    d.coeff.setFromTriplets(trip.begin(), trip.end());
    return d;
}

ExactDuals build_duals_exact(const HaarDictionary& dict, std::size_t n) {
    ExactDuals d;
    d.level = *dict.step_level(n);
    const DyadicTree& tree = dict.tree();
    std::size_t cells = tree.level_size(d.level);
    std::vector<Rational> w(cells);
    for (std::size_t c = 0; c < cells; ++c) w[c] = tree.atom_mass(AtomId{d.level, c});
    for (std::size_t j = 0; j < n; ++j) d.primal.push_back(dict.unnormalized_step(j, d.level));

    // Gauss-Jordan on [G | I].
    std::vector<std::vector<Rational>> a(n, std::vector<Rational>(2 * n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            Rational s = 0;
            for (std::size_t c = 0; c < cells; ++c)
                if (d.primal[i][c] != 0 && d.primal[j][c] != 0) s += d.primal[i][c] * d.primal[j][c] * w[c];
            a[i][j] = s;
        }
        a[i][n + i] = 1;
    }
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        while (piv < n && a[piv][col] == 0) ++piv;
        if (piv == n) throw SingularGram("Haar Gram matrix is singular");
        std::swap(a[piv], a[col]);
        Rational inv = 1 / a[col][col];
        for (auto& v : a[col]) v *= inv;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col || a[r][col] == 0) continue;
            Rational f = a[r][col];
            for (std::size_t k = 0; k < 2 * n; ++k)
                if (a[col][k] != 0) a[r][k] -= f * a[col][k];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<Rational> dual(cells);
        for (std::size_t k = 0; k < n; ++k) {
            const Rational& g = a[i][n + k];
            if (g == 0) continue;
            for (std::size_t c = 0; c < cells; ++c)
                if (d.primal[k][c] != 0) dual[c] += g * d.primal[k][c];
        }
        d.dual.push_back(std::move(dual));
    }
    return d;
}

std::vector<std::vector<Rational>> dual_gram(const DyadicTree& tree, const ExactDuals& d) {
    std::size_t n = d.primal.size();
    std::size_t cells = tree.level_size(d.level);
    std::vector<Rational> w(cells);
    for (std::size_t c = 0; c < cells; ++c) w[c] = tree.atom_mass(AtomId{d.level, c});
    std::vector<std::vector<Rational>> g(n, std::vector<Rational>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t c = 0; c < cells; ++c)
                if (d.dual[i][c] != 0 && d.primal[j][c] != 0) g[i][j] += d.dual[i][c] * d.primal[j][c] * w[c];
    return g;
}

void dual_values_at(const Dictionary& dict, const DualSystem& duals, const Point& x, std::vector<SparseValue>& scratch,
                    std::vector<double>& out) {
    out.assign(duals.n, 0.0);
    scratch.clear();
    dict.values_at(x, duals.n, scratch);
    for (const auto& sv : scratch)
        for (Eigen::SparseMatrix<double>::InnerIterator it(duals.coeff, static_cast<Eigen::Index>(sv.index)); it; ++it)
            out[static_cast<std::size_t>(it.row())] += it.value() * sv.value;
}

// ---------------------------------------------------------------- conditional expectation

template <class T>
StepFunctionT<T> conditional_expectation(const DyadicTree& tree, int m, const StepFunctionT<T>& f) {
    if (f.coeffs.size() != tree.level_size(f.level)) throw ShapeMismatch("step function size mismatch");
    if (f.level <= m) return refine(tree, f, m);
    std::size_t cells = tree.level_size(m);
    std::vector<T> num(cells, T(0)), den(cells, T(0));
    for (std::size_t q = 0; q < f.coeffs.size(); ++q) {
        std::size_t p = tree.locate(m, tree.rep(f.level, q));
        T w = atom_weight<T>(tree, f.level, q);
        num[p] += f.coeffs[q] * w;
        den[p] += w;
    }
    StepFunctionT<T> out{m, std::vector<T>(cells)};
    for (std::size_t p = 0; p < cells; ++p) out.coeffs[p] = num[p] / den[p];
    return out;
}

template StepFunctionT<double> conditional_expectation(const DyadicTree&, int, const StepFunctionT<double>&);
template StepFunctionT<Rational> conditional_expectation(const DyadicTree&, int, const StepFunctionT<Rational>&);

StepFunction conditional_expectation_sampled(const DyadicTree& tree, int m, const std::function<double(const Point&)>& f,
                                             int quadrature_level) {
    if (quadrature_level < m)
        throw UnresolvableInput("quadrature level " + std::to_string(quadrature_level) + " is coarser than level " +
                                std::to_string(m));
    std::size_t cells = tree.level_size(m);
    std::vector<double> num(cells, 0.0), den(cells, 0.0);
    for (std::size_t q = 0; q < tree.level_size(quadrature_level); ++q) {
        Point x = tree.rep(quadrature_level, q);
        std::size_t p = tree.locate(m, x);
        double w = tree.atom_mass_d(quadrature_level, q);
        num[p] += f(x) * w;
        den[p] += w;
    }
    StepFunction out{m, std::vector<double>(cells)};
    for (std::size_t p = 0; p < cells; ++p) out.coeffs[p] = num[p] / den[p];
    return out;
}

}  // namespace koop
