#include "koop/map_library.hpp"

#include "koop/errors.hpp"

#include <cmath>
#include <sstream>

namespace koop {

ModulusSpec ModulusSpec::linear(double factor) {
    std::ostringstream os;
    os << factor << "*t";
    return ModulusSpec{os.str(), [factor](int m) { return factor * std::ldexp(1.0, -m); }};
}

IrrationalAngle::IrrationalAngle(std::string name, Generator gen)
    : name_(std::move(name)), cache_(std::make_shared<std::vector<Rational>>()), gen_(std::move(gen)) {
    for (int k = 0; k <= 72; ++k) cache_->push_back(gen_(k));
    value_ = to_double(cache_->back());
}

Rational IrrationalAngle::approximant(int k) const {
    if (k < 0) k = 0;
    if (static_cast<std::size_t>(k) < cache_->size()) return (*cache_)[static_cast<std::size_t>(k)];
    return gen_(k);
}

IrrationalAngle IrrationalAngle::golden() {
    // Convergents F_j/F_{j+1} of (sqrt5-1)/2; the error is below 1/(F_{j+1} F_{j+2}).
    return IrrationalAngle("golden", [](int k) {
        Integer a = 1, b = 1, c = 2;  // F_j, F_{j+1}, F_{j+2}
        Integer target = Integer(1) << k;
        while (b * c < target) {
            Integer n = b + c;
            a = b;
            b = c;
            c = n;
        }
        return Rational(a, b);
    });
}

BuiltinMap BuiltinMap::identity() { return BuiltinMap{}; }

BuiltinMap BuiltinMap::rotation(Rational theta) {
    BuiltinMap m;
    m.kind = BuiltinKind::Rotation;
    Integer f = floor_int(theta);
    m.theta = theta - Rational(f);
    return m;
}

BuiltinMap BuiltinMap::rotation(IrrationalAngle theta) {
    BuiltinMap m;
    m.kind = BuiltinKind::Rotation;
    m.irrational = std::move(theta);
    return m;
}

BuiltinMap BuiltinMap::cycle(int q) {
    if (q < 1) throw ConfigError("cycle length must be positive");
    BuiltinMap m;
    m.kind = BuiltinKind::Cycle;
    m.q = q;
    return m;
}

BuiltinMap BuiltinMap::permutation(std::vector<int> perm) {
    std::vector<int> seen(perm.size(), 0);
    for (int v : perm) {
        if (v < 0 || static_cast<std::size_t>(v) >= perm.size() || seen[static_cast<std::size_t>(v)]++)
            throw ConfigError("not a permutation");
    }
    BuiltinMap m;
    m.kind = BuiltinKind::AtomPermutation;
    m.perm = std::move(perm);
    return m;
}

BuiltinMap BuiltinMap::halving() {
    BuiltinMap m;
    m.kind = BuiltinKind::Halving;
    return m;
}

BuiltinMap BuiltinMap::block_union(std::vector<BuiltinMap> blocks) {
    BuiltinMap m;
    m.kind = BuiltinKind::BlockUnion;
    m.blocks = std::move(blocks);
    return m;
}

std::string BuiltinMap::describe() const {
    switch (kind) {
        case BuiltinKind::Identity: return "identity";
        case BuiltinKind::Rotation:
            return "rotation(" + (irrational ? irrational->name() : to_string(theta)) + ")";
        case BuiltinKind::Cycle: return "cycle(" + std::to_string(q) + ")";
        case BuiltinKind::AtomPermutation: {
            std::string s = "permutation(";
            for (std::size_t i = 0; i < perm.size(); ++i) s += (i ? "," : "") + std::to_string(perm[i]);
            return s + ")";
        }
        case BuiltinKind::Halving: return "halving";
        case BuiltinKind::BlockUnion: {
            std::string s = "blocks(";
            for (std::size_t i = 0; i < blocks.size(); ++i) s += (i ? "," : "") + blocks[i].describe();
            return s + ")";
        }
    }
    return "?";
}

MapOracle::MapOracle(std::string name, EvalFn fn, MapFlags flags, std::function<void(const Point&)> validate)
    : state_(std::make_shared<State>()) {
    state_->name = std::move(name);
    state_->fn = std::move(fn);
    state_->flags = std::move(flags);
    state_->validate = std::move(validate);
}

Point MapOracle::evaluate(const Point& x, int precision) const {
    if (precision < 0) throw ConfigError("negative oracle precision");
    state_->validate(x);
    Point y = state_->fn(x, precision);
    state_->count.fetch_add(1);
    if (state_->recorder) {
        std::lock_guard<std::mutex> lock(state_->mu);
        if (state_->recorder) state_->recorder(QueryRecord{x, y, precision});
    }
    return y;
}

void MapOracle::set_recorder(Recorder r) const {
    std::lock_guard<std::mutex> lock(state_->mu);
    state_->recorder = std::move(r);
}

void MapOracle::clear_recorder() const {
    std::lock_guard<std::mutex> lock(state_->mu);
    state_->recorder = nullptr;
}

double rotate_unit(double x, const Rational& theta) {
    // x is dyadic; theta = P/Q with 0 <= P < Q.
    const Integer& P = numerator(theta);
    const Integer& Q = denominator(theta);
    int e = 0;
    double m = std::frexp(x, &e);
    if (x != 0.0 && Q < (Integer(1) << 60) && e > -8) {
        auto mant = static_cast<long long>(std::ldexp(m, 53));
        int L = 53 - e;  // x = mant / 2^L
        while (L > 0 && (mant & 1) == 0) {
            mant >>= 1;
            --L;
        }
        if (L <= 60) {
            using i128 = __int128;
            auto q = static_cast<i128>(static_cast<unsigned long long>(Q));
            auto p = static_cast<i128>(static_cast<unsigned long long>(P));
            i128 den = q << L;
            i128 num = static_cast<i128>(mant) * q + (p << L);
            i128 r = num % den;
            long double v = static_cast<long double>(r) / static_cast<long double>(den);
            double out = static_cast<double>(v);
            return out >= 1.0 ? 0.0 : out;
        }
    }
    Rational s = exact_rational(x) + theta;
    s -= Rational(floor_int(s));
    double out = to_double(s);
    return out >= 1.0 ? 0.0 : out;
}

namespace {

struct Domain {
    std::vector<SpaceKind> kinds;
    std::vector<std::size_t> atom_counts;
    std::vector<std::vector<Rational>> masses;
};

Domain domain_of(const DyadicTree& tree) {
    Domain d;
    for (std::uint32_t c = 0; c < tree.component_count(); ++c) {
        d.kinds.push_back(tree.component_kind(c));
        const SpaceDesc& s = tree.space().kind == SpaceKind::DisjointUnion ? tree.space().components[c] : tree.space();
        d.atom_counts.push_back(s.masses.size());
        d.masses.push_back(s.masses);
    }
    return d;
}

using Eval = std::function<Point(const Point&, int)>;

struct Piece {
    Eval fn;
    MapFlags flags;
};

Piece component_piece(const BuiltinMap& map, SpaceKind kind, const std::vector<Rational>& masses) {
    Piece pc;
    switch (map.kind) {
        case BuiltinKind::Identity:
            pc.fn = [](const Point& x, int) { return x; };
            pc.flags.measure_preserving = true;
            pc.flags.modulus = ModulusSpec::linear(1.0);
            pc.flags.density_sup = 1.0;
            return pc;
        case BuiltinKind::Rotation: {
            if (kind != SpaceKind::Circle && kind != SpaceKind::UnitInterval)
                throw ConfigError("rotation needs an interval or circle component");
            if (map.irrational) {
                IrrationalAngle a = *map.irrational;
                pc.fn = [a](const Point& x, int precision) {
                    Point y = x;
                    y.x = rotate_unit(x.x, a.approximant(precision + 1));
                    return y;
                };
            } else {
                Rational th = map.theta;
                pc.fn = [th](const Point& x, int) {
                    Point y = x;
                    y.x = rotate_unit(x.x, th);
                    return y;
                };
            }
            pc.flags.measure_preserving = true;
            pc.flags.density_sup = 1.0;
            if (kind == SpaceKind::Circle) pc.flags.modulus = ModulusSpec::linear(1.0);
            return pc;
        }
        case BuiltinKind::Cycle: {
            if (kind != SpaceKind::FiniteAtoms || masses.size() != static_cast<std::size_t>(map.q))
                throw ConfigError("cycle(" + std::to_string(map.q) + ") needs exactly " + std::to_string(map.q) + " atoms");
            for (const auto& m : masses)
                if (m != masses.front()) throw ConfigError("cycle needs atoms of equal mass");
            auto q = static_cast<std::uint32_t>(map.q);
            pc.fn = [q](const Point& x, int) {
                Point y = x;
                y.atom = (x.atom + 1) % q;
                return y;
            };
            pc.flags.measure_preserving = true;
            pc.flags.modulus = ModulusSpec::linear(1.0);
            pc.flags.density_sup = 1.0;
            return pc;
        }
        case BuiltinKind::AtomPermutation: {
            if (kind != SpaceKind::FiniteAtoms || masses.size() != map.perm.size())
                throw ConfigError("permutation length must match the atom count");
            bool mp = true;
            Rational worst = 0;
            for (std::size_t j = 0; j < masses.size(); ++j) {
                const Rational& target = masses[static_cast<std::size_t>(map.perm[j])];
                if (target != masses[j]) mp = false;
                Rational ratio = masses[j] / target;
                if (ratio > worst) worst = ratio;
            }
            std::vector<int> perm = map.perm;
            pc.fn = [perm](const Point& x, int) {
                Point y = x;
                y.atom = static_cast<std::uint32_t>(perm[x.atom]);
                return y;
            };
            pc.flags.measure_preserving = mp;
            pc.flags.modulus = ModulusSpec::linear(1.0);
            pc.flags.density_sup = to_double(worst);
            return pc;
        }
        case BuiltinKind::Halving:
            if (kind != SpaceKind::UnitInterval) throw ConfigError("halving needs an interval component");
            pc.fn = [](const Point& x, int) {
                Point y = x;
                y.x = x.x * 0.5;
                return y;
            };
            pc.flags.measure_preserving = false;
            pc.flags.modulus = ModulusSpec::linear(0.5);
            pc.flags.density_sup = 2.0;
            return pc;
        case BuiltinKind::BlockUnion:
            throw ConfigError("nested block unions are not supported");
    }
    throw ConfigError("unknown map kind");
}

}  // namespace

MapOracle make_oracle(const BuiltinMap& map, const DyadicTree& tree) {
    Domain d = domain_of(tree);
    auto validate = [d](const Point& x) {
        if (x.comp >= d.kinds.size()) throw PointOutsideSpace("component " + std::to_string(x.comp));
        switch (d.kinds[x.comp]) {
            case SpaceKind::UnitInterval:
                if (!(x.x >= 0.0 && x.x <= 1.0)) throw PointOutsideSpace("interval point " + to_string(x));
                break;
            case SpaceKind::Circle:
                if (!(x.x >= 0.0 && x.x < 1.0)) throw PointOutsideSpace("circle point " + to_string(x));
                break;
            default:
                if (x.atom >= d.atom_counts[x.comp]) throw PointOutsideSpace("atom point " + to_string(x));
        }
    };

    std::vector<Piece> pieces;
    if (map.kind == BuiltinKind::BlockUnion) {
        if (map.blocks.size() != d.kinds.size())
            throw ConfigError("block union needs one map per component");
        for (std::size_t c = 0; c < d.kinds.size(); ++c)
            pieces.push_back(component_piece(map.blocks[c], d.kinds[c], d.masses[c]));
    } else {
        for (std::size_t c = 0; c < d.kinds.size(); ++c) pieces.push_back(component_piece(map, d.kinds[c], d.masses[c]));
    }

    MapFlags flags;
    flags.measure_preserving = true;
    bool have_mod = true, have_density = true;
    double density = 0.0;
    for (const auto& pc : pieces) {
        flags.measure_preserving = flags.measure_preserving && pc.flags.measure_preserving;
        have_mod = have_mod && pc.flags.modulus.has_value();
        have_density = have_density && pc.flags.density_sup.has_value();
        if (pc.flags.density_sup) density = std::max(density, *pc.flags.density_sup);
    }
    if (have_density) flags.density_sup = density;
    if (have_mod) {
        std::vector<ModulusSpec> mods;
        for (const auto& pc : pieces) mods.push_back(*pc.flags.modulus);
        if (mods.size() == 1) {
            flags.modulus = mods.front();
        } else {
            flags.modulus = ModulusSpec{"max", [mods](int m) {
                                            double v = 0.0;
                                            for (const auto& md : mods) v = std::max(v, md(m));
                                            return v;
                                        }};
        }
    }

    std::vector<Eval> fns;
    for (auto& pc : pieces) fns.push_back(pc.fn);
    Eval fn = [fns](const Point& x, int precision) { return fns[x.comp](x, precision); };
    return MapOracle(map.describe(), std::move(fn), std::move(flags), std::move(validate));
}

double koopman_norm_bound(const MapOracle& map, double p) {
    if (!(p > 0.0)) throw ConfigError("exponent must be positive");
    if (map.flags().measure_preserving) return 1.0;
    if (map.flags().density_sup) return std::pow(*map.flags().density_sup, 1.0 / p);
    throw UnknownDensity("map '" + map.name() + "' declares neither measure preservation nor a density bound");
}

MeasureReport check_measure_preservation(const MapOracle& map, const DyadicTree& tree, int level,
                                         std::size_t samples) {
    if (level > tree.depth() || level < 0) throw LevelOutOfRange("level " + std::to_string(level));
    if (samples == 0) throw ConfigError("need at least one sample");
    const std::size_t n = tree.level_size(level);
    std::vector<double> est(n, 0.0);
    for (std::uint32_t c = 0; c < tree.component_count(); ++c) {
        double w = to_double(tree.component_weight(c));
        if (tree.component_kind(c) == SpaceKind::FiniteAtoms) {
            const SpaceDesc& s = tree.space().kind == SpaceKind::DisjointUnion ? tree.space().components[c] : tree.space();
            for (std::size_t a = 0; a < s.masses.size(); ++a) {
                Point y = map.evaluate(Point::atom_at(static_cast<std::uint32_t>(a), c));
                est[tree.locate(level, y)] += w * to_double(s.masses[a]);
            }
        } else {
            double ws = w / static_cast<double>(samples);
            for (std::size_t s = 0; s < samples; ++s) {
                double x = (static_cast<double>(s) + 0.5) / static_cast<double>(samples);
                Point y = map.evaluate(Point::at(x, c));
                est[tree.locate(level, y)] += ws;
            }
        }
    }
    MeasureReport r;
    r.level = level;
    r.samples = samples;
    r.tolerance = 3.0 / std::sqrt(static_cast<double>(samples));
    r.deviations.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        r.deviations[i] = std::abs(est[i] - tree.atom_mass_d(level, i));
        r.max_deviation = std::max(r.max_deviation, r.deviations[i]);
    }
    return r;
}

}  // namespace koop
