#pragma once

#include "koop/rational.hpp"
#include "koop/space_model.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace koop {

constexpr int kDefaultPrecision = 52;

// Upper bound of the modulus of continuity at dyadic radii 2^-m.
struct ModulusSpec {
    std::string name;
    std::function<double(int m)> at_dyadic;
    double operator()(int m) const { return at_dyadic(m); }
    static ModulusSpec linear(double factor = 1.0);
};

struct MapFlags {
    bool measure_preserving = false;
    std::optional<ModulusSpec> modulus;
    std::optional<double> density_sup;
};

// Irrational angle given by rational approximants with |theta - theta_k| <= 2^-k.
class IrrationalAngle {
public:
    using Generator = std::function<Rational(int k)>;
    IrrationalAngle(std::string name, Generator gen);

    static IrrationalAngle golden();

    const std::string& name() const { return name_; }
    Rational approximant(int k) const;
    double value() const { return value_; }

private:
    std::string name_;
    std::shared_ptr<std::vector<Rational>> cache_;
    Generator gen_;
    double value_ = 0.0;
};

enum class BuiltinKind { Identity, Rotation, Cycle, AtomPermutation, Halving, BlockUnion };

struct BuiltinMap {
    BuiltinKind kind = BuiltinKind::Identity;
    Rational theta;                          // rational rotation angle
    std::optional<IrrationalAngle> irrational;
    int q = 0;                               // cycle length
    std::vector<int> perm;                   // atom j -> perm[j]
    std::vector<BuiltinMap> blocks;          // per union component

    static BuiltinMap identity();
    static BuiltinMap rotation(Rational theta);
    static BuiltinMap rotation(IrrationalAngle theta);
    static BuiltinMap cycle(int q);
    static BuiltinMap permutation(std::vector<int> perm);
    static BuiltinMap halving();
    static BuiltinMap block_union(std::vector<BuiltinMap> blocks);

    std::string describe() const;
};

struct QueryRecord {
    Point query;
    Point value;
    int precision = 0;
};

// Point-evaluation oracle; the only access path to a map. Copies share the
// query counter and the recorder.
class MapOracle {
public:
    using EvalFn = std::function<Point(const Point&, int precision)>;
    using Recorder = std::function<void(const QueryRecord&)>;

    MapOracle(std::string name, EvalFn fn, MapFlags flags, std::function<void(const Point&)> validate);

    Point evaluate(const Point& x, int precision = kDefaultPrecision) const;
    std::uint64_t query_count() const { return state_->count.load(); }
    const MapFlags& flags() const { return state_->flags; }
    const std::string& name() const { return state_->name; }
    void set_recorder(Recorder r) const;
    void clear_recorder() const;

private:
    struct State {
        std::string name;
        EvalFn fn;
        MapFlags flags;
        std::function<void(const Point&)> validate;
        std::atomic<std::uint64_t> count{0};
        std::mutex mu;
        Recorder recorder;
    };
    std::shared_ptr<State> state_;
};

MapOracle make_oracle(const BuiltinMap& map, const DyadicTree& tree);

// x + theta (mod 1), summed exactly and rounded once.
double rotate_unit(double x, const Rational& theta);

double koopman_norm_bound(const MapOracle& map, double p);

struct MeasureReport {
    int level = 0;
    std::size_t samples = 0;
    double max_deviation = 0.0;
    double tolerance = 0.0;
    std::vector<double> deviations;   // per atom at the level
};

MeasureReport check_measure_preservation(const MapOracle& map, const DyadicTree& tree, int level,
                                         std::size_t samples);

}  // namespace koop
