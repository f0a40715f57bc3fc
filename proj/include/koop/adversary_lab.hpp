#pragma once

#include "koop/map_library.hpp"
#include "koop/parallel.hpp"
#include "koop/rational.hpp"
#include "koop/space_model.hpp"
#include "koop/spectral_reference.hpp"
#include "koop/tower_runner.hpp"

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace koop {

class Transcript {
public:
    explicit Transcript(std::string owner = {}) : owner_(std::move(owner)) {}
    void append(const QueryRecord& r);
    void finalize() { finalized_ = true; }
    bool finalized() const { return finalized_; }
    const std::string& owner() const { return owner_; }
    const std::vector<QueryRecord>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    // Distinct query points with their returned values.
    std::map<Point, Point> table() const;

private:
    std::string owner_;
    std::vector<QueryRecord> entries_;
    bool finalized_ = false;
};

template <class R>
struct RecordedRun {
    R output;
    Transcript transcript;
    std::uint64_t query_delta = 0;
};

// Runs the algorithm single-threaded against F with a recorder attached.
template <class Fn>
auto record_transcript(const std::string& owner, const MapOracle& F, Fn&& algorithm)
    -> RecordedRun<decltype(algorithm(F))>;

// F1 agrees with F0 on the recorded query points and with alt elsewhere; the
// declared flags are those of F0.
MapOracle lock_adversary(const MapOracle& F0, const std::vector<Transcript>& transcripts, const MapOracle& alt,
                         const DyadicTree& tree);

using SerializedAlgorithm = std::function<std::string(const MapOracle&)>;

struct LockReport {
    std::string algorithm;
    std::string output_base, output_locked;
    bool identical = false;
    std::size_t locked_points = 0;
    std::uint64_t queries = 0;
};
LockReport lock_experiment(const std::string& name, const SerializedAlgorithm& algorithm, const MapOracle& F0,
                           const MapOracle& alt, const DyadicTree& tree);

struct AdversaryPair {
    Rational under;                  // beta / 2^m
    IrrationalAngle over;            // beta / 2^m plus 2^-k at every prime k > m
};
AdversaryPair dyadic_adversary_pair(int m, long beta);
// Binary digits of theta in (0,1) after the point, `bits` of them.
std::string binary_digits(const Rational& theta, int bits);

enum class Verdict { No, Yes };
std::string to_string(Verdict v);

struct ProbeThresholds {
    Rational a, b;
    static ProbeThresholds vanishing(long p);   // 1/(8p^2), 3/(8p^2)
};

struct ProbeResult {
    int n2 = 0;
    long prime = 0;
    PointSet probes;
    double beta = 0.0;
    ProbeThresholds thresholds;
    Verdict verdict = Verdict::No;
};

PointSet prime_arc_probes(long p);
Verdict vanishing_rule(double beta, const ProbeThresholds& t);
ProbeResult prime_arc_probe(const PointSet& candidate, int n2);
ProbeResult prime_arc_probe(const PointSet& candidate, int n2, const ProbeThresholds& t);

enum class BlockKind { Cycle, GoldenRotation };
struct BlockSpec {
    BlockKind kind = BlockKind::Cycle;
    int q = 2;
    std::string describe() const;
};

struct DichotomyOptions {
    std::vector<int> schedule{4, 5, 6, 7};   // probe indices n2
    int circle_extra_levels = 7;             // indicator level on a circle block: n2 + this
    int quadrature_extra = 3;                // n1 = indicator level + this
    double eps_scale = 0.4;                  // eps = eps_scale / p
    Rational mesh{1, 1024};                  // local lattice for distances to the accepted set
};

struct DichotomyStep {
    ProbeResult probe;
    double epsilon = 0.0;
    double threshold = 0.0;
    std::vector<double> probe_residuals;
    std::uint64_t queries = 0;
};

struct DichotomyReport {
    std::vector<BlockSpec> blocks;
    std::vector<DichotomyStep> steps;
    std::vector<Verdict> verdicts() const;
    std::vector<double> beta_trace() const;
};

// Space model and map for a block union (equal component weights).
std::pair<DyadicTree, BuiltinMap> block_union_system(const std::vector<BlockSpec>& blocks, int circle_depth);

DichotomyReport dichotomy_experiment(const std::vector<BlockSpec>& blocks, const DichotomyOptions& opt = {});

// ---------------------------------------------------------------- template

template <class Fn>
auto record_transcript(const std::string& owner, const MapOracle& F, Fn&& algorithm)
    -> RecordedRun<decltype(algorithm(F))> {
    Transcript t(owner);
    const std::uint64_t before = F.query_count();
    const int saved = default_threads_value();
    set_default_threads(1);
    F.set_recorder([&t](const QueryRecord& r) { t.append(r); });
    try {
        auto out = algorithm(F);
        F.clear_recorder();
        set_default_threads(saved);
        t.finalize();
        return RecordedRun<decltype(algorithm(F))>{std::move(out), std::move(t), F.query_count() - before};
    } catch (...) {
        F.clear_recorder();
        set_default_threads(saved);
        throw;
    }
}

}  // namespace koop
