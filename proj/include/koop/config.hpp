#pragma once

#include "koop/adversary_lab.hpp"
#include "koop/dictionary.hpp"
#include "koop/map_library.hpp"
#include "koop/markov_expectation.hpp"
#include "koop/residual_engine.hpp"
#include "koop/space_model.hpp"
#include "koop/spectral_reference.hpp"
#include "koop/tower_runner.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace koop {

using json = nlohmann::json;

constexpr int kSchemaVersion = 1;

struct DictionaryConfig {
    std::string kind = "haar";          // haar | indicator | lipschitz | theta
    std::optional<std::size_t> count;   // haar: elements (default: all at the tree depth)
    int level = 0;                      // indicator / lipschitz level, theta max level
    Rational rho{1, 2};
    int pstar = 1;
};

struct TowerConfig {
    TowerMode mode = TowerMode::Sigma2General;
    double epsilon = 0.5;
    std::vector<std::size_t> n2;
    std::vector<int> n1;                // one per n2; empty: tree depth
    std::vector<int> n0;                // arithmetic modes
    int k_min = 0;                      // stabilized mode
    std::optional<double> radius;       // Sigma1 radius R (default n)
    bool paper_grid = false;            // mesh 1/n2, radius n2 per step
};

struct ReferenceConfig {
    ReferenceSpectrum spectrum;
    double sample_radius = 1.0 / 64;
};

struct AdversaryConfig {
    std::string experiment = "lock";     // lock | dichotomy
    std::vector<BlockSpec> blocks;
    DichotomyOptions dichotomy;
    std::optional<BuiltinMap> alt;       // lock: behaviour off the transcript
    std::vector<std::string> algorithms{"gamma_base"};
};

struct MarkovConfig {
    MarkovSpec spec;
    double epsilon = 0.3;
    std::vector<std::size_t> n{4, 8, 16};
    double p = 2.0;
};

struct RunConfig {
    std::optional<SpaceDesc> space;
    int depth = 8;
    std::optional<BuiltinMap> map;
    DictionaryConfig dictionary;
    ResidualOptions residual;
    std::optional<TowerConfig> tower;
    GridSpec grid;
    std::optional<ReferenceConfig> reference;
    std::optional<MarkovConfig> markov;
    std::optional<AdversaryConfig> adversary;
    std::uint64_t seed = 1;
};

// Strict loaders: unknown keys, wrong types and missing required fields raise ConfigError.
RunConfig parse_config(const json& j);
RunConfig load_config(const std::string& path);

SpaceDesc parse_space(const json& j);
json space_to_json(const SpaceDesc& s);
BuiltinMap parse_map(const json& j);
json map_to_json(const BuiltinMap& m);
ReferenceConfig parse_reference(const json& j);
MarkovSpec parse_markov_spec(const json& j);
json markov_spec_to_json(const MarkovSpec& s);
BlockSpec parse_block(const json& j);

std::unique_ptr<Dictionary> make_dictionary(const DictionaryConfig& cfg, const DyadicTree& tree, double p);

// ---------------------------------------------------------------- base algorithms

// Everything a base algorithm needs besides the oracle.
struct AlgorithmContext {
    std::shared_ptr<const DyadicTree> tree;
    std::shared_ptr<const Dictionary> dict;
    ResidualOptions residual;
    double epsilon = 0.5;
    std::size_t n2 = 4;
    int n1 = 2;
    GridSpec grid;
};

// gamma_base, gamma_stabilized, sigma_ap_cascade, sigma1_modulus, markov_tower,
// arithmetic_sigma2, arithmetic_sigma3, residual_sweep
const std::vector<std::string>& base_algorithm_names();
// Runs one base algorithm and serializes its output.
SerializedAlgorithm base_algorithm(const std::string& name, const AlgorithmContext& ctx);

// ---------------------------------------------------------------- outputs

json complex_set_json(const std::vector<ComplexQ>& pts);
json compact_set_to_json(const CompactSet& s);
CompactSet compact_set_from_json(const json& j);
bool same_set(const CompactSet& a, const CompactSet& b);

json trace_to_json(const HausdorffTrace& t);
json dichotomy_to_json(const DichotomyReport& r);
json lock_reports_to_json(const std::vector<LockReport>& r);

// Canonical text form used for byte comparisons and files.
std::string dump(const json& j);

}  // namespace koop
