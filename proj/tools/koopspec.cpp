#include "koop/config.hpp"
#include "koop/errors.hpp"
#include "koop/parallel.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace koop;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::string config;
    std::string out = ".";
    int threads = 1;
    int precision = 0;   // 0: keep the configured value
};

void write_file(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + p.string() + "'");
    f << text;
}

struct System {
    std::shared_ptr<DyadicTree> tree;
    std::shared_ptr<Dictionary> dict;
    std::optional<MapOracle> F;
};

System build_system(const RunConfig& cfg, int depth) {
    if (!cfg.space) throw ConfigError("config needs a 'space' section");
    if (!cfg.map) throw ConfigError("config needs a 'map' section");
    System s;
    s.tree = std::make_shared<DyadicTree>(DyadicTree::build(*cfg.space, depth));
    s.dict = make_dictionary(cfg.dictionary, *s.tree, cfg.residual.p);
    s.F = make_oracle(*cfg.map, *s.tree);
    return s;
}

const TowerConfig& tower_of(const RunConfig& cfg) {
    if (!cfg.tower) throw ConfigError("config needs a 'tower' section");
    return *cfg.tower;
}

int n1_at(const RunConfig& cfg, std::size_t i) {
    const auto& t = tower_of(cfg);
    return t.n1.empty() ? cfg.depth : t.n1[i];
}

GridSpec grid_at(const RunConfig& cfg, std::size_t n2) {
    return tower_of(cfg).paper_grid ? GridSpec::paper(static_cast<long>(n2)) : cfg.grid;
}

int max_depth(const RunConfig& cfg) {
    int d = cfg.depth;
    if (cfg.tower)
        for (int n1 : cfg.tower->n1) d = std::max(d, n1);
    return d;
}

std::optional<PointSet> reference_sample(const RunConfig& cfg) {
    if (!cfg.reference) return std::nullopt;
    return cfg.reference->spectrum.sample(cfg.reference->sample_radius);
}

json finish_sets(const RunConfig& cfg, const std::string& command, const std::vector<CompactSet>& sets) {
    json out = {{"schema_version", kSchemaVersion}, {"command", command}};
    json arr = json::array(), warnings = json::array();
    for (const auto& s : sets) {
        arr.push_back(compact_set_to_json(s));
        for (const auto& w : s.warnings) warnings.push_back(w);
    }
    out["sets"] = arr;
    out["warnings"] = warnings;
    if (!sets.empty()) {
        out["tower"] = sets.front().tower;
        out["epsilon"] = sets.front().epsilon;
    }
    if (auto ref = reference_sample(cfg)) {
        out["reference"] = cfg.reference->spectrum.describe();
        out["hausdorff_trace"] = trace_to_json(hausdorff_trace(sets, *ref));
    }
    return out;
}

int cmd_pseudospec(const RunConfig& cfg, const Globals& g) {
    const auto& t = tower_of(cfg);
    System sys = build_system(cfg, max_depth(cfg));
    std::vector<CompactSet> sets;
    for (std::size_t i = 0; i < t.n2.size(); ++i) {
        const std::size_t n2 = t.n2[i];
        const int n1 = n1_at(cfg, i);
        const GridSpec grid = grid_at(cfg, n2);
        switch (t.mode) {
            case TowerMode::Sigma2General:
                sets.push_back(gamma_base(*sys.F, *sys.dict, t.epsilon, n2, n1, grid, cfg.residual));
                break;
            case TowerMode::Sigma2Stabilized:
                sets.push_back(gamma_stabilized(*sys.F, *sys.dict, t.epsilon, n2, n1, grid, cfg.residual, t.k_min));
                break;
            case TowerMode::Sigma1Modulus: {
                double R = t.radius.value_or(static_cast<double>(n2));
                if (const auto* theta = dynamic_cast<const ThetaDictionary*>(sys.dict.get()))
                    sets.push_back(run_sigma1_modulus(*sys.F, *theta, t.epsilon, n2, grid, R, cfg.residual));
                else if (const auto* lip = dynamic_cast<const LipschitzDictionary*>(sys.dict.get()))
                    sets.push_back(run_sigma1_modulus(*sys.F, *lip, t.epsilon, n2, grid, R, cfg.residual));
                else
                    throw ConfigError("Sigma1Modulus needs a theta or lipschitz dictionary");
                break;
            }
            case TowerMode::Sigma1Markov:
                sets.push_back(markov_tower_on(*sys.F, *sys.tree, t.epsilon, n2, cfg.residual.p, grid));
                break;
            case TowerMode::ArithmeticSigma2:
            case TowerMode::ArithmeticSigma3: {
                int n0 = t.n0.empty() ? 16 : t.n0[std::min(i, t.n0.size() - 1)];
                double pr = std::round(cfg.residual.p);
                if (pr != cfg.residual.p) throw ConfigError("arithmetic towers need an integer exponent");
                sets.push_back(arithmetic_gamma(*sys.F, *sys.dict, exact_rational(t.epsilon), n2, n1, n0,
                                                static_cast<unsigned>(pr), grid, t.mode));
                break;
            }
        }
    }
    write_file(fs::path(g.out) / "pseudospec.json", dump(finish_sets(cfg, "pseudospec", sets)));
    return 0;
}

int cmd_sweep(const RunConfig& cfg, const Globals& g) {
    const auto& t = tower_of(cfg);
    System sys = build_system(cfg, max_depth(cfg));
    std::ostringstream os;
    os << "z_re,z_im,h,mode,n2,n1,err\n";
    char buf[160];
    for (std::size_t i = 0; i < t.n2.size(); ++i) {
        const std::size_t n2 = t.n2[i];
        const int n1 = n1_at(cfg, i);
        SectionResidual r(*sys.F, *sys.dict, n2, n1, cfg.residual);
        auto pts = make_grid(grid_at(cfg, n2));
        std::vector<ResidualResult> res(pts.size());
        parallel_for(pts.size(), [&](std::size_t k) { res[k] = r(pts[k].to_complex()); });
        for (std::size_t k = 0; k < pts.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%s,%zu,%d,%.17g\n", to_double(pts[k].re), to_double(pts[k].im),
                          res[k].value, to_string(cfg.residual.mode).c_str(), n2, n1, res[k].error_bar);
            os << buf;
        }
    }
    write_file(fs::path(g.out) / "sweep.csv", os.str());
    return 0;
}

int cmd_markov(const RunConfig& cfg, const Globals& g) {
    if (!cfg.markov) throw ConfigError("config needs a 'markov' section");
    const auto& m = *cfg.markov;
    MarkovSystem sys = markov_system(m.spec);
    MapOracle F = make_oracle(sys.map, *sys.tree);
    std::vector<CompactSet> sets;
    for (std::size_t n : m.n) sets.push_back(markov_tower_on(F, *sys.tree, m.epsilon, n, m.p, cfg.grid));
    json out = finish_sets(cfg, "markov", sets);
    json blocks = json::array();
    for (const auto& b : sys.invariant.blocks) blocks.push_back(b);
    out["invariant_blocks"] = blocks;
    out["spec"] = markov_spec_to_json(m.spec);
    write_file(fs::path(g.out) / "markov.json", dump(out));
    return 0;
}

int cmd_adversary(const RunConfig& cfg, const Globals& g) {
    if (!cfg.adversary) throw ConfigError("config needs an 'adversary' section");
    const auto& a = *cfg.adversary;
    json out;
    if (a.experiment == "dichotomy") {
        out = dichotomy_to_json(dichotomy_experiment(a.blocks, a.dichotomy));
    } else {
        const auto& t = tower_of(cfg);
        System sys = build_system(cfg, max_depth(cfg));
        MapOracle alt = make_oracle(*a.alt, *sys.tree);
        AlgorithmContext ctx{sys.tree, sys.dict, cfg.residual, t.epsilon, t.n2.front(), n1_at(cfg, 0), grid_at(cfg, t.n2.front())};
        std::vector<LockReport> reps;
        for (const auto& name : a.algorithms)
            reps.push_back(lock_experiment(name, base_algorithm(name, ctx), *sys.F, alt, *sys.tree));
        out = lock_reports_to_json(reps);
    }
    out["schema_version"] = kSchemaVersion;
    write_file(fs::path(g.out) / "adversary.json", dump(out));
    return 0;
}

int cmd_verify(const RunConfig& cfg, const Globals& g) {
    const auto& t = tower_of(cfg);
    auto ref = reference_sample(cfg);
    if (!ref) throw ConfigError("verify needs a 'reference' section");
    System sys = build_system(cfg, max_depth(cfg));
    json rows = json::array();
    bool all = true;
    for (std::size_t i = 0; i < t.n2.size(); ++i) {
        const std::size_t n2 = t.n2[i];
        const GridSpec grid = grid_at(cfg, n2);
        CompactSet s = gamma_base(*sys.F, *sys.dict, t.epsilon, n2, n1_at(cfg, i), grid, cfg.residual);
        double bound = 2.0 / static_cast<double>(n2) + to_double(grid.mesh) + cfg.reference->sample_radius;
        double d = s.empty() ? std::numeric_limits<double>::infinity() : hausdorff(s.as_points(), *ref);
        bool ok = d <= bound;
        all = all && ok;
        rows.push_back({{"n2", n2}, {"hausdorff", std::isfinite(d) ? json(d) : json(nullptr)}, {"bound", bound}, {"within", ok}});
    }
    json out = {{"schema_version", kSchemaVersion}, {"command", "verify"}, {"rows", rows}, {"all_within", all}};
    write_file(fs::path(g.out) / "verify.json", dump(out));
    return 0;
}

int cmd_duals(const RunConfig& cfg, const Globals& g) {
    System sys = build_system(cfg, max_depth(cfg));
    std::size_t n = cfg.tower ? cfg.tower->n2.front() : sys.dict->size();
    std::ostringstream d;
    sys.dict->dump_csv(d, n);
    write_file(fs::path(g.out) / "dictionary.csv", d.str());
    DualSystem duals = build_duals(*sys.dict, n);
    std::ostringstream os;
    os << "dual,primal,coefficient\n";
    char buf[96];
    for (int k = 0; k < duals.coeff.outerSize(); ++k)
        for (SpMatD::InnerIterator it(duals.coeff, k); it; ++it) {
            std::snprintf(buf, sizeof buf, "%d,%ld,%.17g\n", k, static_cast<long>(it.row()), it.value());
            os << buf;
        }
    write_file(fs::path(g.out) / "duals.csv", os.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Koopman pseudospectra towers"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "JSON run configuration")->required();
    app.add_option("--out", g.out, "output directory");
    app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--precision", g.precision, "oracle precision in bits")->check(CLI::Range(1, 200));

    using Cmd = int (*)(const RunConfig&, const Globals&);
    std::vector<std::pair<CLI::App*, Cmd>> cmds{
        {app.add_subcommand("pseudospec", "tower set sequence"), cmd_pseudospec},
        {app.add_subcommand("sweep", "residual landscape CSV"), cmd_sweep},
        {app.add_subcommand("adversary", "locking and dichotomy experiments"), cmd_adversary},
        {app.add_subcommand("markov", "single-limit Markov tower"), cmd_markov},
        {app.add_subcommand("verify", "Hausdorff comparison against a reference"), cmd_verify},
        {app.add_subcommand("duals", "dictionary and dual dumps"), cmd_duals},
    };

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        set_default_threads(g.threads);
        RunConfig cfg = load_config(g.config);
        if (g.precision > 0) cfg.residual.precision = g.precision;
        for (auto& [sub, fn] : cmds)
            if (sub->parsed()) return fn(cfg, g);
    } catch (const Error& e) {
        std::cerr << "koopspec: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "koopspec: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
