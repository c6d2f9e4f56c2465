#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trnood/harness.hpp"
#include "trnood/selfcheck.hpp"

namespace {

using namespace trnood;

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto comma = s.find(',', pos);
        const auto tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        std::size_t used = 0;
        try {
            out.push_back(std::stoull(tok, &used));
        } catch (const std::exception&) {
            used = 0;
        }
        if (tok.empty() || used != tok.size()) throw ConfigError("--seeds: bad seed '" + tok + "'");
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Text-rich network OOD benchmark toolkit"};
    app.require_subcommand(1);
    std::string config, out, seeds, fixture_kind = "trend";
    bool force = false;
    std::uint64_t fixture_seed = 0;

    auto add_common = [&](CLI::App* sub, bool need_config) {
        auto* opt = sub->add_option("--config", config, "experiment config (TOML)");
        if (need_config) opt->required();
        sub->add_option("--out", out, "output directory (overrides run.out)");
        sub->add_option("--seeds", seeds, "comma-separated run seeds (overrides run.seeds)");
        sub->add_flag("--force", force, "accept inputs written under a different config hash");
    };
    auto* gen = app.add_subcommand("gen-shifts", "generate ID/OOD splits");
    auto* train = app.add_subcommand("train", "train models on every ID graph");
    auto* eval = app.add_subcommand("eval", "score, evaluate and aggregate");
    auto* run = app.add_subcommand("run", "gen-shifts, train and eval in sequence");
    auto* check = app.add_subcommand("selfcheck", "gradient, metric and determinism checks");
    for (auto* s : {gen, train, eval, run}) add_common(s, true);
    add_common(check, false);
    auto* fix = app.add_subcommand("make-fixture", "write a synthetic dataset directory");
    fix->add_option("kind", fixture_kind, "trend | cora_like")->check(CLI::IsMember({"trend", "cora_like"}));
    fix->add_option("--out", out, "output directory")->required();
    fix->add_option("--seed", fixture_seed, "fixture seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (fix->parsed()) {
            cmd_make_fixture(fixture_kind, fixture_seed, out);
            std::cout << "wrote " << fixture_kind << " fixture to " << out << "\n";
            return kExitOk;
        }
        if (check->parsed()) {
            auto results = run_selfcheck();
            if (!config.empty()) {
                results.push_back(timed("dataset loader", [&] {
                    const auto cfg = load_config(config);
                    const auto g = load_dataset(cfg);
                    validate(g);
                    return std::pair{true, "n=" + std::to_string(g.n) + " d=" + std::to_string(g.dim()) +
                                               " edges=" + std::to_string(g.edges.size())};
                }));
            }
            return print_checks(results, std::cout) ? kExitOk : kExitSelfcheck;
        }

        const auto cfg = load_config(config);
        RunOptions opts;
        if (!out.empty()) opts.out = out;
        if (!seeds.empty()) opts.seeds = parse_seeds(seeds);
        opts.force = force;
        if (gen->parsed()) return cmd_gen_shifts(cfg, opts);
        if (train->parsed()) return cmd_train(cfg, opts);
        if (eval->parsed()) return cmd_eval(cfg, opts);
        int rc = cmd_gen_shifts(cfg, opts);
        if (rc == kExitOk) rc = cmd_train(cfg, opts);
        if (rc == kExitOk) rc = cmd_eval(cfg, opts);
        return rc;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
