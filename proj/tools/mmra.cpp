// mmra: command-line driver.
//
//   mmra synth    --preset complementary --seed 1 --out data/
//   mmra train    --config run.json [--strategy multi_agent] [--epochs 30] [--seed 1]
//   mmra repeat   --config run.json [--seeds 1,2,3,4,5]
//   mmra compare  runs/a runs/b ... [--out report]
//   mmra zeroday  --config run.json --holdout Shade [--tau 0.7]
//   mmra export   runs/<name>
//
// Exit codes: 0 ok, 2 configuration, 3 data, 4 runtime.

#include "mmra/config.hpp"
#include "mmra/exports.hpp"
#include "mmra/harness.hpp"
#include "mmra/log.hpp"
#include "mmra/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

using namespace mmra;

struct Overrides {
    std::string config_path;
    std::string strategy;
    std::string name;
    std::string output_dir;
    std::string agent_mode;
    std::string calibration;
    int epochs = 0;
    std::vector<std::uint64_t> seeds;
    double tau = 0.0;

    void add_to(CLI::App* cmd, bool multi_seed) {
        cmd->add_option("-c,--config", config_path, "run configuration (JSON)");
        cmd->add_option("--strategy", strategy, "static_only|dynamic_only|network_only|early_fusion|late_fusion|single_agent|multi_agent");
        cmd->add_option("--name", name, "run name");
        cmd->add_option("--output-dir", output_dir, "parent directory of run directories");
        cmd->add_option("--agent-mode", agent_mode, "fallback|llm");
        cmd->add_option("--calibration", calibration, "auto|identity|temperature|vector|ucb");
        cmd->add_option("--epochs", epochs, "training epochs");
        if (multi_seed)
            cmd->add_option("--seeds", seeds, "seed list")->delimiter(',');
        else
            cmd->add_option("--seed", seeds, "seed")->expected(1);
    }

    RunConfig resolve() const {
        RunConfig c = config_path.empty() ? run_config_from_json_text("{}") : load_run_config(config_path);
        if (!strategy.empty()) c.strategy = strategy_from_string(strategy);
        if (!name.empty()) c.name = name;
        if (!output_dir.empty()) c.output_dir = output_dir;
        if (!agent_mode.empty()) c.agents.mode = agent_mode_from_string(agent_mode);
        if (!calibration.empty()) c.calibration.mode = calibration_mode_from_string(calibration);
        if (epochs != 0) c.epochs = epochs;
        if (!seeds.empty()) c.seeds = seeds;
        if (tau != 0.0) c.zeroday.tau = tau;
        c.validate();
        return c;
    }
};

void print_final(const RunResult& r) {
    const auto& e = r.final_epoch();
    std::printf("%s seed %llu: macro_f1 %.4f accuracy %.4f ece %.4f nll %.4f\n", std::string(to_string(r.strategy)).c_str(),
                static_cast<unsigned long long>(r.seed), e.macro_f1, e.accuracy, e.ece, e.nll);
}

int run(int argc, char** argv) {
    CLI::App app{"Multimodal multi-agent ransomware family attribution"};
    app.require_subcommand(1);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "debug|info|warn|error|off");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic tri-modal dataset as CSV");
    std::string synth_config, synth_preset = "complementary", synth_out = "data";
    std::uint64_t synth_seed = 1;
    synth->add_option("--config", synth_config, "synthetic data description (JSON)");
    synth->add_option("--preset", synth_preset, "complementary|zeroday_near|zeroday_far");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--out", synth_out, "output directory");

    Overrides train_o, repeat_o, zero_o;
    auto* train = app.add_subcommand("train", "train one strategy with one seed");
    train_o.add_to(train, false);
    auto* repeat = app.add_subcommand("repeat", "train one strategy over every seed");
    repeat_o.add_to(repeat, true);

    auto* compare = app.add_subcommand("compare", "Wilcoxon and Friedman tests over repeat runs");
    std::vector<std::string> compare_dirs;
    std::string compare_out;
    compare->add_option("runs", compare_dirs, "repeat run directories")->required()->expected(2, -1);
    compare->add_option("--out", compare_out, "write <out>.md and <out>.json");

    auto* zeroday = app.add_subcommand("zeroday", "leave-one-family-out evaluation with abstention");
    zero_o.add_to(zeroday, false);
    std::string holdout;
    zeroday->add_option("--holdout", holdout, "family to hold out")->required();
    zeroday->add_option("--tau", zero_o.tau, "abstention threshold");

    auto* exp = app.add_subcommand("export", "write CSV exports of a run directory");
    std::string export_dir;
    exp->add_option("run", export_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (log_level == "debug") log::set_level(log::Level::debug);
    else if (log_level == "info") log::set_level(log::Level::info);
    else if (log_level == "warn") log::set_level(log::Level::warn);
    else if (log_level == "error") log::set_level(log::Level::error);
    else if (log_level == "off") log::set_level(log::Level::off);
    else throw ConfigError("unknown log level '" + log_level + "'");

    if (*synth) {
        SynthConfig sc = synth_config.empty() ? synth_config_from_json_text("\"" + synth_preset + "\"")
                                              : load_synth_config(synth_config);
        const auto tables = synth_generate(sc, synth_seed);
        std::filesystem::create_directories(synth_out);
        for (const auto& t : tables) {
            const auto path = std::filesystem::path(synth_out) / (std::string(to_string(t.modality)) + ".csv");
            write_modality_csv(path, t);
            std::printf("%s: %zu rows\n", path.string().c_str(), t.rows());
        }
        return 0;
    }
    if (*train) {
        const auto cfg = train_o.resolve();
        const auto dir = cfg.output_dir / cfg.name;
        const auto r = run_strategy(cfg, cfg.seeds.front(), dir);
        print_final(r);
        export_reports(dir);
        std::printf("run directory: %s\n", dir.string().c_str());
        return 0;
    }
    if (*repeat) {
        const auto cfg = repeat_o.resolve();
        const auto dir = cfg.output_dir / cfg.name;
        const auto s = run_repeats(cfg, dir);
        for (auto seed : s.seeds) export_reports(dir / ("seed_" + std::to_string(seed)));
        std::vector<RepeatSummary> rows{s};
        std::cout << repeat_table(rows);
        return 0;
    }
    if (*compare) {
        std::vector<RepeatSummary> runs;
        for (const auto& d : compare_dirs) runs.push_back(load_repeat_summary(d));
        const auto report = compare_strategies(runs);
        std::cout << repeat_table(runs) << '\n' << report.markdown();
        if (!compare_out.empty()) {
            std::ofstream(compare_out + ".md") << repeat_table(runs) << '\n' << report.markdown();
            std::ofstream(compare_out + ".json") << report.json() << '\n';
        }
        return 0;
    }
    if (*zeroday) {
        const auto cfg = zero_o.resolve();
        const auto dir = cfg.output_dir / cfg.name;
        const auto rep = zero_day_eval(cfg, holdout, cfg.seeds.front(), dir);
        std::cout << "| Family | Best F1 | Coverage % | Abstention % | Accuracy % |\n|---|---|---|---|---|\n"
                  << rep.table_row() << '\n';
        std::printf("hash audit: %zu hashes, %zu from the holdout family\n", rep.audited_hashes, rep.leaked_hashes);
        return rep.leaked_hashes == 0 ? 0 : 4;
    }
    if (*exp) {
        const auto res = export_reports(export_dir);
        std::printf("%d epochs exported%s\n", res.epochs, res.complete ? "" : " (run incomplete)");
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const mmra::ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const mmra::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const mmra::ShapeError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return 4;
    }
}
