#include "mmra/harness.hpp"

#include "mmra/log.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace mmra {

using ojson = nlohmann::ordered_json;

MeanStd mean_std(std::span<const double> values) {
    MeanStd r;
    if (values.empty()) return r;
    for (double v : values) r.mean += v;
    r.mean /= static_cast<double>(values.size());
    if (values.size() < 2) return r;
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return r;
}

std::string format_mean_std(const MeanStd& v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f ± %.*f", digits, v.mean, digits, v.std);
    return buf;
}

RepeatSummary run_repeats(const RunConfig& config, const std::filesystem::path& dir) {
    if (config.seeds.size() < 2) throw ConfigError("repeat needs at least two seeds");
    RepeatSummary s;
    s.strategy = config.strategy;
    for (auto seed : config.seeds) {
        log::info("run " + std::string(to_string(config.strategy)) + " seed " + std::to_string(seed));
        const auto r = run_strategy(config, seed, dir.empty() ? dir : dir / ("seed_" + std::to_string(seed)));
        s.seeds.push_back(seed);
        s.macro_f1.push_back(r.final_epoch().macro_f1);
        s.accuracy.push_back(r.final_epoch().accuracy);
        s.ece.push_back(r.final_epoch().ece);
    }
    if (!dir.empty()) write_repeat_summary(dir / "repeat_summary.json", s);
    return s;
}

void write_repeat_summary(const std::filesystem::path& path, const RepeatSummary& s) {
    ojson j;
    j["strategy"] = std::string(to_string(s.strategy));
    j["seeds"] = s.seeds;
    j["macro_f1"] = s.macro_f1;
    j["accuracy"] = s.accuracy;
    j["ece"] = s.ece;
    auto stats = [](const MeanStd& m) { return ojson{{"mean", m.mean}, {"std", m.std}}; };
    j["mean_std"] = {{"macro_f1", stats(s.macro_f1_stats())},
                     {"accuracy", stats(s.accuracy_stats())},
                     {"ece", stats(s.ece_stats())}};
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

RepeatSummary load_repeat_summary(const std::filesystem::path& path) {
    auto file = std::filesystem::is_directory(path) ? path / "repeat_summary.json" : path;
    std::ifstream in(file);
    if (!in) throw DataError("cannot read " + file.string());
    try {
        const auto j = nlohmann::json::parse(in);
        RepeatSummary s;
        s.strategy = strategy_from_string(j.at("strategy").get<std::string>());
        s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        s.macro_f1 = j.at("macro_f1").get<std::vector<double>>();
        s.accuracy = j.at("accuracy").get<std::vector<double>>();
        s.ece = j.at("ece").get<std::vector<double>>();
        if (s.macro_f1.size() != s.seeds.size() || s.accuracy.size() != s.seeds.size() || s.ece.size() != s.seeds.size())
            throw DataError(file.string() + ": one value per seed required");
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(file.string() + ": " + e.what());
    }
}

std::string repeat_table(std::span<const RepeatSummary> rows) {
    std::ostringstream out;
    out << "| Strategy | Macro-F1 | Accuracy | ECE |\n|---|---|---|---|\n";
    for (const auto& r : rows)
        out << "| " << to_string(r.strategy) << " | " << format_mean_std(r.macro_f1_stats()) << " | "
            << format_mean_std(r.accuracy_stats()) << " | " << format_mean_std(r.ece_stats()) << " |\n";
    return out.str();
}

// ---------------------------------------------------------------------------

namespace {

const std::vector<double>& metric_of(const RepeatSummary& s, const std::string& metric) {
    if (metric == "macro_f1") return s.macro_f1;
    if (metric == "accuracy") return s.accuracy;
    return s.ece;
}

const std::array<std::string, 3> kMetrics{"macro_f1", "accuracy", "ece"};

}  // namespace

ComparisonReport compare_strategies(std::span<const RepeatSummary> runs,
                                    std::span<const std::pair<Strategy, Strategy>> extra_pairs) {
    if (runs.size() < 2) throw ConfigError("compare needs at least two strategies");
    std::set<Strategy> seen;
    for (const auto& r : runs) {
        if (!seen.insert(r.strategy).second)
            throw ConfigError("strategy '" + std::string(to_string(r.strategy)) + "' given twice");
        if (r.seeds != runs.front().seeds) throw DataError("seed sets differ between the compared runs");
    }
    auto find = [&](Strategy s) -> const RepeatSummary* {
        for (const auto& r : runs)
            if (r.strategy == s) return &r;
        return nullptr;
    };

    ComparisonReport rep;
    for (const auto& r : runs) rep.strategies.push_back(r.strategy);
    std::vector<std::pair<Strategy, Strategy>> pairs{{Strategy::early_fusion, Strategy::late_fusion},
                                                     {Strategy::single_agent, Strategy::multi_agent}};
    pairs.insert(pairs.end(), extra_pairs.begin(), extra_pairs.end());
    for (const auto& [a, b] : pairs) {
        const auto* ra = find(a);
        const auto* rb = find(b);
        if (!ra || !rb) continue;
        for (const auto& metric : kMetrics) {
            PairwiseComparison pc{a, b, metric, std::nullopt};
            try {
                pc.result = wilcoxon_signed_rank(metric_of(*rb, metric), metric_of(*ra, metric));
            } catch (const DataError&) {
            }
            rep.pairwise.push_back(pc);
        }
    }
    const auto n = static_cast<Index>(runs.front().seeds.size());
    if (n >= 2) {
        for (const auto& metric : kMetrics) {
            Matrix scores(n, static_cast<Index>(runs.size()));
            for (std::size_t j = 0; j < runs.size(); ++j)
                for (Index i = 0; i < n; ++i) scores(i, static_cast<Index>(j)) = metric_of(runs[j], metric)[static_cast<std::size_t>(i)];
            rep.friedman.push_back({metric, friedman_test(scores)});
        }
    }
    return rep;
}

std::string ComparisonReport::markdown() const {
    std::ostringstream out;
    char buf[128];
    out << "## Wilcoxon signed-rank\n\n| Comparison | Metric | W+ | W- | p | r |\n|---|---|---|---|---|---|\n";
    for (const auto& p : pairwise) {
        out << "| " << to_string(p.a) << " vs " << to_string(p.b) << " | " << p.metric << " | ";
        if (p.result) {
            std::snprintf(buf, sizeof buf, "%g | %g | %.4f | %.3f |", p.result->w_plus, p.result->w_minus,
                          p.result->p_two_sided, p.result->r);
            out << buf << '\n';
        } else {
            out << "- | - | 1.0000 | 0.000 |\n";
        }
    }
    out << "\n## Friedman\n\n| Metric | chi2 | dof | p |\n|---|---|---|---|\n";
    for (const auto& f : friedman) {
        std::snprintf(buf, sizeof buf, "| %s | %.2f | %d | %.4f |", f.metric.c_str(), f.result.chi2, f.result.dof,
                      f.result.p);
        out << buf << '\n';
    }
    return out.str();
}

std::string ComparisonReport::json() const {
    ojson j;
    j["strategies"] = ojson::array();
    for (auto s : strategies) j["strategies"].push_back(std::string(to_string(s)));
    j["wilcoxon"] = ojson::array();
    for (const auto& p : pairwise) {
        ojson row{{"a", std::string(to_string(p.a))}, {"b", std::string(to_string(p.b))}, {"metric", p.metric}};
        if (p.result) {
            row["n"] = p.result->n;
            row["w_plus"] = p.result->w_plus;
            row["w_minus"] = p.result->w_minus;
            row["p"] = p.result->p_two_sided;
            row["r"] = p.result->r;
            row["exact"] = p.result->exact;
        } else {
            row["n"] = 0;
            row["p"] = 1.0;
            row["r"] = 0.0;
        }
        j["wilcoxon"].push_back(row);
    }
    j["friedman"] = ojson::array();
    for (const auto& f : friedman)
        j["friedman"].push_back({{"metric", f.metric},
                                 {"chi2", f.result.chi2},
                                 {"dof", f.result.dof},
                                 {"p", f.result.p},
                                 {"rank_sums", f.result.rank_sums}});
    return j.dump(2);
}

// ---------------------------------------------------------------------------

std::string ZeroDayReport::json() const {
    auto opt = [](const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); };
    ojson j;
    j["holdout"] = holdout;
    j["tau"] = tau;
    j["holdout_samples"] = holdout_samples;
    j["benign_samples"] = benign_samples;
    j["best_f1"] = opt(best_f1);
    j["final_f1"] = opt(final_f1);
    j["coverage"] = coverage;
    j["abstention"] = abstention;
    j["kept_accuracy"] = opt(kept_accuracy);
    j["audited_hashes"] = audited_hashes;
    j["leaked_hashes"] = leaked_hashes;
    j["epochs"] = ojson::array();
    for (const auto& e : epochs)
        j["epochs"].push_back({{"epoch", e.epoch},
                               {"f1", opt(e.f1)},
                               {"coverage", e.coverage},
                               {"abstention", e.abstention},
                               {"kept_accuracy", opt(e.kept_accuracy)}});
    return j.dump(2);
}

std::string ZeroDayReport::table_row() const {
    char buf[256];
    auto cell = [](const std::optional<double>& v, double scale) {
        if (!v) return std::string("abstain-all");
        char b[32];
        std::snprintf(b, sizeof b, "%.2f", *v * scale);
        return std::string(b);
    };
    std::snprintf(buf, sizeof buf, "| %s | %s | %.1f | %.1f | %s |", holdout.c_str(), cell(best_f1, 1.0).c_str(),
                  100.0 * coverage, 100.0 * abstention, cell(kept_accuracy, 100.0).c_str());
    return buf;
}

ZeroDayReport zero_day_eval(const RunConfig& config, const std::string& holdout, std::uint64_t seed,
                            const std::filesystem::path& run_dir) {
    RunConfig cfg = config;
    cfg.calibration.mode = CalibrationMode::temperature;
    cfg.data.vocabulary.clear();

    AlignedDataset full = load_dataset(config, seed);
    const auto index_of = [&](const std::string& name, const char* what) {
        const auto it = std::find(full.vocabulary.begin(), full.vocabulary.end(), name);
        if (it == full.vocabulary.end())
            throw ConfigError(std::string(what) + " '" + name + "' is not in the dataset");
        return static_cast<int>(it - full.vocabulary.begin());
    };
    const int holdout_idx = index_of(holdout, "holdout family");
    const int benign_full = index_of(cfg.zeroday.benign, "benign class");
    if (holdout_idx == benign_full) throw ConfigError("the holdout family cannot be the benign class");

    AlignedDataset rest, held;
    rest.feature_dims = held.feature_dims = full.feature_dims;
    held.vocabulary = full.vocabulary;
    for (const auto& v : full.vocabulary)
        if (v != holdout) rest.vocabulary.push_back(v);
    for (auto& s : full.samples) {
        if (s.family == holdout_idx) {
            held.samples.push_back(std::move(s));
        } else {
            s.family = rest.family_index(full.vocabulary[static_cast<std::size_t>(s.family)]);
            rest.samples.push_back(std::move(s));
        }
    }
    if (rest.vocabulary.size() < 2) throw DataError("holdout removal leaves fewer than two classes");

    PreparedData data = prepare_data(std::move(rest), cfg, seed);
    data.standardizer.apply(held);
    const int benign = static_cast<int>(std::find(data.vocabulary.begin(), data.vocabulary.end(), cfg.zeroday.benign) -
                                        data.vocabulary.begin());

    std::vector<AlignedSample> eval = held.samples;
    std::size_t benign_count = 0;
    for (const auto& s : data.test)
        if (s.family == benign) {
            eval.push_back(s);
            ++benign_count;
        }
    const std::size_t n_hold = held.samples.size();
    if (n_hold == 0) throw DataError("holdout family has no samples");

    std::set<std::string> holdout_hashes;
    for (const auto& s : held.samples) holdout_hashes.insert(s.hash);
    std::set<std::string> audited;

    ZeroDayReport rep;
    rep.holdout = holdout;
    rep.tau = cfg.zeroday.tau;
    rep.holdout_samples = n_hold;
    rep.benign_samples = benign_count;

    StrategyRunner runner(cfg, std::move(data), seed);
    if (!run_dir.empty()) runner.set_output(run_dir);
    runner.set_hash_audit([&](std::string_view, const std::string& h) { audited.insert(h); });
    runner.set_epoch_hook([&](const EpochReport& report, const StrategyRunner& r) {
        const auto preds = r.predict(eval);
        ZeroDayEpoch e;
        e.epoch = report.epoch;
        const std::span<const Prediction> hold(preds.data(), n_hold);
        const auto hold_kept = abstain_filter(hold, cfg.zeroday.tau);
        e.coverage = hold_kept.coverage;
        e.abstention = hold_kept.abstention_rate;
        if (!hold_kept.kept.empty()) {
            std::size_t correct = 0;
            for (auto i : hold_kept.kept)
                if (hold[i].predicted != benign) ++correct;
            e.kept_accuracy = static_cast<double>(correct) / static_cast<double>(hold_kept.kept.size());
        }
        const auto all_kept = abstain_filter(preds, cfg.zeroday.tau);
        if (!all_kept.kept.empty()) {
            ConfusionMatrix cm = ConfusionMatrix::Zero(2, 2);
            for (auto i : all_kept.kept) {
                const int truth = i < n_hold ? 1 : 0;
                const int pred = preds[i].predicted == benign ? 0 : 1;
                ++cm(truth, pred);
            }
            e.f1 = macro_f1(cm);
        }
        rep.epochs.push_back(e);
    });
    runner.run();

    for (const auto& e : rep.epochs)
        if (e.f1 && (!rep.best_f1 || *e.f1 > *rep.best_f1)) rep.best_f1 = e.f1;
    const auto& last = rep.epochs.back();
    rep.coverage = last.coverage;
    rep.abstention = last.abstention;
    rep.kept_accuracy = last.kept_accuracy;
    rep.final_f1 = last.f1;
    rep.audited_hashes = audited.size();
    for (const auto& h : audited)
        if (holdout_hashes.count(h)) ++rep.leaked_hashes;
    if (!run_dir.empty()) std::ofstream(run_dir / "zeroday.json") << rep.json() << '\n';
    return rep;
}

}  // namespace mmra
