#ifndef MMRA_HARNESS_HPP
#define MMRA_HARNESS_HPP

// Multi-seed experiments, strategy comparison and zero-day evaluation.

#include "mmra/pipeline.hpp"
#include "mmra/stats.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mmra {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

/// "0.946 ± 0.004"
std::string format_mean_std(const MeanStd& v, int digits = 3);

struct RepeatSummary {
    Strategy strategy = Strategy::multi_agent;
    std::vector<std::uint64_t> seeds;
    std::vector<double> macro_f1, accuracy, ece;

    MeanStd macro_f1_stats() const { return mean_std(macro_f1); }
    MeanStd accuracy_stats() const { return mean_std(accuracy); }
    MeanStd ece_stats() const { return mean_std(ece); }
};

/// Runs every configured seed into `<dir>/seed_<s>/` and writes
/// `<dir>/repeat_summary.json`. Needs at least two seeds.
RepeatSummary run_repeats(const RunConfig& config, const std::filesystem::path& dir);

void write_repeat_summary(const std::filesystem::path& path, const RepeatSummary& summary);
RepeatSummary load_repeat_summary(const std::filesystem::path& path);

/// `| Strategy | Macro-F1 | Accuracy | ECE |` with mean ± std cells.
std::string repeat_table(std::span<const RepeatSummary> rows);

struct PairwiseComparison {
    Strategy a = Strategy::early_fusion;
    Strategy b = Strategy::late_fusion;
    std::string metric;
    std::optional<WilcoxonResult> result;  // empty when every difference is zero
};

struct FriedmanRow {
    std::string metric;
    FriedmanResult result;
};

struct ComparisonReport {
    std::vector<Strategy> strategies;
    std::vector<PairwiseComparison> pairwise;
    std::vector<FriedmanRow> friedman;

    std::string markdown() const;
    std::string json() const;
};

/// Wilcoxon for early vs late fusion and single vs multi agent (when both
/// sides are present) plus any extra pairs, and a Friedman test across all
/// strategies, per metric. Seed sets must match.
ComparisonReport compare_strategies(std::span<const RepeatSummary> runs,
                                    std::span<const std::pair<Strategy, Strategy>> extra_pairs = {});

struct ZeroDayEpoch {
    int epoch = 0;
    std::optional<double> f1;  // binary macro-F1 on kept predictions; empty when all abstain
    double coverage = 0.0;
    double abstention = 0.0;
    std::optional<double> kept_accuracy;
};

struct ZeroDayReport {
    std::string holdout;
    double tau = 0.7;
    std::size_t holdout_samples = 0;
    std::size_t benign_samples = 0;
    std::vector<ZeroDayEpoch> epochs;
    std::optional<double> best_f1;
    /// Final-epoch values on the holdout family.
    double coverage = 0.0;
    double abstention = 0.0;
    std::optional<double> kept_accuracy;
    std::optional<double> final_f1;
    /// Number of distinct hashes seen by any training or calibration step and
    /// how many of them belong to the holdout family.
    std::size_t audited_hashes = 0;
    std::size_t leaked_hashes = 0;

    std::string json() const;
    std::string table_row() const;  // | family | best F1 | coverage | abstention | accuracy |
};

/// Leave-one-family-out: the holdout family is removed from the vocabulary,
/// training and calibration; the model is scored on the holdout samples plus
/// the benign test samples as binary benign / ransomware detection with
/// abstention at `config.zeroday.tau`.
ZeroDayReport zero_day_eval(const RunConfig& config, const std::string& holdout, std::uint64_t seed,
                            const std::filesystem::path& run_dir = {});

}  // namespace mmra

#endif
