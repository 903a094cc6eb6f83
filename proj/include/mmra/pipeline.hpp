#ifndef MMRA_PIPELINE_HPP
#define MMRA_PIPELINE_HPP

// One strategy, one seed: data preparation, the epoch loop and the run
// directory it writes.
//
//   <run>/config.json
//   <run>/epoch_reports.jsonl   one line per epoch
//   <run>/dialogue.jsonl        one line per agent turn
//   <run>/checkpoints/final.params
//   <run>/summary.json          written when the run completes

#include "mmra/agents.hpp"
#include "mmra/calibration.hpp"
#include "mmra/classifier.hpp"
#include "mmra/config.hpp"
#include "mmra/dcae.hpp"
#include "mmra/fusion.hpp"
#include "mmra/metrics.hpp"

#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mmra {

/// Loads the configured CSVs or generates the synthetic dataset with
/// `seed`, then aligns the modalities.
AlignedDataset load_dataset(const RunConfig& config, std::uint64_t seed);

struct PreparedData {
    std::vector<std::string> vocabulary;
    std::array<Index, 3> feature_dims{0, 0, 0};
    std::vector<AlignedSample> train;  // oversampled when balancing is on
    std::vector<AlignedSample> val;
    std::vector<AlignedSample> test;
    Standardizer standardizer;
};

/// Split, standardise on train, balance train by oversampling to the
/// largest family count.
PreparedData prepare_data(AlignedDataset ds, const RunConfig& config, std::uint64_t seed);

struct ControlSignals {
    std::vector<std::string> oversample_targets;
    double critic_reliab = 0.5;
    bool escalate = false;
    std::string guardrail;
};

struct EpochReport {
    int epoch = 0;
    double macro_f1 = 0, accuracy = 0, ece = 0, nll = 0;  // test set, calibrated
    double val_macro_f1 = 0, val_accuracy = 0, val_ece = 0, val_nll = 0;
    std::vector<double> per_family_f1;
    std::string calibration_arm;
    double dcae_loss = 0, classifier_loss = 0;
    std::optional<AgentScores> agent_scores;
    std::optional<ControlSignals> control;
    std::uint64_t checksum_before_agents = 0;
    std::uint64_t checksum_after_agents = 0;
};

std::string epoch_report_json(const EpochReport& report, std::span<const std::string> vocabulary);

struct RunResult {
    Strategy strategy = Strategy::multi_agent;
    std::uint64_t seed = 0;
    std::vector<std::string> vocabulary;
    std::vector<EpochReport> epochs;
    std::vector<Prediction> test_predictions;
    std::vector<int> test_labels;
    EceResult reliability;

    const EpochReport& final_epoch() const { return epochs.back(); }
};

/// Where hashes are reported: "dcae", "classifier" or "calibration".
using HashAudit = std::function<void(std::string_view stage, const std::string& hash)>;

class StrategyRunner {
public:
    StrategyRunner(const RunConfig& config, PreparedData data, std::uint64_t seed);
    ~StrategyRunner();

    /// Writes the run directory layout into `dir` as the epochs progress.
    void set_output(std::filesystem::path dir);
    void set_hash_audit(HashAudit audit) { audit_ = std::move(audit); }
    void set_epoch_hook(std::function<void(const EpochReport&, const StrategyRunner&)> hook) { hook_ = std::move(hook); }

    RunResult run();

    /// Calibrated predictions of the current models.
    std::vector<Prediction> predict(std::span<const AlignedSample> samples) const;
    const PreparedData& data() const { return data_; }
    /// Checksum over every trainable parameter.
    std::uint64_t weights_checksum() const;

private:
    struct Impl;
    const RunConfig& config_;
    PreparedData data_;
    std::uint64_t seed_;
    std::optional<std::filesystem::path> out_dir_;
    HashAudit audit_;
    std::function<void(const EpochReport&, const StrategyRunner&)> hook_;
    std::unique_ptr<Impl> impl_;
};

/// load_dataset + prepare_data + StrategyRunner for one seed; `run_dir`
/// may be empty to skip writing.
RunResult run_strategy(const RunConfig& config, std::uint64_t seed, const std::filesystem::path& run_dir);

}  // namespace mmra

#endif
