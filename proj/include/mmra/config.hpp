#ifndef MMRA_CONFIG_HPP
#define MMRA_CONFIG_HPP

// Run configuration: one JSON document per run. See README for the schema.

#include "mmra/agents.hpp"
#include "mmra/dataset.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mmra {

enum class Strategy { static_only, dynamic_only, network_only, early_fusion, late_fusion, single_agent, multi_agent };

inline constexpr std::array<Strategy, 7> kStrategies{Strategy::static_only,  Strategy::dynamic_only,
                                                      Strategy::network_only, Strategy::early_fusion,
                                                      Strategy::late_fusion,  Strategy::single_agent,
                                                      Strategy::multi_agent};

std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view s);
/// The modality a single-modality strategy uses.
std::optional<Modality> single_modality(Strategy s);

struct DataConfig {
    std::array<std::filesystem::path, 3> csv;  // all empty: synthetic
    std::optional<SynthConfig> synthetic;
    std::optional<std::uint64_t> seed;  // fixed data seed; unset means the run seed
    std::array<double, 3> split{0.8, 0.1, 0.1};
    bool balance = true;
    std::vector<std::string> vocabulary;

    bool from_csv() const { return !csv[0].empty() || !csv[1].empty() || !csv[2].empty(); }
};

struct DcaeConfig {
    int pretrain_epochs = 5;
    int epochs_per_cycle = 1;
    int batch_size = 64;
    double lr = 0.01;
    double weight_decay = 0.0;
    double clip_norm = 5.0;
    double lambda = 1.0;
    double temperature = 0.5;
    std::map<Modality, std::vector<Index>> encoder_dims;  // overrides default_encoder_dims
};

struct ClassifierConfig {
    std::vector<Index> hidden{64};
    int batch_size = 32;
    double lr = 0.05;
    double weight_decay = 0.0;
    bool class_weights = true;
    bool soft_labels = false;
    double soft_alpha = 0.1;
};

/// `automatic` means the bandit for multi_agent and temperature scaling
/// everywhere else.
enum class CalibrationMode { automatic, identity, temperature, vector, ucb };
std::string_view to_string(CalibrationMode m);
CalibrationMode calibration_mode_from_string(std::string_view s);
/// Resolves `automatic`; the bandit only runs under multi_agent, so other
/// strategies asking for it get temperature scaling.
CalibrationMode effective_calibration_mode(Strategy strategy, CalibrationMode mode);

struct CalibrationConfig {
    CalibrationMode mode = CalibrationMode::automatic;
    bool blend_arms = false;
    int ece_bins = 15;
};

struct AgentSettings {
    AgentMode mode = AgentMode::fallback;
    double gamma = 1.0;
    bool uncertainty_weighting = true;
    std::filesystem::path stopwords;
    std::filesystem::path jargon;
    LlmEndpoint endpoint;  // starts from the environment

    AgentConfig resolve() const;
};

struct ZeroDayConfig {
    std::string holdout;
    std::string benign = "Benign";
    double tau = 0.7;
};

struct RunConfig {
    std::string name = "run";
    Strategy strategy = Strategy::multi_agent;
    int epochs = 30;
    std::vector<std::uint64_t> seeds{1};
    std::filesystem::path output_dir = "runs";
    DataConfig data;
    DcaeConfig dcae;
    ClassifierConfig classifier;
    CalibrationConfig calibration;
    AgentSettings agents;
    ZeroDayConfig zeroday;

    /// Throws ConfigError on inconsistent values.
    void validate() const;
};

/// Six families of 146 to 167 samples in three 24-dimensional views. Each view
/// merges a different pair of families, so every family is separable only
/// when the views are combined.
SynthConfig complementary_synth_config();

/// Benign plus four families; `holdout` is added either close to one family
/// ("near") or at the centroid of all others ("far").
SynthConfig zero_day_synth_config(const std::string& holdout_placement);

SynthConfig synth_config_from_json_text(const std::string& text);
SynthConfig load_synth_config(const std::filesystem::path& path);

RunConfig run_config_from_json_text(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json_text(const RunConfig& config);

}  // namespace mmra

#endif
