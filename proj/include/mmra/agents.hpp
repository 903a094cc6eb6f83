#ifndef MMRA_AGENTS_HPP
#define MMRA_AGENTS_HPP

// The analyst / critic / predictor feedback loop. Agents read an epoch
// summary and return text plus control signals (oversampling targets, an
// escalation flag, sampling weights). They never see model parameters.
//
// Role aliases accepted by role_from_string:
//   analyst   <- user_proxy, userproxy, analystagent
//   critic    <- feedback, feedbackagent
//   predictor <- assistance, predictoragent

#include "mmra/calibration.hpp"
#include "mmra/llm_client.hpp"
#include "mmra/text_scores.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmra {

enum class AgentRole { analyst, critic, critic_plus, predictor };
std::string_view to_string(AgentRole r);
AgentRole role_from_string(std::string_view name);

struct EpochSummary {
    int epoch = 0;
    double macro_f1 = 0.0;
    double accuracy = 0.0;  // top-1
    double ece = 0.0;
    double mean_margin = 0.0;  // mean of top1 - top2 probability
    std::vector<std::string> vocabulary;
    std::vector<double> per_family_f1;  // aligned with vocabulary
    double delta_f1 = 0.0;
    double delta_accuracy = 0.0;
    double delta_ece = 0.0;
    int top_class = 0;  // most confident single prediction of the epoch
    double top_confidence = 0.0;

    /// Throws DataError on non-finite metrics or a per-family list that does
    /// not cover the vocabulary.
    void validate() const;
    double family_f1(const std::string& family) const;
};

/// Escalation rule: top-1 below 55% or margin below 10%.
bool guardrail_escalate(double top1, double margin);

struct CriticVerdict {
    std::string flaw;
    std::string strength;
    std::string missing_element;
    std::string guardrail;
    bool escalate = false;
    std::vector<std::string> target_families;
};

struct TargetSnapshot {
    std::string family;
    double f1 = 0.0;
};

/// A calibration configuration the bandit can pick.
struct CalibrationArm {
    CalibrationKind kind = CalibrationKind::identity;
    double blend = 1.0;

    std::string label() const;
};

/// {identity, temperature, vector}.
std::vector<CalibrationArm> default_calibration_arms();
/// Temperature scaling mixed with the raw softmax at blend 0, .25, .5, .75, 1.
std::vector<CalibrationArm> blend_calibration_arms(CalibrationKind kind = CalibrationKind::temperature);

struct UcbState {
    std::vector<long> pulls;
    std::vector<double> mean_reward;

    explicit UcbState(std::size_t arms = 0) : pulls(arms, 0), mean_reward(arms, 0.0) {}
    long total_pulls() const;
};

/// Unpulled arms first (lowest index), then argmax mean + sqrt(2) *
/// sqrt(ln t / n_i). Ties go to the lowest index.
std::size_t ucb_select(const UcbState& state);
void ucb_update(UcbState& state, std::size_t arm, double reward);

struct ControllerState {
    double critic_reliab = 0.5;
    std::vector<std::string> oversample_targets;
    std::vector<TargetSnapshot> previous_targets;
    UcbState ucb;
    /// Rationale embeddings from the previous cycle, keyed by scored text.
    std::map<std::string, Vector> previous_rationale;
};

enum class AgentMode { fallback, llm };
std::string_view to_string(AgentMode m);
AgentMode agent_mode_from_string(std::string_view s);

struct AgentConfig {
    AgentMode mode = AgentMode::fallback;
    LlmEndpoint endpoint;
    double gamma = 1.0;
    double reliability_step = 0.1;
    Lexicon stopwords = Lexicon::default_stopwords();
    Lexicon jargon = Lexicon::default_jargon();
};

struct AgentTurn {
    AgentRole role = AgentRole::analyst;
    ReplySource source = ReplySource::fallback;
    std::string text;
};

// Individual agents. Each returns the fallback text when `config.mode` is
// fallback or the endpoint fails.
AgentTurn analyst_message(const EpochSummary& summary, const AgentConfig& config = {});
CriticVerdict critic_review(const std::string& analyst_text, const EpochSummary& summary,
                            const AgentConfig& config = {}, AgentTurn* turn = nullptr);
AgentTurn critic_plus(const EpochSummary& summary, const std::string& critic_text, const AgentConfig& config = {});
AgentTurn predictor_forecast(const EpochSummary& summary, const AgentConfig& config = {});

/// Deterministic rule-agent texts.
std::string fallback_analyst_text(const EpochSummary& summary);
std::string fallback_critic_text(const EpochSummary& summary);
std::string fallback_critic_plus_text(const EpochSummary& summary);
std::string fallback_predictor_text(const EpochSummary& summary);

/// The `count` families with the lowest F1, ties broken by vocabulary order.
std::vector<std::string> weakest_families(const EpochSummary& summary, std::size_t count = 2);

/// Case-insensitive whole-word scan; the result is in vocabulary order.
std::vector<std::string> extract_target_families(std::string_view text, std::span<const std::string> vocabulary);

/// Moves critic_reliab by +-step according to the sign of the mean F1 change
/// of the previous targets, clamped to [0, 1].
void update_reliability(ControllerState& state, const EpochSummary& summary, double step = 0.1);

/// Multiplies the weight of every sample whose family is targeted by
/// (1 + gamma * critic_reliab) and renormalises to sum 1.
std::vector<double> oversample_weights(const ControllerState& state, std::span<const int> labels,
                                       std::span<const std::string> vocabulary,
                                       std::span<const double> base_weights, double gamma = 1.0);

struct TurnScores {
    double clarity = 1.0;
    double jargon = 1.0;
    double quality = 0.0;  // composite formula on this text alone
};

struct AgentScores {
    double clarity = 1.0;
    double jargon = 1.0;
    double composite = 0.0;
    std::optional<double> assistance;  // predictor quality
    std::optional<double> critic;      // critic quality
};

struct CycleResult {
    std::vector<AgentTurn> turns;
    std::vector<TurnScores> turn_scores;  // aligned with turns
    CriticVerdict verdict;
    std::vector<std::string> targets;
    std::vector<double> sampling_weights;
    AgentScores scores;
    double critic_reliab = 0.5;
};

/// Full cycle: analyst, critic review, critic_plus targeting, target
/// extraction, reliability update, weight amplification, forecast, scoring.
CycleResult run_epoch_cycle(const EpochSummary& summary, ControllerState& state, std::span<const int> train_labels,
                            std::span<const double> base_weights, const AgentConfig& config = {});

/// One analyst that names the weak families itself. critic_reliab is left
/// untouched and no critic or predictor runs.
CycleResult run_single_agent_cycle(const EpochSummary& summary, ControllerState& state,
                                   std::span<const int> train_labels, std::span<const double> base_weights,
                                   const AgentConfig& config = {});

}  // namespace mmra

#endif
