#include "mmra/agents.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace mmra {

std::string_view to_string(AgentRole r) {
    switch (r) {
        case AgentRole::analyst: return "analyst";
        case AgentRole::critic: return "critic";
        case AgentRole::critic_plus: return "critic_plus";
        case AgentRole::predictor: return "predictor";
    }
    return "?";
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

AgentRole role_from_string(std::string_view name) {
    std::string n = lower(name);
    n.erase(std::remove_if(n.begin(), n.end(), [](char c) { return c == '_' || c == '-' || c == ' '; }), n.end());
    if (n == "analyst" || n == "userproxy" || n == "analystagent") return AgentRole::analyst;
    if (n == "critic" || n == "feedback" || n == "feedbackagent") return AgentRole::critic;
    if (n == "criticplus") return AgentRole::critic_plus;
    if (n == "predictor" || n == "assistance" || n == "predictoragent") return AgentRole::predictor;
    throw ConfigError("unknown agent role '" + std::string(name) + "'");
}

std::string_view to_string(AgentMode m) { return m == AgentMode::llm ? "llm" : "fallback"; }

AgentMode agent_mode_from_string(std::string_view s) {
    if (s == "fallback") return AgentMode::fallback;
    if (s == "llm") return AgentMode::llm;
    throw ConfigError("unknown agent mode '" + std::string(s) + "'");
}

void EpochSummary::validate() const {
    for (double v : {macro_f1, accuracy, ece, mean_margin, delta_f1, delta_accuracy, delta_ece, top_confidence})
        if (!std::isfinite(v)) throw DataError("epoch summary holds a non-finite metric");
    if (per_family_f1.size() != vocabulary.size()) throw DataError("epoch summary must cover the whole vocabulary");
    for (double v : per_family_f1)
        if (!std::isfinite(v)) throw DataError("epoch summary holds a non-finite family F1");
}

double EpochSummary::family_f1(const std::string& family) const {
    for (std::size_t i = 0; i < vocabulary.size(); ++i)
        if (vocabulary[i] == family) return per_family_f1[i];
    throw DataError("family '" + family + "' is not in the vocabulary");
}

bool guardrail_escalate(double top1, double margin) { return top1 < 0.55 || margin < 0.10; }

// ---------------------------------------------------------------------------
// Bandit

std::string CalibrationArm::label() const {
    std::string s(to_string(kind));
    if (blend != 1.0) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "@%.2f", blend);
        s += buf;
    }
    return s;
}

std::vector<CalibrationArm> default_calibration_arms() {
    return {{CalibrationKind::identity, 1.0}, {CalibrationKind::temperature, 1.0}, {CalibrationKind::vector, 1.0}};
}

std::vector<CalibrationArm> blend_calibration_arms(CalibrationKind kind) {
    std::vector<CalibrationArm> arms;
    for (double b : {0.0, 0.25, 0.5, 0.75, 1.0}) arms.push_back({kind, b});
    return arms;
}

long UcbState::total_pulls() const { return std::accumulate(pulls.begin(), pulls.end(), 0L); }

std::size_t ucb_select(const UcbState& state) {
    if (state.pulls.empty()) throw ConfigError("ucb_select needs at least one arm");
    for (std::size_t i = 0; i < state.pulls.size(); ++i)
        if (state.pulls[i] == 0) return i;
    const double log_t = std::log(static_cast<double>(state.total_pulls()));
    std::size_t best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < state.pulls.size(); ++i) {
        const double bonus = std::sqrt(2.0) * std::sqrt(log_t / static_cast<double>(state.pulls[i]));
        const double value = state.mean_reward[i] + bonus;
        if (value > best_value) {
            best_value = value;
            best = i;
        }
    }
    return best;
}

void ucb_update(UcbState& state, std::size_t arm, double reward) {
    if (arm >= state.pulls.size()) throw ConfigError("ucb_update: arm index out of range");
    if (!std::isfinite(reward)) throw NumericError("ucb_update: non-finite reward");
    const long n = ++state.pulls[arm];
    state.mean_reward[arm] += (reward - state.mean_reward[arm]) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Rule-agent texts

namespace {

std::string pct(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * x);
    return buf;
}

std::string num3(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    return buf;
}

std::string trend_phrase(double delta) {
    if (delta > 0.005) return "up " + num3(delta);
    if (delta < -0.005) return "down " + num3(-delta);
    return "steady";
}

// Rule agents hedge the way a cautious analyst does when the evidence is weak.
std::string hedge(double top1) {
    if (top1 < 0.55)
        return " The picture is unclear and possibly ambiguous; maybe the model basically guesses among various "
               "families, roughly at random.";
    if (top1 < 0.80) return " Some families perhaps remain somewhat ambiguous.";
    return "";
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

std::size_t best_family(const EpochSummary& s) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < s.per_family_f1.size(); ++i)
        if (s.per_family_f1[i] > s.per_family_f1[best]) best = i;
    return best;
}

std::array<std::string, 4> critic_fields(const EpochSummary& s) {
    std::array<std::string, 4> f;
    if (s.vocabulary.empty()) {
        f[0] = "no family scores are available.";
        f[1] = "the epoch completed.";
    } else {
        const auto weak = weakest_families(s, 1).front();
        const auto strong = best_family(s);
        f[0] = "lowest family is " + weak + " at F1 " + num3(s.family_f1(weak)) + "." + hedge(s.accuracy);
        f[1] = s.vocabulary[strong] + " leads at F1 " + num3(s.per_family_f1[strong]) + ".";
    }
    f[2] = s.ece > 0.05 ? "calibration evidence is missing (ECE " + num3(s.ece) + ")."
                        : "trend evidence for the weakest families.";
    f[3] = "if top-1 < 55% or margin < 10%, escalate.";
    return f;
}

std::string render_critic(const std::array<std::string, 4>& f) {
    return "Flaw: " + f[0] + "\nStrength: " + f[1] + "\nMissing Element: " + f[2] + "\nGuardrail: " + f[3];
}

std::string render_summary(const EpochSummary& s) {
    std::string out = "Epoch " + std::to_string(s.epoch) + ": macro-F1 " + num3(s.macro_f1) + " (" +
                      trend_phrase(s.delta_f1) + "), top-1 accuracy " + pct(s.accuracy) + ", mean margin " +
                      pct(s.mean_margin) + ", ECE " + num3(s.ece) + ".\nPer-family F1:";
    for (std::size_t i = 0; i < s.vocabulary.size(); ++i)
        out += " " + s.vocabulary[i] + "=" + num3(s.per_family_f1[i]) + (i + 1 < s.vocabulary.size() ? "," : ".");
    return out;
}

bool has_all(const std::string& text, std::initializer_list<std::string_view> labels) {
    return std::all_of(labels.begin(), labels.end(),
                       [&](std::string_view l) { return text.find(l) != std::string::npos; });
}

constexpr std::array<std::string_view, 4> kCriticLabels{"Flaw:", "Strength:", "Missing Element:", "Guardrail:"};

std::optional<std::array<std::string, 4>> parse_critic(const std::string& text) {
    std::array<std::size_t, 4> pos{};
    for (std::size_t i = 0; i < kCriticLabels.size(); ++i) {
        pos[i] = text.find(kCriticLabels[i]);
        if (pos[i] == std::string::npos) return std::nullopt;
    }
    std::array<std::string, 4> fields;
    for (std::size_t i = 0; i < kCriticLabels.size(); ++i) {
        const std::size_t start = pos[i] + kCriticLabels[i].size();
        std::size_t end = text.size();
        for (std::size_t j = 0; j < kCriticLabels.size(); ++j)
            if (pos[j] > pos[i]) end = std::min(end, pos[j]);
        std::string v = text.substr(start, end - start);
        const auto first = v.find_first_not_of(" \t\r\n");
        const auto last = v.find_last_not_of(" \t\r\n");
        fields[i] = first == std::string::npos ? std::string{} : v.substr(first, last - first + 1);
    }
    return fields;
}

}  // namespace

std::vector<std::string> weakest_families(const EpochSummary& s, std::size_t count) {
    std::vector<std::size_t> order(s.vocabulary.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s.per_family_f1[a] < s.per_family_f1[b]; });
    order.resize(std::min(count, order.size()));
    std::sort(order.begin(), order.end());
    std::vector<std::string> out;
    for (auto i : order) out.push_back(s.vocabulary[i]);
    return out;
}

std::string fallback_analyst_text(const EpochSummary& s) {
    std::string next;
    if (guardrail_escalate(s.accuracy, s.mean_margin))
        next = "escalate for review and oversample the weakest families";
    else if (s.ece > 0.05)
        next = "recalibrate the probabilities before trusting the scores";
    else
        next = "continue training with the current schedule";
    return "Analysis: The confidence profile shows a top-1 score of " + pct(s.accuracy) + " with a mean margin of " +
           pct(s.mean_margin) + " and ECE " + num3(s.ece) + "; macro-F1 is " + num3(s.macro_f1) + " (" +
           trend_phrase(s.delta_f1) + ")." + hedge(s.accuracy) + "\nPrediction: " + std::to_string(s.top_class) +
           " | Confidence: " + pct(s.top_confidence) + "\nNext step: " + next + ".";
}

std::string fallback_critic_text(const EpochSummary& s) { return render_critic(critic_fields(s)); }

std::string fallback_critic_plus_text(const EpochSummary& s) {
    return "Weak families: " + join(weakest_families(s, 2), ", ") + ".";
}

std::string fallback_predictor_text(const EpochSummary& s) {
    std::string outlook;
    if (s.delta_f1 > 0.005)
        outlook = "expect continued improvement over the next epochs";
    else if (s.delta_f1 < -0.005)
        outlook = "expect a partial recovery after this drop";
    else
        outlook = "expect stable performance over the next epochs";
    return "Forecast: macro-F1 stands at " + num3(s.macro_f1) + " with ECE " + num3(s.ece) + "; " + outlook + "." +
           hedge(s.accuracy);
}

// ---------------------------------------------------------------------------
// Agents

AgentTurn analyst_message(const EpochSummary& summary, const AgentConfig& config) {
    const std::string fallback = fallback_analyst_text(summary);
    if (config.mode == AgentMode::fallback) return {AgentRole::analyst, ReplySource::fallback, fallback};
    const std::string system =
        "You are the Analyst agent watching a ransomware family classifier train. Reply with exactly three "
        "fields on separate lines: 'Analysis:', 'Prediction: <class> | Confidence: <percent>', 'Next step:'.";
    const std::string user = render_summary(summary) + "\nTemplate:\n" + fallback;
    auto reply = llm_chat(config.endpoint, system, user, [&] { return fallback; },
                          [](const std::string& t) { return has_all(t, {"Analysis:", "Prediction:", "Next step:"}); });
    return {AgentRole::analyst, reply.source, std::move(reply.text)};
}

CriticVerdict critic_review(const std::string& analyst_text, const EpochSummary& summary, const AgentConfig& config,
                            AgentTurn* turn) {
    const auto generated = critic_fields(summary);
    std::array<std::string, 4> fields = generated;
    AgentTurn t{AgentRole::critic, ReplySource::fallback, render_critic(generated)};
    if (config.mode == AgentMode::llm) {
        const std::string system =
            "You are the Critic agent. Review the analyst message and reply with exactly four fields: "
            "'Flaw:', 'Strength:', 'Missing Element:', 'Guardrail:'.";
        const std::string user = "Analyst message:\n" + analyst_text + "\n\n" + render_summary(summary);
        auto reply = llm_chat(config.endpoint, system, user, [&] { return t.text; },
                              [](const std::string& r) { return parse_critic(r).has_value(); });
        if (reply.source == ReplySource::llm) {
            fields = *parse_critic(reply.text);
            t = {AgentRole::critic, ReplySource::llm, std::move(reply.text)};
        }
    }
    CriticVerdict v;
    v.flaw = fields[0];
    v.strength = fields[1];
    v.missing_element = fields[2];
    v.guardrail = fields[3];
    v.escalate = guardrail_escalate(summary.accuracy, summary.mean_margin);
    if (turn) *turn = std::move(t);
    return v;
}

AgentTurn critic_plus(const EpochSummary& summary, const std::string& critic_text, const AgentConfig& config) {
    const std::string fallback = fallback_critic_plus_text(summary);
    if (config.mode == AgentMode::fallback) return {AgentRole::critic_plus, ReplySource::fallback, fallback};
    const std::string system =
        "You are the Critic agent. Name the weak families that need more training samples, using the exact "
        "family names given.";
    const std::string user = "Your review:\n" + critic_text + "\n\n" + render_summary(summary) +
                             "\nName the weak families.";
    auto reply = llm_chat(config.endpoint, system, user, [&] { return fallback; },
                          [](const std::string& r) { return !tokenize(r).empty(); });
    return {AgentRole::critic_plus, reply.source, std::move(reply.text)};
}

AgentTurn predictor_forecast(const EpochSummary& summary, const AgentConfig& config) {
    const std::string fallback = fallback_predictor_text(summary);
    if (config.mode == AgentMode::fallback) return {AgentRole::predictor, ReplySource::fallback, fallback};
    const std::string system =
        "You are the Predictor agent. Write a short forecast of the expected performance trend for the next "
        "epochs.";
    auto reply = llm_chat(config.endpoint, system, render_summary(summary), [&] { return fallback; },
                          [](const std::string& r) { return !tokenize(r).empty(); });
    return {AgentRole::predictor, reply.source, std::move(reply.text)};
}

std::vector<std::string> extract_target_families(std::string_view text, std::span<const std::string> vocabulary) {
    const std::string hay = lower(text);
    auto boundary = [&](std::size_t i) { return !std::isalnum(static_cast<unsigned char>(hay[i])); };
    std::vector<std::string> out;
    for (const auto& family : vocabulary) {
        const std::string needle = lower(family);
        if (needle.empty()) continue;
        for (std::size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
            const std::size_t end = pos + needle.size();
            if ((pos == 0 || boundary(pos - 1)) && (end == hay.size() || boundary(end))) {
                out.push_back(family);
                break;
            }
        }
    }
    return out;
}

void update_reliability(ControllerState& state, const EpochSummary& summary, double step) {
    if (state.previous_targets.empty()) return;
    double delta = 0.0;
    for (const auto& t : state.previous_targets) delta += summary.family_f1(t.family) - t.f1;
    delta /= static_cast<double>(state.previous_targets.size());
    const double sign = delta > 0 ? 1.0 : (delta < 0 ? -1.0 : 0.0);
    state.critic_reliab = std::clamp(state.critic_reliab + step * sign, 0.0, 1.0);
}

std::vector<double> oversample_weights(const ControllerState& state, std::span<const int> labels,
                                       std::span<const std::string> vocabulary,
                                       std::span<const double> base_weights, double gamma) {
    std::vector<double> w;
    if (base_weights.empty())
        w.assign(labels.size(), 1.0);
    else
        w.assign(base_weights.begin(), base_weights.end());
    if (w.size() != labels.size()) throw ShapeError("oversample_weights: one base weight per sample required");
    std::vector<char> targeted(vocabulary.size(), 0);
    for (const auto& t : state.oversample_targets)
        for (std::size_t c = 0; c < vocabulary.size(); ++c)
            if (vocabulary[c] == t) targeted[c] = 1;
    const double factor = 1.0 + gamma * state.critic_reliab;
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!(w[i] > 0) || !std::isfinite(w[i])) throw ConfigError("oversample_weights: base weights must be positive");
        if (targeted[static_cast<std::size_t>(labels[i])]) w[i] *= factor;
        total += w[i];
    }
    for (auto& x : w) x /= total;
    return w;
}

// ---------------------------------------------------------------------------
// Cycles

namespace {

double scored_quality(ControllerState& state, const std::string& key, const std::string& text, double f1,
                      const AgentConfig& config, double* jargon_out = nullptr) {
    const double j = jargon_score(text, config.jargon);
    const Vector u = rationale_embed(text);
    auto it = state.previous_rationale.find(key);
    const double q = composite_score(f1, j, u, it == state.previous_rationale.end() ? nullptr : &it->second);
    state.previous_rationale[key] = u;
    if (jargon_out) *jargon_out = j;
    return q;
}

void finish_scores(CycleResult& r, ControllerState& state, const EpochSummary& s, const AgentConfig& config) {
    std::string dialogue;
    for (const auto& t : r.turns) {
        if (!dialogue.empty()) dialogue += '\n';
        dialogue += t.text;
        TurnScores ts;
        ts.clarity = clarity_score(t.text, config.stopwords);
        ts.jargon = jargon_score(t.text, config.jargon);
        ts.quality = composite_score(s.macro_f1, ts.jargon, 1.0);
        r.turn_scores.push_back(ts);
    }
    r.scores.clarity = clarity_score(dialogue, config.stopwords);
    r.scores.composite = scored_quality(state, "dialogue", dialogue, s.macro_f1, config, &r.scores.jargon);
}

void retarget(ControllerState& state, const EpochSummary& s, std::vector<std::string> targets) {
    state.oversample_targets = targets;
    state.previous_targets.clear();
    for (const auto& t : targets) state.previous_targets.push_back({t, s.family_f1(t)});
}

}  // namespace

CycleResult run_epoch_cycle(const EpochSummary& summary, ControllerState& state, std::span<const int> train_labels,
                            std::span<const double> base_weights, const AgentConfig& config) {
    summary.validate();
    CycleResult r;
    r.turns.push_back(analyst_message(summary, config));
    AgentTurn critic_turn;
    r.verdict = critic_review(r.turns.front().text, summary, config, &critic_turn);
    r.turns.push_back(critic_turn);
    r.turns.push_back(critic_plus(summary, critic_turn.text, config));
    r.targets = extract_target_families(r.turns.back().text, summary.vocabulary);
    r.verdict.target_families = r.targets;
    update_reliability(state, summary, config.reliability_step);
    retarget(state, summary, r.targets);
    r.sampling_weights = oversample_weights(state, train_labels, summary.vocabulary, base_weights, config.gamma);
    r.turns.push_back(predictor_forecast(summary, config));
    r.critic_reliab = state.critic_reliab;

    finish_scores(r, state, summary, config);
    r.scores.critic = scored_quality(state, "critic", r.turns[1].text + "\n" + r.turns[2].text, summary.macro_f1, config);
    r.scores.assistance = scored_quality(state, "predictor", r.turns[3].text, summary.macro_f1, config);
    return r;
}

CycleResult run_single_agent_cycle(const EpochSummary& summary, ControllerState& state,
                                   std::span<const int> train_labels, std::span<const double> base_weights,
                                   const AgentConfig& config) {
    summary.validate();
    CycleResult r;
    AgentTurn turn = analyst_message(summary, config);
    turn.text += "\n" + fallback_critic_plus_text(summary);
    r.turns.push_back(std::move(turn));
    r.targets = extract_target_families(r.turns.back().text.substr(r.turns.back().text.rfind('\n')), summary.vocabulary);
    retarget(state, summary, r.targets);
    r.sampling_weights = oversample_weights(state, train_labels, summary.vocabulary, base_weights, config.gamma);
    r.critic_reliab = state.critic_reliab;
    finish_scores(r, state, summary, config);
    return r;
}

}  // namespace mmra
