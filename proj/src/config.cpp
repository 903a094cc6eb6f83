#include "mmra/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace mmra {

using nlohmann::json;

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::static_only: return "static_only";
        case Strategy::dynamic_only: return "dynamic_only";
        case Strategy::network_only: return "network_only";
        case Strategy::early_fusion: return "early_fusion";
        case Strategy::late_fusion: return "late_fusion";
        case Strategy::single_agent: return "single_agent";
        case Strategy::multi_agent: return "multi_agent";
    }
    return "?";
}

Strategy strategy_from_string(std::string_view s) {
    for (auto st : kStrategies)
        if (to_string(st) == s) return st;
    throw ConfigError("unknown strategy '" + std::string(s) + "'");
}

std::optional<Modality> single_modality(Strategy s) {
    switch (s) {
        case Strategy::static_only: return Modality::Static;
        case Strategy::dynamic_only: return Modality::Dynamic;
        case Strategy::network_only: return Modality::Network;
        default: return std::nullopt;
    }
}

std::string_view to_string(CalibrationMode m) {
    switch (m) {
        case CalibrationMode::automatic: return "auto";
        case CalibrationMode::identity: return "identity";
        case CalibrationMode::temperature: return "temperature";
        case CalibrationMode::vector: return "vector";
        case CalibrationMode::ucb: return "ucb";
    }
    return "?";
}

CalibrationMode calibration_mode_from_string(std::string_view s) {
    if (s == "auto") return CalibrationMode::automatic;
    if (s == "identity") return CalibrationMode::identity;
    if (s == "temperature") return CalibrationMode::temperature;
    if (s == "vector") return CalibrationMode::vector;
    if (s == "ucb") return CalibrationMode::ucb;
    throw ConfigError("unknown calibration mode '" + std::string(s) + "'");
}

CalibrationMode effective_calibration_mode(Strategy strategy, CalibrationMode mode) {
    if (mode == CalibrationMode::automatic)
        return strategy == Strategy::multi_agent ? CalibrationMode::ucb : CalibrationMode::temperature;
    if (mode == CalibrationMode::ucb && strategy != Strategy::multi_agent) return CalibrationMode::temperature;
    return mode;
}

AgentConfig AgentSettings::resolve() const {
    AgentConfig c;
    c.mode = mode;
    c.endpoint = endpoint;
    c.gamma = gamma;
    if (!stopwords.empty()) c.stopwords = Lexicon::load(stopwords);
    if (!jargon.empty()) c.jargon = Lexicon::load(jargon);
    return c;
}

void RunConfig::validate() const {
    if (name.empty() || name.find('/') != std::string::npos) throw ConfigError("run name must be a plain, non-empty name");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (seeds.empty()) throw ConfigError("seeds must be non-empty");
    double total = 0;
    for (double r : data.split) {
        if (r < 0) throw ConfigError("split ratios must be non-negative");
        total += r;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
    if (data.split[0] <= 0 || data.split[1] <= 0 || data.split[2] <= 0)
        throw ConfigError("train, val and test splits must all be non-empty");
    if (data.from_csv()) {
        for (std::size_t m = 0; m < 3; ++m)
            if (data.csv[m].empty())
                throw ConfigError(std::string("data.csv.") + std::string(to_string(kModalities[m])) + " is missing");
    }
    if (dcae.pretrain_epochs < 0 || dcae.epochs_per_cycle < 0 || dcae.batch_size < 1 || !(dcae.lr >= 0) ||
        !(dcae.temperature > 0) || dcae.lambda < 0)
        throw ConfigError("bad dcae settings");
    if (classifier.batch_size < 1 || !(classifier.lr >= 0)) throw ConfigError("bad classifier settings");
    if (classifier.soft_alpha < 0 || classifier.soft_alpha > 1) throw ConfigError("classifier.soft_alpha must lie in [0, 1]");
    if (calibration.ece_bins < 1) throw ConfigError("calibration.ece_bins must be >= 1");
    if (!(zeroday.tau > 0 && zeroday.tau < 1)) throw ConfigError("zeroday.tau must lie in (0, 1)");
    if (agents.gamma < 0) throw ConfigError("agents.gamma must be >= 0");
    if (agents.mode == AgentMode::llm && !agents.endpoint.configured())
        throw ConfigError("agent mode 'llm' needs an endpoint url (agents.llm.url or MMRA_LLM_URL)");
}

// ---------------------------------------------------------------------------
// Presets

namespace {

SynthFamily family(std::string name, int count) {
    SynthFamily f;
    f.name = std::move(name);
    f.count = count;
    return f;
}

}  // namespace

SynthConfig complementary_synth_config() {
    SynthConfig c;
    c.families = {family("Benign", 167), family("Dharma", 167), family("LockBit", 146), family("Ryuk", 149), family("Shade", 165), family("WannaCry", 165)};
    for (auto& m : c.modalities) {
        m.dim = 24;
        m.separation = 4.0;
        m.noise = 1.0;
        m.drop_fraction = 0.05;
    }
    c.modalities[0].merged_groups = {{"Dharma", "LockBit"}, {"Ryuk", "Shade"}};
    c.modalities[1].merged_groups = {{"LockBit", "Ryuk"}, {"Shade", "WannaCry"}};
    c.modalities[2].merged_groups = {{"Benign", "Dharma"}, {"WannaCry", "Ryuk"}};
    return c;
}

SynthConfig zero_day_synth_config(const std::string& holdout_placement) {
    SynthConfig c;
    c.families = {family("Benign", 150), family("Dharma", 150), family("LockBit", 150), family("Ryuk", 150), family("WannaCry", 150)};
    SynthFamily holdout = family("Shade", 150);
    if (holdout_placement == "near") {
        holdout.placement = Placement::near;
        holdout.anchor = "Dharma";
        holdout.anchor_offset = 0.5;
    } else if (holdout_placement == "far") {
        holdout.placement = Placement::centroid;
    } else {
        throw ConfigError("holdout placement must be 'near' or 'far'");
    }
    c.families.push_back(holdout);
    for (auto& m : c.modalities) {
        m.dim = 24;
        m.separation = 6.0;
        m.noise = 1.0;
    }
    return c;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->template get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

Placement placement_from_string(const std::string& s) {
    if (s == "random") return Placement::random;
    if (s == "near") return Placement::near;
    if (s == "centroid") return Placement::centroid;
    throw ConfigError("unknown placement '" + s + "'");
}

std::string_view to_string(Placement p) {
    switch (p) {
        case Placement::random: return "random";
        case Placement::near: return "near";
        case Placement::centroid: return "centroid";
    }
    return "?";
}

SynthConfig synth_from_json(const json& j) {
    if (j.is_string()) {
        const auto preset = j.get<std::string>();
        if (preset == "complementary") return complementary_synth_config();
        if (preset == "zeroday_near") return zero_day_synth_config("near");
        if (preset == "zeroday_far") return zero_day_synth_config("far");
        throw ConfigError("unknown synthetic preset '" + preset + "'");
    }
    check_keys(j, "synthetic", {"preset", "families", "modalities"});
    SynthConfig c;
    if (j.contains("preset")) c = synth_from_json(j.at("preset"));
    if (j.contains("families")) {
        c.families.clear();
        for (const auto& f : j.at("families")) {
            check_keys(f, "synthetic.families[]", {"name", "count", "placement", "anchor", "anchor_offset"});
            SynthFamily fam;
            read(f, "name", fam.name, "family");
            read(f, "count", fam.count, "family");
            std::string placement = "random";
            read(f, "placement", placement, "family");
            fam.placement = placement_from_string(placement);
            read(f, "anchor", fam.anchor, "family");
            read(f, "anchor_offset", fam.anchor_offset, "family");
            if (fam.name.empty()) throw ConfigError("synthetic family without a name");
            c.families.push_back(fam);
        }
    }
    if (j.contains("modalities")) {
        const auto& mods = j.at("modalities");
        check_keys(mods, "synthetic.modalities", {"static", "dynamic", "network"});
        for (auto it = mods.begin(); it != mods.end(); ++it) {
            auto& m = c.modalities[static_cast<std::size_t>(index_of(modality_from_string(it.key())))];
            const std::string where = "synthetic.modalities." + it.key();
            check_keys(*it, where, {"dim", "separation", "noise", "drop_fraction", "merged_groups"});
            read(*it, "dim", m.dim, where);
            read(*it, "separation", m.separation, where);
            read(*it, "noise", m.noise, where);
            read(*it, "drop_fraction", m.drop_fraction, where);
            read(*it, "merged_groups", m.merged_groups, where);
        }
    }
    return c;
}

json synth_to_json(const SynthConfig& c) {
    json j;
    j["families"] = json::array();
    for (const auto& f : c.families)
        j["families"].push_back({{"name", f.name},
                                 {"count", f.count},
                                 {"placement", std::string(to_string(f.placement))},
                                 {"anchor", f.anchor},
                                 {"anchor_offset", f.anchor_offset}});
    for (std::size_t m = 0; m < 3; ++m) {
        const auto& s = c.modalities[m];
        j["modalities"][std::string(to_string(kModalities[m]))] = {{"dim", s.dim},
                                                                   {"separation", s.separation},
                                                                   {"noise", s.noise},
                                                                   {"drop_fraction", s.drop_fraction},
                                                                   {"merged_groups", s.merged_groups}};
    }
    return j;
}

json parse_text(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

SynthConfig synth_config_from_json_text(const std::string& text) { return synth_from_json(parse_text(text)); }

SynthConfig load_synth_config(const std::filesystem::path& path) { return synth_config_from_json_text(read_file(path)); }

RunConfig run_config_from_json_text(const std::string& text) {
    const json j = parse_text(text);
    check_keys(j, "config",
               {"name", "strategy", "epochs", "seeds", "output_dir", "data", "dcae", "classifier", "calibration",
                "agents", "zeroday", "abstention"});
    RunConfig c;
    c.agents.endpoint = LlmEndpoint::from_env();
    read(j, "name", c.name, "config");
    if (j.contains("strategy")) c.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    read(j, "epochs", c.epochs, "config");
    read(j, "seeds", c.seeds, "config");
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();

    if (j.contains("data")) {
        const auto& d = j.at("data");
        check_keys(d, "data", {"csv", "synthetic", "seed", "split", "balance", "vocabulary"});
        if (d.contains("csv")) {
            const auto& csv = d.at("csv");
            check_keys(csv, "data.csv", {"static", "dynamic", "network"});
            for (auto it = csv.begin(); it != csv.end(); ++it)
                c.data.csv[static_cast<std::size_t>(index_of(modality_from_string(it.key())))] = it->get<std::string>();
        }
        if (d.contains("synthetic")) c.data.synthetic = synth_from_json(d.at("synthetic"));
        if (d.contains("seed")) c.data.seed = d.at("seed").get<std::uint64_t>();
        read(d, "split", c.data.split, "data");
        read(d, "balance", c.data.balance, "data");
        read(d, "vocabulary", c.data.vocabulary, "data");
    }
    if (j.contains("dcae")) {
        const auto& d = j.at("dcae");
        check_keys(d, "dcae",
                   {"pretrain_epochs", "epochs_per_cycle", "batch_size", "lr", "weight_decay", "clip_norm", "lambda",
                    "temperature", "encoder_dims"});
        read(d, "pretrain_epochs", c.dcae.pretrain_epochs, "dcae");
        read(d, "epochs_per_cycle", c.dcae.epochs_per_cycle, "dcae");
        read(d, "batch_size", c.dcae.batch_size, "dcae");
        read(d, "lr", c.dcae.lr, "dcae");
        read(d, "weight_decay", c.dcae.weight_decay, "dcae");
        read(d, "clip_norm", c.dcae.clip_norm, "dcae");
        read(d, "lambda", c.dcae.lambda, "dcae");
        read(d, "temperature", c.dcae.temperature, "dcae");
        if (d.contains("encoder_dims")) {
            const auto& e = d.at("encoder_dims");
            check_keys(e, "dcae.encoder_dims", {"static", "dynamic", "network"});
            for (auto it = e.begin(); it != e.end(); ++it)
                c.dcae.encoder_dims[modality_from_string(it.key())] = it->get<std::vector<Index>>();
        }
    }
    if (j.contains("classifier")) {
        const auto& d = j.at("classifier");
        check_keys(d, "classifier",
                   {"hidden", "batch_size", "lr", "weight_decay", "class_weights", "soft_labels", "soft_alpha"});
        read(d, "hidden", c.classifier.hidden, "classifier");
        read(d, "batch_size", c.classifier.batch_size, "classifier");
        read(d, "lr", c.classifier.lr, "classifier");
        read(d, "weight_decay", c.classifier.weight_decay, "classifier");
        read(d, "class_weights", c.classifier.class_weights, "classifier");
        read(d, "soft_labels", c.classifier.soft_labels, "classifier");
        read(d, "soft_alpha", c.classifier.soft_alpha, "classifier");
    }
    if (j.contains("calibration")) {
        const auto& d = j.at("calibration");
        check_keys(d, "calibration", {"mode", "blend_arms", "ece_bins"});
        if (d.contains("mode")) c.calibration.mode = calibration_mode_from_string(d.at("mode").get<std::string>());
        read(d, "blend_arms", c.calibration.blend_arms, "calibration");
        read(d, "ece_bins", c.calibration.ece_bins, "calibration");
    }
    if (j.contains("abstention")) {
        const auto& d = j.at("abstention");
        check_keys(d, "abstention", {"tau"});
        read(d, "tau", c.zeroday.tau, "abstention");
    }
    if (j.contains("agents")) {
        const auto& d = j.at("agents");
        check_keys(d, "agents", {"mode", "gamma", "uncertainty_weighting", "stopwords", "jargon", "llm"});
        if (d.contains("mode")) c.agents.mode = agent_mode_from_string(d.at("mode").get<std::string>());
        read(d, "gamma", c.agents.gamma, "agents");
        read(d, "uncertainty_weighting", c.agents.uncertainty_weighting, "agents");
        if (d.contains("stopwords")) c.agents.stopwords = d.at("stopwords").get<std::string>();
        if (d.contains("jargon")) c.agents.jargon = d.at("jargon").get<std::string>();
        if (d.contains("llm")) {
            const auto& l = d.at("llm");
            check_keys(l, "agents.llm", {"url", "model", "timeout_s", "temperature"});
            read(l, "url", c.agents.endpoint.url, "agents.llm");
            read(l, "model", c.agents.endpoint.model, "agents.llm");
            read(l, "timeout_s", c.agents.endpoint.timeout_s, "agents.llm");
            read(l, "temperature", c.agents.endpoint.temperature, "agents.llm");
        }
    }
    if (j.contains("zeroday")) {
        const auto& d = j.at("zeroday");
        check_keys(d, "zeroday", {"holdout", "benign", "tau"});
        read(d, "holdout", c.zeroday.holdout, "zeroday");
        read(d, "benign", c.zeroday.benign, "zeroday");
        read(d, "tau", c.zeroday.tau, "zeroday");
    }
    if (!c.data.from_csv() && !c.data.synthetic) c.data.synthetic = complementary_synth_config();
    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) { return run_config_from_json_text(read_file(path)); }

std::string run_config_to_json_text(const RunConfig& c) {
    json j;
    j["name"] = c.name;
    j["strategy"] = std::string(to_string(c.strategy));
    j["epochs"] = c.epochs;
    j["seeds"] = c.seeds;
    j["output_dir"] = c.output_dir.string();
    json d;
    if (c.data.from_csv()) {
        for (std::size_t m = 0; m < 3; ++m) d["csv"][std::string(to_string(kModalities[m]))] = c.data.csv[m].string();
    }
    if (c.data.synthetic) d["synthetic"] = synth_to_json(*c.data.synthetic);
    if (c.data.seed) d["seed"] = *c.data.seed;
    d["split"] = c.data.split;
    d["balance"] = c.data.balance;
    d["vocabulary"] = c.data.vocabulary;
    j["data"] = d;
    json dims = json::object();
    for (const auto& [m, v] : c.dcae.encoder_dims) dims[std::string(to_string(m))] = v;
    j["dcae"] = {{"pretrain_epochs", c.dcae.pretrain_epochs}, {"epochs_per_cycle", c.dcae.epochs_per_cycle},
                 {"batch_size", c.dcae.batch_size},           {"lr", c.dcae.lr},
                 {"weight_decay", c.dcae.weight_decay},       {"clip_norm", c.dcae.clip_norm},
                 {"lambda", c.dcae.lambda},
                 {"temperature", c.dcae.temperature},         {"encoder_dims", dims}};
    j["classifier"] = {{"hidden", c.classifier.hidden},         {"batch_size", c.classifier.batch_size},
                       {"lr", c.classifier.lr},                 {"weight_decay", c.classifier.weight_decay},
                       {"class_weights", c.classifier.class_weights}, {"soft_labels", c.classifier.soft_labels},
                       {"soft_alpha", c.classifier.soft_alpha}};
    j["calibration"] = {{"mode", std::string(to_string(c.calibration.mode))},
                        {"blend_arms", c.calibration.blend_arms},
                        {"ece_bins", c.calibration.ece_bins}};
    j["agents"] = {{"mode", std::string(to_string(c.agents.mode))},
                   {"gamma", c.agents.gamma},
                   {"uncertainty_weighting", c.agents.uncertainty_weighting},
                   {"llm",
                    {{"url", c.agents.endpoint.url},
                     {"model", c.agents.endpoint.model},
                     {"timeout_s", c.agents.endpoint.timeout_s},
                     {"temperature", c.agents.endpoint.temperature}}}};
    if (!c.agents.stopwords.empty()) j["agents"]["stopwords"] = c.agents.stopwords.string();
    if (!c.agents.jargon.empty()) j["agents"]["jargon"] = c.agents.jargon.string();
    j["zeroday"] = {{"holdout", c.zeroday.holdout}, {"benign", c.zeroday.benign}, {"tau", c.zeroday.tau}};
    return j.dump(2);
}

}  // namespace mmra
