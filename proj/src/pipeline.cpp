#include "mmra/pipeline.hpp"

#include "mmra/log.hpp"
#include "mmra/param_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>

namespace mmra {

using ojson = nlohmann::ordered_json;

namespace {

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::vector<int> labels_of(std::span<const AlignedSample> samples) {
    std::vector<int> y;
    y.reserve(samples.size());
    for (const auto& s : samples) y.push_back(s.family);
    return y;
}

std::vector<std::string> hashes_of(std::span<const AlignedSample> samples) {
    std::vector<std::string> h;
    h.reserve(samples.size());
    for (const auto& s : samples) h.push_back(s.hash);
    return h;
}

}  // namespace

AlignedDataset load_dataset(const RunConfig& config, std::uint64_t seed) {
    std::array<ModalityTable, 3> tables;
    if (config.data.from_csv()) {
        for (std::size_t m = 0; m < 3; ++m)
            tables[m] = load_modality_csv(config.data.csv[m], kModalities[m], config.data.vocabulary);
    } else {
        if (!config.data.synthetic) throw ConfigError("no dataset configured");
        tables = synth_generate(*config.data.synthetic, config.data.seed.value_or(seed));
    }
    return align_modalities(tables, config.data.vocabulary);
}

PreparedData prepare_data(AlignedDataset ds, const RunConfig& config, std::uint64_t seed) {
    const std::uint64_t data_seed = config.data.seed.value_or(seed);
    ds = split_grouped(std::move(ds), config.data.split, sub_seed(data_seed, 1));
    PreparedData p;
    p.standardizer = Standardizer::fit(ds);
    p.standardizer.apply(ds);
    p.vocabulary = ds.vocabulary;
    p.feature_dims = ds.feature_dims;
    std::vector<AlignedSample> train;
    for (auto& s : ds.samples) {
        switch (s.split) {
            case Split::train: train.push_back(std::move(s)); break;
            case Split::val: p.val.push_back(std::move(s)); break;
            case Split::test: p.test.push_back(std::move(s)); break;
        }
    }
    if (train.empty() || p.val.empty() || p.test.empty()) throw DataError("a train, val or test split is empty");
    const auto C = static_cast<int>(p.vocabulary.size());
    std::vector<int> counts(static_cast<std::size_t>(C), 0);
    for (const auto& s : train) ++counts[static_cast<std::size_t>(s.family)];
    for (int c = 0; c < C; ++c)
        if (counts[static_cast<std::size_t>(c)] == 0)
            throw DataError("family '" + p.vocabulary[static_cast<std::size_t>(c)] + "' has no training samples");
    if (config.data.balance) {
        const int target = *std::max_element(counts.begin(), counts.end());
        p.train = oversample_to_balance(train, C, target, sub_seed(data_seed, 2));
    } else {
        p.train = std::move(train);
    }
    return p;
}

std::string epoch_report_json(const EpochReport& r, std::span<const std::string> vocabulary) {
    ojson j;
    j["epoch"] = r.epoch;
    j["macro_f1"] = r.macro_f1;
    j["accuracy"] = r.accuracy;
    j["ece"] = r.ece;
    j["nll"] = r.nll;
    j["val_macro_f1"] = r.val_macro_f1;
    j["val_accuracy"] = r.val_accuracy;
    j["val_ece"] = r.val_ece;
    j["val_nll"] = r.val_nll;
    ojson fam = ojson::object();
    for (std::size_t c = 0; c < vocabulary.size() && c < r.per_family_f1.size(); ++c) fam[vocabulary[c]] = r.per_family_f1[c];
    j["per_family_f1"] = fam;
    j["calibration_arm"] = r.calibration_arm;
    j["losses"] = {{"dcae", r.dcae_loss}, {"classifier", r.classifier_loss}};
    if (r.agent_scores) {
        const auto& s = *r.agent_scores;
        j["agent_scores"] = {{"clarity", s.clarity},
                             {"jargon", s.jargon},
                             {"composite", s.composite},
                             {"assistance", s.assistance ? ojson(*s.assistance) : ojson(nullptr)},
                             {"critic", s.critic ? ojson(*s.critic) : ojson(nullptr)}};
    } else {
        j["agent_scores"] = nullptr;
    }
    if (r.control) {
        j["control"] = {{"oversample_targets", r.control->oversample_targets},
                        {"critic_reliab", r.control->critic_reliab},
                        {"escalate", r.control->escalate},
                        {"guardrail", r.control->guardrail}};
    } else {
        j["control"] = nullptr;
    }
    j["weights_checksum"] = {{"before_agents", hex64(r.checksum_before_agents)},
                             {"after_agents", hex64(r.checksum_after_agents)}};
    return j.dump();
}

// ---------------------------------------------------------------------------

struct StrategyRunner::Impl {
    const RunConfig& cfg;
    const PreparedData& data;
    std::uint64_t seed;
    Strategy strategy;
    CalibrationMode calib_mode;

    std::array<std::optional<DcaeModel>, 3> dcae;
    std::array<std::unique_ptr<DcaeTrainer>, 3> dcae_trainer;
    std::array<std::vector<std::size_t>, 3> with_modality;  // train indices carrying each modality

    std::vector<ClassifierModel> heads;  // three for late fusion, one otherwise
    std::vector<std::unique_ptr<ClassifierTrainer>> head_trainer;
    std::vector<CalibrationModel> calibration;

    std::vector<CalibrationArm> arms;
    ControllerState state;
    AgentConfig agent_config;

    Impl(const RunConfig& c, const PreparedData& d, std::uint64_t s)
        : cfg(c), data(d), seed(s), strategy(c.strategy),
          calib_mode(effective_calibration_mode(c.strategy, c.calibration.mode)) {}

    bool uses_dcae(Modality m) const {
        if (strategy == Strategy::early_fusion) return false;
        if (auto only = single_modality(strategy)) return *only == m;
        return true;
    }
    bool late() const { return strategy == Strategy::late_fusion; }
    bool agents() const { return strategy == Strategy::single_agent || strategy == Strategy::multi_agent; }

    Matrix latent_block(Modality m, std::span<const AlignedSample> samples) const {
        const auto k = static_cast<std::size_t>(index_of(m));
        const auto& model = *dcae[k];
        Matrix out = Matrix::Zero(model.latent_dim(), static_cast<Index>(samples.size()));
        std::vector<Index> cols;
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (samples[i].has(m)) cols.push_back(static_cast<Index>(i));
        if (cols.empty()) return out;
        Matrix X(model.input_dim(), static_cast<Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) X.col(static_cast<Index>(j)) = *samples[static_cast<std::size_t>(cols[j])].features[k];
        const Matrix Z = encode(model, X);
        for (std::size_t j = 0; j < cols.size(); ++j) out.col(cols[j]) = Z.col(static_cast<Index>(j));
        return out;
    }

    Matrix fused(std::span<const AlignedSample> samples) const {
        std::array<Matrix, 3> blocks;
        FusedLayout layout;
        for (auto m : kModalities) {
            blocks[static_cast<std::size_t>(index_of(m))] = latent_block(m, samples);
            layout.dims[static_cast<std::size_t>(index_of(m))] = dcae[static_cast<std::size_t>(index_of(m))]->latent_dim();
        }
        std::vector<AlignedLatents> latents(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            auto& l = latents[i];
            l.hash = samples[i].hash;
            l.family = samples[i].family;
            const auto col = static_cast<Index>(i);
            if (samples[i].has(Modality::Static)) l.zs = StaticLatent{blocks[0].col(col)};
            if (samples[i].has(Modality::Dynamic)) l.zd = DynamicLatent{blocks[1].col(col)};
            if (samples[i].has(Modality::Network)) l.zn = NetworkLatent{blocks[2].col(col)};
        }
        return stack_columns(fuse_all(layout, latents));
    }

    Matrix raw_concat(std::span<const AlignedSample> samples) const {
        const auto& d = data.feature_dims;
        Matrix out = Matrix::Zero(d[0] + d[1] + d[2], static_cast<Index>(samples.size()));
        for (std::size_t i = 0; i < samples.size(); ++i) {
            Index off = 0;
            for (std::size_t m = 0; m < 3; ++m) {
                if (samples[i].features[m]) out.col(static_cast<Index>(i)).segment(off, d[m]) = *samples[i].features[m];
                off += d[m];
            }
        }
        return out;
    }

    /// Classifier inputs for head `h`.
    Matrix features(std::span<const AlignedSample> samples, std::size_t h) const {
        if (late()) return latent_block(kModalities[h], samples);
        if (strategy == Strategy::early_fusion) return raw_concat(samples);
        if (auto only = single_modality(strategy)) return latent_block(*only, samples);
        return fused(samples);
    }

    std::vector<AlignedSample> subset(std::span<const AlignedSample> samples, Modality m) const {
        std::vector<AlignedSample> out;
        for (const auto& s : samples)
            if (s.has(m)) out.push_back(s);
        return out;
    }

    std::vector<double> class_weights(std::span<const int> labels) const {
        const auto C = data.vocabulary.size();
        if (!cfg.classifier.class_weights) return std::vector<double>(C, 1.0);
        std::vector<int> counts(C, 0);
        for (int y : labels) ++counts[static_cast<std::size_t>(y)];
        // Families absent from a head's subset get weight 1; they never appear in its batches.
        std::vector<int> present;
        for (int c : counts) present.push_back(std::max(c, 1));
        auto w = inverse_frequency_weights(present);
        return w;
    }
};

StrategyRunner::StrategyRunner(const RunConfig& config, PreparedData data, std::uint64_t seed)
    : config_(config), data_(std::move(data)), seed_(seed), impl_(std::make_unique<Impl>(config, data_, seed)) {
    auto& im = *impl_;
    for (auto m : kModalities) {
        const auto k = static_cast<std::size_t>(index_of(m));
        for (std::size_t i = 0; i < data_.train.size(); ++i)
            if (data_.train[i].has(m)) im.with_modality[k].push_back(i);
        if (!im.uses_dcae(m)) continue;
        if (im.with_modality[k].empty())
            throw DataError(std::string("no training sample carries the ") + std::string(to_string(m)) + " modality");
        auto it = config.dcae.encoder_dims.find(m);
        std::vector<Index> dims = it != config.dcae.encoder_dims.end() ? it->second
                                                                       : default_encoder_dims(data_.feature_dims[k]);
        if (dims.empty() || dims.front() != data_.feature_dims[k])
            throw ConfigError(std::string("encoder dims for ") + std::string(to_string(m)) +
                              " must start with the feature width");
        im.dcae[k] = DcaeModel::create(m, dims, config.dcae.lambda, config.dcae.temperature, sub_seed(seed, 10 + k));
    }
    if (im.agents()) im.agent_config = config.agents.resolve();
    if (im.calib_mode == CalibrationMode::ucb) {
        im.arms = config.calibration.blend_arms ? blend_calibration_arms() : default_calibration_arms();
        im.state.ucb = UcbState(im.arms.size());
    }
}

StrategyRunner::~StrategyRunner() = default;

void StrategyRunner::set_output(std::filesystem::path dir) { out_dir_ = std::move(dir); }

std::uint64_t StrategyRunner::weights_checksum() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& d : impl_->dcae) {
        if (!d) continue;
        h = parameter_checksum(d->encoder, h);
        h = parameter_checksum(d->decoder, h);
    }
    for (const auto& c : impl_->heads) h = parameter_checksum(c.layers, h);
    return h;
}

std::vector<Prediction> StrategyRunner::predict(std::span<const AlignedSample> samples) const {
    const auto& im = *impl_;
    std::vector<Prediction> out;
    if (samples.empty()) return out;
    if (!im.late()) {
        const Matrix P = apply_calibration(im.calibration[0], logits(im.heads[0], im.features(samples, 0)));
        for (std::size_t i = 0; i < samples.size(); ++i) out.push_back(make_prediction(P.col(static_cast<Index>(i)), samples[i].hash));
        return out;
    }
    const auto C = static_cast<Index>(data_.vocabulary.size());
    Matrix sum = Matrix::Zero(C, static_cast<Index>(samples.size()));
    Vector count = Vector::Zero(static_cast<Index>(samples.size()));
    for (std::size_t h = 0; h < 3; ++h) {
        const Matrix P = apply_calibration(im.calibration[h], logits(im.heads[h], im.features(samples, h)));
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (!samples[i].has(kModalities[h])) continue;
            sum.col(static_cast<Index>(i)) += P.col(static_cast<Index>(i));
            count(static_cast<Index>(i)) += 1.0;
        }
    }
    for (std::size_t i = 0; i < samples.size(); ++i)
        out.push_back(make_prediction(sum.col(static_cast<Index>(i)) / count(static_cast<Index>(i)), samples[i].hash));
    return out;
}

namespace {

struct SplitMetrics {
    std::vector<Prediction> predictions;
    ConfusionMatrix confusion;
    double macro_f1 = 0, accuracy = 0, ece = 0, nll = 0, mean_margin = 0;
    std::vector<double> per_family_f1;
    EceResult reliability;
};

SplitMetrics measure(std::vector<Prediction> predictions, std::span<const int> truth, Index C, int bins) {
    SplitMetrics m;
    m.confusion = confusion_matrix(truth, predictions, C);
    m.per_family_f1 = per_class_f1(m.confusion);
    m.macro_f1 = macro_f1(m.confusion);
    m.accuracy = accuracy(m.confusion);
    m.reliability = ece(predictions, truth, bins);
    m.ece = m.reliability.ece;
    m.nll = nll(predictions, truth);
    for (const auto& p : predictions) m.mean_margin += top2_margin(p.probs);
    m.mean_margin /= static_cast<double>(predictions.size());
    m.predictions = std::move(predictions);
    return m;
}

EpochSummary summarize(int epoch, const std::vector<std::string>& vocab, const SplitMetrics& val,
                       const std::optional<EpochSummary>& prev) {
    EpochSummary s;
    s.epoch = epoch;
    s.macro_f1 = val.macro_f1;
    s.accuracy = val.accuracy;
    s.ece = val.ece;
    s.mean_margin = val.mean_margin;
    s.vocabulary = vocab;
    s.per_family_f1 = val.per_family_f1;
    if (prev) {
        s.delta_f1 = s.macro_f1 - prev->macro_f1;
        s.delta_accuracy = s.accuracy - prev->accuracy;
        s.delta_ece = s.ece - prev->ece;
    }
    const Prediction* top = &val.predictions.front();
    for (const auto& p : val.predictions)
        if (p.confidence > top->confidence) top = &p;
    s.top_class = top->predicted;
    s.top_confidence = top->confidence;
    return s;
}

std::vector<double> uncertainty_weights(const Matrix& train_probs) {
    std::vector<double> w(static_cast<std::size_t>(train_probs.cols()));
    for (Index j = 0; j < train_probs.cols(); ++j)
        w[static_cast<std::size_t>(j)] = 1.0 + (1.0 - top2_margin(train_probs.col(j)));
    return w;
}

}  // namespace

RunResult StrategyRunner::run() {
    auto& im = *impl_;
    const auto& cfg = config_;
    const auto C = static_cast<Index>(data_.vocabulary.size());
    const auto train_labels = labels_of(data_.train);
    const auto val_labels = labels_of(data_.val);
    const auto test_labels = labels_of(data_.test);

    std::ofstream reports_out, dialogue_out;
    if (out_dir_) {
        std::filesystem::create_directories(*out_dir_ / "checkpoints");
        std::filesystem::create_directories(*out_dir_ / "exports");
        std::filesystem::remove(*out_dir_ / "summary.json");
        std::ofstream(*out_dir_ / "config.json") << run_config_to_json_text(cfg) << '\n';
        reports_out.open(*out_dir_ / "epoch_reports.jsonl", std::ios::trunc);
        dialogue_out.open(*out_dir_ / "dialogue.jsonl", std::ios::trunc);
        if (!reports_out || !dialogue_out) throw DataError("cannot write into " + out_dir_->string());
    }

    if (audit_) {
        for (const auto& s : data_.val) audit_("calibration", s.hash);
    }

    // Encoders.
    TrainConfig dcfg;
    dcfg.batch_size = cfg.dcae.batch_size;
    dcfg.lr = cfg.dcae.lr;
    dcfg.weight_decay = cfg.dcae.weight_decay;
    dcfg.clip_norm = cfg.dcae.clip_norm;
    for (auto m : kModalities) {
        const auto k = static_cast<std::size_t>(index_of(m));
        if (!im.dcae[k]) continue;
        const auto& idx = im.with_modality[k];
        Matrix X(data_.feature_dims[k], static_cast<Index>(idx.size()));
        std::vector<int> y;
        for (std::size_t j = 0; j < idx.size(); ++j) {
            X.col(static_cast<Index>(j)) = *data_.train[idx[j]].features[k];
            y.push_back(data_.train[idx[j]].family);
        }
        dcfg.seed = sub_seed(seed_, 20 + k);
        im.dcae_trainer[k] = std::make_unique<DcaeTrainer>(*im.dcae[k], std::move(X), std::move(y), dcfg);
        if (audit_) {
            im.dcae_trainer[k]->set_batch_observer([this, k](std::span<const Index> batch) {
                for (Index i : batch) audit_("dcae", data_.train[impl_->with_modality[k][static_cast<std::size_t>(i)]].hash);
            });
        }
    }
    auto dcae_epoch = [&] {
        double total = 0.0;
        for (auto& t : im.dcae_trainer)
            if (t) total += t->run_epoch();
        return total;
    };
    for (int e = 0; e < cfg.dcae.pretrain_epochs; ++e) dcae_epoch();

    // Classifier heads.
    ClassifierTrainConfig ccfg;
    ccfg.batch_size = cfg.classifier.batch_size;
    ccfg.lr = cfg.classifier.lr;
    ccfg.weight_decay = cfg.classifier.weight_decay;
    ccfg.soft_labels = cfg.classifier.soft_labels;
    ccfg.soft_alpha = cfg.classifier.soft_alpha;
    const std::size_t num_heads = im.late() ? 3 : 1;
    std::vector<std::vector<AlignedSample>> head_train(num_heads), head_val(num_heads);
    im.heads.reserve(num_heads);  // trainers keep references into this vector
    for (std::size_t h = 0; h < num_heads; ++h) {
        head_train[h] = im.late() ? im.subset(data_.train, kModalities[h]) : data_.train;
        head_val[h] = im.late() ? im.subset(data_.val, kModalities[h]) : data_.val;
        const Matrix X = im.features(head_train[h], h);
        const auto y = labels_of(head_train[h]);
        im.heads.push_back(ClassifierModel::create(X.rows(), cfg.classifier.hidden, data_.vocabulary, sub_seed(seed_, 30 + h)));
        ccfg.seed = sub_seed(seed_, 40 + h);
        ccfg.class_weights = im.class_weights(y);
        im.head_trainer.push_back(std::make_unique<ClassifierTrainer>(im.heads.back(), X, y, ccfg));
        if (audit_) {
            const auto hashes = hashes_of(head_train[h]);
            im.head_trainer.back()->set_batch_observer([this, hashes](std::span<const Index> batch) {
                for (Index i : batch) audit_("classifier", hashes[static_cast<std::size_t>(i)]);
            });
        }
        im.calibration.emplace_back();
    }

    RunResult result;
    result.strategy = cfg.strategy;
    result.seed = seed_;
    result.vocabulary = data_.vocabulary;
    std::vector<double> sampling_weights;
    std::optional<EpochSummary> previous_summary;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        EpochReport report;
        report.epoch = epoch;
        if (cfg.dcae.epochs_per_cycle > 0 && std::any_of(im.dcae.begin(), im.dcae.end(), [](const auto& d) { return d.has_value(); })) {
            for (int k = 0; k < cfg.dcae.epochs_per_cycle; ++k) report.dcae_loss = dcae_epoch();
            for (std::size_t h = 0; h < num_heads; ++h) im.head_trainer[h]->set_inputs(im.features(head_train[h], h));
        }
        for (std::size_t h = 0; h < num_heads; ++h)
            report.classifier_loss += im.head_trainer[h]->run_epoch(h == 0 ? sampling_weights : std::vector<double>{});

        // Calibration on validation logits.
        std::size_t arm_index = 0;
        for (std::size_t h = 0; h < num_heads; ++h) {
            const Matrix val_logits = logits(im.heads[h], im.features(head_val[h], h));
            const auto y = labels_of(head_val[h]);
            std::vector<int> distinct(y.begin(), y.end());
            std::sort(distinct.begin(), distinct.end());
            distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
            if (distinct.size() < 2) {
                im.calibration[h] = CalibrationModel{};
                continue;
            }
            if (im.calib_mode == CalibrationMode::ucb) {
                arm_index = ucb_select(im.state.ucb);
                const auto& arm = im.arms[arm_index];
                im.calibration[h] = fit_calibration(arm.kind, val_logits, y);
                im.calibration[h].blend = arm.blend;
                ucb_update(im.state.ucb, arm_index, -calibration_nll(im.calibration[h], val_logits, y));
            } else {
                const auto kind = im.calib_mode == CalibrationMode::identity ? CalibrationKind::identity
                                  : im.calib_mode == CalibrationMode::vector ? CalibrationKind::vector
                                                                             : CalibrationKind::temperature;
                im.calibration[h] = fit_calibration(kind, val_logits, y);
            }
        }
        report.calibration_arm = im.calib_mode == CalibrationMode::ucb ? im.arms[arm_index].label()
                                                                       : std::string(to_string(im.calibration[0].kind));

        const int bins = cfg.calibration.ece_bins;
        const auto val = measure(predict(data_.val), val_labels, C, bins);
        auto test = measure(predict(data_.test), test_labels, C, bins);
        report.val_macro_f1 = val.macro_f1;
        report.val_accuracy = val.accuracy;
        report.val_ece = val.ece;
        report.val_nll = val.nll;
        report.macro_f1 = test.macro_f1;
        report.accuracy = test.accuracy;
        report.ece = test.ece;
        report.nll = test.nll;
        report.per_family_f1 = test.per_family_f1;

        report.checksum_before_agents = weights_checksum();
        if (im.agents()) {
            auto summary = summarize(epoch, data_.vocabulary, val, previous_summary);
            std::vector<double> base;
            CycleResult cycle;
            if (cfg.strategy == Strategy::multi_agent) {
                if (cfg.agents.uncertainty_weighting) base = uncertainty_weights(im.head_trainer[0]->train_probabilities());
                cycle = run_epoch_cycle(summary, im.state, train_labels, base, im.agent_config);
            } else {
                cycle = run_single_agent_cycle(summary, im.state, train_labels, base, im.agent_config);
            }
            sampling_weights = cycle.sampling_weights;
            report.agent_scores = cycle.scores;
            ControlSignals ctl;
            ctl.oversample_targets = cycle.targets;
            ctl.critic_reliab = cycle.critic_reliab;
            ctl.escalate = guardrail_escalate(summary.accuracy, summary.mean_margin);
            ctl.guardrail = cycle.verdict.guardrail;
            report.control = ctl;
            if (dialogue_out.is_open()) {
                for (std::size_t t = 0; t < cycle.turns.size(); ++t) {
                    ojson line;
                    line["epoch"] = epoch;
                    line["role"] = std::string(to_string(cycle.turns[t].role));
                    line["source"] = std::string(to_string(cycle.turns[t].source));
                    line["text"] = cycle.turns[t].text;
                    line["scores"] = {{"clarity", cycle.turn_scores[t].clarity},
                                      {"jargon", cycle.turn_scores[t].jargon},
                                      {"quality", cycle.turn_scores[t].quality}};
                    dialogue_out << line.dump() << '\n';
                }
                dialogue_out.flush();
            }
            previous_summary = std::move(summary);
        }
        report.checksum_after_agents = weights_checksum();
        if (report.checksum_after_agents != report.checksum_before_agents)
            throw Error("agent cycle modified model parameters");

        if (reports_out.is_open()) {
            reports_out << epoch_report_json(report, data_.vocabulary) << '\n';
            reports_out.flush();
        }
        if (hook_) hook_(report, *this);
        result.epochs.push_back(std::move(report));
        if (epoch == cfg.epochs) {
            result.test_predictions = std::move(test.predictions);
            result.reliability = std::move(test.reliability);
        }
    }
    result.test_labels = test_labels;

    if (out_dir_) {
        ParamFile pf;
        pf.meta["strategy"] = std::string(to_string(cfg.strategy));
        pf.meta["seed"] = std::to_string(seed_);
        std::string vocab;
        for (const auto& v : data_.vocabulary) vocab += (vocab.empty() ? "" : " ") + v;
        pf.meta["vocabulary"] = vocab;
        for (std::size_t k = 0; k < 3; ++k) {
            if (!im.dcae[k]) continue;
            const std::string name = "dcae." + std::string(to_string(kModalities[k]));
            pf.stacks.emplace_back(name + ".encoder", im.dcae[k]->encoder);
            pf.stacks.emplace_back(name + ".decoder", im.dcae[k]->decoder);
        }
        for (std::size_t h = 0; h < num_heads; ++h) {
            const std::string name = im.late() ? "classifier." + std::string(to_string(kModalities[h])) : "classifier";
            pf.stacks.emplace_back(name, im.heads[h].layers);
            for (auto& [key, value] : im.calibration[h].to_meta())
                pf.meta[im.late() ? std::string(to_string(kModalities[h])) + "." + key : key] = value;
        }
        save_params(*out_dir_ / "checkpoints" / "final.params", pf);

        const auto& last = result.final_epoch();
        ojson s;
        s["strategy"] = std::string(to_string(cfg.strategy));
        s["seed"] = seed_;
        s["epochs"] = cfg.epochs;
        s["complete"] = true;
        s["vocabulary"] = data_.vocabulary;
        ojson fin;
        fin["macro_f1"] = last.macro_f1;
        fin["accuracy"] = last.accuracy;
        fin["ece"] = last.ece;
        fin["nll"] = last.nll;
        ojson fam = ojson::object();
        for (std::size_t c = 0; c < data_.vocabulary.size(); ++c) fam[data_.vocabulary[c]] = last.per_family_f1[c];
        fin["per_family_f1"] = fam;
        s["final"] = fin;
        ojson bins_json = ojson::array();
        const double B = static_cast<double>(result.reliability.bins.size());
        for (const auto& b : result.reliability.bins)
            bins_json.push_back({{"bin", b.bin},
                                 {"lower", b.bin / B},
                                 {"upper", (b.bin + 1) / B},
                                 {"count", b.count},
                                 {"confidence", b.confidence},
                                 {"accuracy", b.accuracy}});
        s["reliability"] = bins_json;
        std::ofstream(*out_dir_ / "summary.json") << s.dump(2) << '\n';
    }
    return result;
}

RunResult run_strategy(const RunConfig& config, std::uint64_t seed, const std::filesystem::path& run_dir) {
    StrategyRunner runner(config, prepare_data(load_dataset(config, seed), config, seed), seed);
    if (!run_dir.empty()) runner.set_output(run_dir);
    return runner.run();
}

}  // namespace mmra
