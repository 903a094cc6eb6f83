#include "mmra/classifier.hpp"

#include "mmra/param_io.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace mmra {

Prediction make_prediction(Vector probs, std::string hash) {
    Prediction p;
    p.hash = std::move(hash);
    Index best = 0;
    for (Index c = 1; c < probs.size(); ++c)
        if (probs(c) > probs(best)) best = c;
    p.predicted = static_cast<int>(best);
    p.confidence = probs.size() ? probs(best) : 0.0;
    p.probs = std::move(probs);
    return p;
}

double top2_margin(const Vector& probs) {
    if (probs.size() < 2) return 1.0;
    double first = -1.0, second = -1.0;
    for (Index c = 0; c < probs.size(); ++c) {
        if (probs(c) > first) {
            second = first;
            first = probs(c);
        } else if (probs(c) > second) {
            second = probs(c);
        }
    }
    return first - second;
}

ClassifierModel ClassifierModel::create(Index input_dim, std::span<const Index> hidden,
                                        std::vector<std::string> vocabulary, std::uint64_t seed) {
    if (vocabulary.empty()) throw ConfigError("classifier needs a non-empty vocabulary");
    std::vector<Index> dims{input_dim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(static_cast<Index>(vocabulary.size()));
    std::mt19937_64 rng(seed);
    ClassifierModel model;
    model.layers = make_stack<double>(dims, Activation::linear, rng);
    model.class_weights.assign(vocabulary.size(), 1.0);
    model.vocabulary = std::move(vocabulary);
    return model;
}

Vector logits(const ClassifierModel& model, const Vector& z) { return forward_stack(model.layers, z); }

Matrix logits(const ClassifierModel& model, const Matrix& Z) { return forward_stack(model.layers, Z); }

Prediction classify(const ClassifierModel& model, const Vector& z) {
    return make_prediction(softmax<double>(logits(model, z)));
}

ClassifierLoss classifier_loss_and_gradients(const ClassifierModel& model, const Matrix& X,
                                             std::span<const int> labels,
                                             std::span<const double> class_weights,
                                             const Matrix* soft_targets) {
    const Index B = X.cols();
    const Index C = model.num_classes();
    if (static_cast<Index>(labels.size()) != B) throw ShapeError("classifier loss: one label per column required");
    if (static_cast<Index>(class_weights.size()) != C) throw ShapeError("classifier loss: one weight per class required");
    StackCache<double> cache;
    const Matrix Z = forward_stack(model.layers, X, &cache);
    const Matrix P = softmax_columns<double>(Z);
    Matrix dZ(C, B);
    ClassifierLoss out;
    for (Index j = 0; j < B; ++j) {
        const int y = labels[static_cast<std::size_t>(j)];
        const double w = class_weights[static_cast<std::size_t>(y)];
        if (soft_targets) {
            const auto t = soft_targets->col(j);
            for (Index c = 0; c < C; ++c)
                if (t(c) != 0.0) out.loss -= w * t(c) * std::log(std::max(P(c, j), kProbFloor));
            dZ.col(j) = w * (P.col(j) - t);
        } else {
            out.loss += weighted_cross_entropy<double>(P.col(j), y, class_weights);
            dZ.col(j) = w * P.col(j);
            dZ(y, j) -= w;
        }
    }
    const double inv = B > 0 ? 1.0 / static_cast<double>(B) : 0.0;
    out.loss *= inv;
    out.grads = backward_stack(model.layers, cache, Matrix(dZ * inv));
    return out;
}

// ---------------------------------------------------------------------------

ClassifierTrainer::ClassifierTrainer(ClassifierModel& model, Matrix X, std::vector<int> labels,
                                     ClassifierTrainConfig config)
    : model_(model), X_(std::move(X)), labels_(std::move(labels)), config_(std::move(config)), rng_(config_.seed) {
    if (X_.rows() != model_.input_dim()) throw ShapeError("classifier training data has the wrong width");
    if (static_cast<Index>(labels_.size()) != X_.cols()) throw ShapeError("one label per training sample required");
    if (config_.batch_size < 1 || config_.lr < 0) throw ConfigError("bad classifier training config");
    if (config_.class_weights.empty()) config_.class_weights.assign(static_cast<std::size_t>(model_.num_classes()), 1.0);
    if (static_cast<Index>(config_.class_weights.size()) != model_.num_classes())
        throw ConfigError("one class weight per class required");
    model_.class_weights = config_.class_weights;
}

void ClassifierTrainer::set_inputs(Matrix X) {
    if (X.rows() != X_.rows() || X.cols() != X_.cols()) throw ShapeError("set_inputs: shape differs from the training set");
    X_ = std::move(X);
}

Matrix ClassifierTrainer::train_probabilities() const { return softmax_columns<double>(logits(model_, X_)); }

std::vector<Index> ClassifierTrainer::draw_order(std::span<const double> weights) {
    const Index n = X_.cols();
    std::vector<Index> order(static_cast<std::size_t>(n));
    const bool uniform =
        weights.empty() || std::all_of(weights.begin(), weights.end(), [&](double w) { return w == weights.front(); });
    if (uniform) {
        std::iota(order.begin(), order.end(), Index{0});
        std::shuffle(order.begin(), order.end(), rng_);
        return order;
    }
    if (static_cast<Index>(weights.size()) != n) throw ShapeError("one sampling weight per training sample required");
    for (double w : weights)
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("sampling weights must be finite and non-negative");
    std::discrete_distribution<Index> pick(weights.begin(), weights.end());
    for (auto& o : order) o = pick(rng_);
    return order;
}

double ClassifierTrainer::run_epoch(std::span<const double> sampling_weights) {
    const Index n = X_.cols();
    if (n == 0) return 0.0;
    const ClassifierModel snapshot = model_;
    std::optional<Matrix> previous;
    if (config_.soft_labels && epochs_run_ > 0) previous = train_probabilities();

    const auto order = draw_order(sampling_weights);
    const auto bs = static_cast<std::size_t>(config_.batch_size);
    const Index C = model_.num_classes();
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
        const std::size_t end = std::min(order.size(), start + bs);
        std::span<const Index> batch(order.data() + start, end - start);
        if (observer_) observer_(batch);
        const auto B = static_cast<Index>(batch.size());
        Matrix Xb(X_.rows(), B);
        std::vector<int> yb;
        Matrix targets;
        if (previous) targets.resize(C, B);
        for (Index k = 0; k < B; ++k) {
            const Index i = batch[static_cast<std::size_t>(k)];
            Xb.col(k) = X_.col(i);
            yb.push_back(labels_[static_cast<std::size_t>(i)]);
            if (previous) {
                targets.col(k) = config_.soft_alpha * previous->col(i);
                targets(yb.back(), k) += 1.0 - config_.soft_alpha;
            }
        }
        auto loss = classifier_loss_and_gradients(model_, Xb, yb, config_.class_weights,
                                                  previous ? &targets : nullptr);
        if (!std::isfinite(loss.loss)) {
            model_ = snapshot;
            throw NumericError("non-finite classifier loss; restored the epoch-start parameters");
        }
        try {
            sgd_step(model_.layers, loss.grads, config_.lr, config_.weight_decay);
        } catch (const NumericError&) {
            model_ = snapshot;
            throw;
        }
        weighted += loss.loss * static_cast<double>(B);
    }
    ++epochs_run_;
    return weighted / static_cast<double>(order.size());
}

ClassifierTrainResult train_classifier(ClassifierModel& model, const Matrix& X, std::span<const int> labels,
                                       const ClassifierTrainConfig& config,
                                       std::span<const double> sampling_weights) {
    std::vector<int> seen(static_cast<std::size_t>(model.num_classes()), 0);
    for (int y : labels) {
        if (y < 0 || y >= model.num_classes()) throw DataError("training label out of range");
        seen[static_cast<std::size_t>(y)] = 1;
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw DataError("train_classifier: every class needs at least one sample");
    ClassifierTrainer trainer(model, X, std::vector<int>(labels.begin(), labels.end()), config);
    ClassifierTrainResult result;
    for (int e = 0; e < config.epochs; ++e) {
        try {
            result.loss_trace.push_back(trainer.run_epoch(sampling_weights));
        } catch (const NumericError& err) {
            result.aborted = true;
            result.abort_reason = err.what();
            break;
        }
    }
    return result;
}

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const Prediction> predictions,
                                 Index num_classes) {
    if (truth.size() != predictions.size()) throw ShapeError("confusion_matrix: length mismatch");
    ConfusionMatrix m = ConfusionMatrix::Zero(num_classes, num_classes);
    for (std::size_t i = 0; i < truth.size(); ++i) ++m(truth[i], predictions[i].predicted);
    return m;
}

Evaluation evaluate(const ClassifierModel& model, const Matrix& X, std::span<const int> labels,
                    std::span<const std::string> hashes) {
    Evaluation ev;
    if (X.cols() == 0) {
        ev.confusion = ConfusionMatrix::Zero(model.num_classes(), model.num_classes());
        return ev;
    }
    const Matrix P = softmax_columns<double>(logits(model, X));
    for (Index j = 0; j < P.cols(); ++j)
        ev.predictions.push_back(
            make_prediction(P.col(j), hashes.empty() ? std::string{} : hashes[static_cast<std::size_t>(j)]));
    ev.confusion = confusion_matrix(labels, ev.predictions, model.num_classes());
    return ev;
}

void write_prediction_csv(const std::filesystem::path& path, std::span<const Prediction> predictions,
                          std::span<const int> truth, std::span<const std::string> vocabulary) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "sample_hash,true_family,predicted_family,confidence";
    for (std::size_t c = 0; c < vocabulary.size(); ++c) out << ",p_" << c;
    out << '\n';
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto& p = predictions[i];
        out << p.hash << ',' << vocabulary[static_cast<std::size_t>(truth[i])] << ','
            << vocabulary[static_cast<std::size_t>(p.predicted)] << ',' << format_double(p.confidence);
        for (Index c = 0; c < p.probs.size(); ++c) out << ',' << format_double(p.probs(c));
        out << '\n';
    }
}

}  // namespace mmra
