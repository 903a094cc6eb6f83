#ifndef MMRA_CLASSIFIER_HPP
#define MMRA_CLASSIFIER_HPP

#include "mmra/dcae.hpp"
#include "mmra/numerics.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmra {

/// probs sums to one, predicted = argmax (lowest index on ties),
/// confidence = probs[predicted].
struct Prediction {
    std::string hash;
    Vector probs;
    int predicted = 0;
    double confidence = 0.0;
};

Prediction make_prediction(Vector probs, std::string hash = {});

/// Difference between the two largest probabilities (1 for a single class).
double top2_margin(const Vector& probs);

struct ClassifierModel {
    Stack layers;  // ReLU hidden layers, linear output of width C
    std::vector<double> class_weights;
    std::vector<std::string> vocabulary;

    static ClassifierModel create(Index input_dim, std::span<const Index> hidden,
                                  std::vector<std::string> vocabulary, std::uint64_t seed);

    Index input_dim() const { return layers.front().in_dim(); }
    Index num_classes() const { return layers.back().out_dim(); }
};

Vector logits(const ClassifierModel& model, const Vector& z);
Matrix logits(const ClassifierModel& model, const Matrix& Z);

Prediction classify(const ClassifierModel& model, const Vector& z);

struct ClassifierLoss {
    double loss = 0.0;
    ParamGradients<double> grads;
};

/// Mean over the batch of -w_y * sum_c t_c ln p_c, where t is one-hot unless
/// `soft_targets` (C x B) is given.
ClassifierLoss classifier_loss_and_gradients(const ClassifierModel& model, const Matrix& X,
                                             std::span<const int> labels,
                                             std::span<const double> class_weights,
                                             const Matrix* soft_targets = nullptr);

struct ClassifierTrainConfig {
    int epochs = 30;
    int batch_size = 32;
    double lr = 0.05;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> class_weights;  // empty: all ones
    bool soft_labels = false;
    double soft_alpha = 0.1;
};

/// Epoch-at-a-time trainer. Batches come from a shuffled pass when the
/// sampling weights are uniform (or absent) and from with-replacement draws
/// proportional to the weights otherwise.
class ClassifierTrainer {
public:
    ClassifierTrainer(ClassifierModel& model, Matrix X, std::vector<int> labels, ClassifierTrainConfig config);

    double run_epoch(std::span<const double> sampling_weights = {});

    /// Replaces the training inputs (same sample order and width), e.g. after
    /// the upstream encoders moved.
    void set_inputs(Matrix X);

    /// Current model probabilities on the training set, one column per sample.
    Matrix train_probabilities() const;

    void set_batch_observer(BatchObserver observer) { observer_ = std::move(observer); }
    int epochs_run() const { return epochs_run_; }

private:
    std::vector<Index> draw_order(std::span<const double> sampling_weights);

    ClassifierModel& model_;
    Matrix X_;
    std::vector<int> labels_;
    ClassifierTrainConfig config_;
    std::mt19937_64 rng_;
    BatchObserver observer_;
    int epochs_run_ = 0;
};

struct ClassifierTrainResult {
    std::vector<double> loss_trace;
    bool aborted = false;
    std::string abort_reason;
};

ClassifierTrainResult train_classifier(ClassifierModel& model, const Matrix& X, std::span<const int> labels,
                                       const ClassifierTrainConfig& config,
                                       std::span<const double> sampling_weights = {});

using ConfusionMatrix = Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>;

/// Rows are true classes, columns predicted classes.
ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const Prediction> predictions,
                                 Index num_classes);

struct Evaluation {
    std::vector<Prediction> predictions;
    ConfusionMatrix confusion;
};

Evaluation evaluate(const ClassifierModel& model, const Matrix& X, std::span<const int> labels,
                    std::span<const std::string> hashes = {});

/// `sample_hash,true_family,predicted_family,confidence,p_0..p_{C-1}`
void write_prediction_csv(const std::filesystem::path& path, std::span<const Prediction> predictions,
                          std::span<const int> truth, std::span<const std::string> vocabulary);

}  // namespace mmra

#endif
