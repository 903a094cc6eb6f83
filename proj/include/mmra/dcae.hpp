#ifndef MMRA_DCAE_HPP
#define MMRA_DCAE_HPP

// Deep contrastive autoencoder: a symmetric encoder/decoder pair trained on
//
//   L = mean_i ||x_i - x_hat_i||^2 + lambda * L_sup(z)
//
// where L_sup is the supervised contrastive loss over L2-normalised latents.

#include "mmra/dataset.hpp"
#include "mmra/numerics.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace mmra {

/// Encoder widths for a modality, input first and latent last.
/// 1901 -> 1024 -> 512 -> 256 -> 128 for the static view, 77 -> 64 -> 48 -> 32
/// and 87 -> 64 -> 48 -> 32 for the dynamic and network views; any other
/// width gets four layers shrinking geometrically to ceil(d / 4).
std::vector<Index> default_encoder_dims(Index input_dim);

struct DcaeModel {
    Modality modality = Modality::Static;
    Stack encoder;
    Stack decoder;
    double lambda = 1.0;
    double temperature = 0.5;

    static DcaeModel create(Modality modality, std::span<const Index> encoder_dims, double lambda,
                            double temperature, std::uint64_t seed);

    Index input_dim() const { return encoder.front().in_dim(); }
    Index latent_dim() const { return encoder.back().out_dim(); }
    std::vector<Index> encoder_dims() const;

    /// Throws ShapeError unless the decoder mirrors the encoder.
    void check_symmetric() const;
};

struct LatentEmbedding {
    std::string hash;
    int family = -1;
    Modality modality = Modality::Static;
    Vector z;
};

Vector encode(const DcaeModel& model, const Vector& x);
Matrix encode(const DcaeModel& model, const Matrix& X);

/// ||x - x_hat||^2
double reconstruction_loss(const Vector& x, const Vector& x_hat);

struct SupconResult {
    double loss = 0.0;
    Matrix grad;             // dL/dZ, same shape as Z
    int anchors_used = 0;    // anchors with at least one positive
    bool perturbed = false;  // a zero-norm latent was nudged by 1e-8
};

/// Supervised contrastive loss over the columns of Z:
///   mean over anchors i with positives P(i) of
///   -1/|P(i)| * sum_p ln( exp(zi.zp / t) / sum_{a != i} exp(zi.za / t) )
/// with every z L2-normalised first. Anchors without positives are skipped;
/// a batch with none returns 0 and logs a warning.
SupconResult supcon_loss_and_grad(const Matrix& Z, std::span<const int> labels, double temperature);
double supcon_loss(const Matrix& Z, std::span<const int> labels, double temperature);

/// Batch objective: mean reconstruction + lambda * supcon.
double total_loss(const Matrix& X, const Matrix& X_hat, const Matrix& Z, std::span<const int> labels,
                  double lambda, double temperature);

struct DcaeLoss {
    double total = 0.0;
    double reconstruction = 0.0;
    double contrastive = 0.0;
    ParamGradients<double> encoder;
    ParamGradients<double> decoder;
};

DcaeLoss dcae_loss_and_gradients(const DcaeModel& model, const Matrix& X, std::span<const int> labels);

struct TrainConfig {
    int epochs = 10;
    int batch_size = 64;
    double lr = 0.01;
    double weight_decay = 0.0;
    double clip_norm = 5.0;  // joint encoder + decoder gradient norm; <= 0 disables
    std::uint64_t seed = 0;
};

using BatchObserver = std::function<void(std::span<const Index>)>;

/// Epoch-at-a-time mini-batch SGD on the DCAE objective. X holds one sample
/// per column.
class DcaeTrainer {
public:
    DcaeTrainer(DcaeModel& model, Matrix X, std::vector<int> labels, TrainConfig config);

    /// Runs one epoch and returns its sample-weighted mean loss. On a
    /// non-finite loss the model is restored to its state at epoch start and
    /// NumericError is thrown.
    double run_epoch();

    void set_batch_observer(BatchObserver observer) { observer_ = std::move(observer); }

private:
    DcaeModel& model_;
    Matrix X_;
    std::vector<int> labels_;
    TrainConfig config_;
    std::mt19937_64 rng_;
    BatchObserver observer_;
};

struct DcaeTrainResult {
    std::vector<double> loss_trace;
    bool aborted = false;
    std::string abort_reason;
};

DcaeTrainResult train_dcae(DcaeModel& model, const Matrix& X, std::span<const int> labels,
                           const TrainConfig& config);

/// One embedding per sample that carries this model's modality, in order.
std::vector<LatentEmbedding> embed_dataset(const DcaeModel& model, std::span<const AlignedSample> samples);

/// `sample_hash,family,z_0..z_{k-1}`
void write_latent_csv(const std::filesystem::path& path, std::span<const LatentEmbedding> embeddings,
                      std::span<const std::string> vocabulary);

}  // namespace mmra

#endif
