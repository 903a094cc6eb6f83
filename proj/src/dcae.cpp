#include "mmra/dcae.hpp"

#include <array>

#include "mmra/log.hpp"
#include "mmra/param_io.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

namespace mmra {

std::vector<Index> default_encoder_dims(Index input_dim) {
    if (input_dim == 1901) return {1901, 1024, 512, 256, 128};
    if (input_dim == 77) return {77, 64, 48, 32};
    if (input_dim == 87) return {87, 64, 48, 32};
    const double d = static_cast<double>(input_dim);
    const double latent = std::max(2.0, std::ceil(d / 4.0));
    std::vector<Index> dims{input_dim};
    for (int k = 1; k <= 4; ++k)
        dims.push_back(static_cast<Index>(std::llround(d * std::pow(latent / d, k / 4.0))));
    dims.back() = static_cast<Index>(latent);
    return dims;
}

DcaeModel DcaeModel::create(Modality modality, std::span<const Index> encoder_dims, double lambda,
                            double temperature, std::uint64_t seed) {
    if (encoder_dims.size() < 2) throw ConfigError("encoder needs at least an input and a latent width");
    for (Index d : encoder_dims)
        if (d < 1) throw ConfigError("encoder widths must be positive");
    if (lambda < 0) throw ConfigError("lambda must be non-negative");
    if (temperature <= 0) throw ConfigError("contrastive temperature must be positive");
    std::mt19937_64 rng(seed);
    DcaeModel model;
    model.modality = modality;
    model.lambda = lambda;
    model.temperature = temperature;
    model.encoder = make_stack<double>(encoder_dims, Activation::linear, rng);
    std::vector<Index> reversed(encoder_dims.rbegin(), encoder_dims.rend());
    model.decoder = make_stack<double>(reversed, Activation::linear, rng);
    model.check_symmetric();
    return model;
}

std::vector<Index> DcaeModel::encoder_dims() const {
    std::vector<Index> dims;
    if (encoder.empty()) return dims;
    dims.push_back(encoder.front().in_dim());
    for (const auto& l : encoder) dims.push_back(l.out_dim());
    return dims;
}

void DcaeModel::check_symmetric() const {
    check_stack_shapes(encoder);
    check_stack_shapes(decoder);
    if (encoder.size() != decoder.size() || encoder.empty())
        throw ShapeError("decoder must have as many layers as the encoder");
    for (std::size_t k = 0; k < encoder.size(); ++k) {
        const auto& e = encoder[k];
        const auto& d = decoder[decoder.size() - 1 - k];
        if (e.in_dim() != d.out_dim() || e.out_dim() != d.in_dim())
            throw ShapeError("decoder layer " + std::to_string(decoder.size() - 1 - k) +
                             " does not mirror encoder layer " + std::to_string(k));
    }
}

Vector encode(const DcaeModel& model, const Vector& x) { return forward_stack(model.encoder, x); }

Matrix encode(const DcaeModel& model, const Matrix& X) { return forward_stack(model.encoder, X); }

double reconstruction_loss(const Vector& x, const Vector& x_hat) {
    if (x.size() != x_hat.size()) throw ShapeError("reconstruction_loss: length mismatch");
    return (x - x_hat).squaredNorm();
}

SupconResult supcon_loss_and_grad(const Matrix& Z, std::span<const int> labels, double temperature) {
    const Index n = Z.cols();
    if (static_cast<Index>(labels.size()) != n) throw ShapeError("supcon: one label per latent required");
    SupconResult out;
    out.grad = Matrix::Zero(Z.rows(), n);
    if (n < 2) return out;

    constexpr double kEps = 1e-8;
    Matrix Zp = Z;
    Vector norms(n);
    for (Index i = 0; i < n; ++i) {
        if (Zp.col(i).norm() < kEps) {
            Zp.col(i).array() += kEps;
            out.perturbed = true;
        }
        norms(i) = Zp.col(i).norm();
    }
    if (out.perturbed) log::warn("supcon: zero-norm latent perturbed by 1e-8");
    Matrix U = Zp;
    for (Index i = 0; i < n; ++i) U.col(i) /= norms(i);
    const Matrix S = (U.transpose() * U) / temperature;

    std::vector<Index> anchors;
    std::vector<int> positives(static_cast<std::size_t>(n), 0);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j)
            if (j != i && labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)])
                ++positives[static_cast<std::size_t>(i)];
        if (positives[static_cast<std::size_t>(i)] > 0) anchors.push_back(i);
    }
    out.anchors_used = static_cast<int>(anchors.size());
    if (anchors.empty()) {
        log::warn("supcon: no anchor in the batch has a positive; loss is 0");
        return out;
    }

    const double inv_anchors = 1.0 / static_cast<double>(anchors.size());
    Matrix G = Matrix::Zero(n, n);  // dL/dS
    double loss = 0.0;
    for (Index i : anchors) {
        double m = -std::numeric_limits<double>::infinity();
        for (Index a = 0; a < n; ++a)
            if (a != i) m = std::max(m, S(i, a));
        double denom = 0.0;
        for (Index a = 0; a < n; ++a)
            if (a != i) denom += std::exp(S(i, a) - m);
        const double lse = m + std::log(denom);
        const double inv_pos = 1.0 / positives[static_cast<std::size_t>(i)];
        double pos_sum = 0.0;
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const bool pos = labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)];
            if (pos) pos_sum += S(i, j);
            G(i, j) = inv_anchors * (std::exp(S(i, j) - lse) - (pos ? inv_pos : 0.0));
        }
        loss += lse - inv_pos * pos_sum;
    }
    out.loss = loss * inv_anchors;

    const Matrix dU = U * (G + G.transpose()) / temperature;
    for (Index i = 0; i < n; ++i) {
        const auto u = U.col(i);
        const Vector g = dU.col(i);
        out.grad.col(i) = (g - u * u.dot(g)) / norms(i);
    }
    return out;
}

double supcon_loss(const Matrix& Z, std::span<const int> labels, double temperature) {
    return supcon_loss_and_grad(Z, labels, temperature).loss;
}

double total_loss(const Matrix& X, const Matrix& X_hat, const Matrix& Z, std::span<const int> labels,
                  double lambda, double temperature) {
    if (X.rows() != X_hat.rows() || X.cols() != X_hat.cols()) throw ShapeError("total_loss: shape mismatch");
    const double recon = X.cols() ? (X - X_hat).colwise().squaredNorm().sum() / static_cast<double>(X.cols()) : 0.0;
    if (lambda == 0.0) return recon;
    return recon + lambda * supcon_loss(Z, labels, temperature);
}

DcaeLoss dcae_loss_and_gradients(const DcaeModel& model, const Matrix& X, std::span<const int> labels) {
    StackCache<double> enc_cache, dec_cache;
    const Matrix Z = forward_stack(model.encoder, X, &enc_cache);
    const Matrix X_hat = forward_stack(model.decoder, Z, &dec_cache);
    const double B = static_cast<double>(X.cols());

    DcaeLoss out;
    const Matrix diff = X_hat - X;
    out.reconstruction = diff.colwise().squaredNorm().sum() / B;
    out.decoder = backward_stack(model.decoder, dec_cache, Matrix(2.0 * diff / B));
    Matrix dZ = out.decoder.dX;
    if (model.lambda != 0.0) {
        const auto sc = supcon_loss_and_grad(Z, labels, model.temperature);
        out.contrastive = sc.loss;
        dZ += model.lambda * sc.grad;
    }
    out.total = out.reconstruction + model.lambda * out.contrastive;
    out.encoder = backward_stack(model.encoder, enc_cache, dZ);
    return out;
}

// ---------------------------------------------------------------------------
// Training

DcaeTrainer::DcaeTrainer(DcaeModel& model, Matrix X, std::vector<int> labels, TrainConfig config)
    : model_(model), X_(std::move(X)), labels_(std::move(labels)), config_(config), rng_(config.seed) {
    if (X_.rows() != model_.input_dim()) throw ShapeError("DCAE training data has the wrong feature width");
    if (static_cast<Index>(labels_.size()) != X_.cols()) throw ShapeError("one label per training sample required");
    if (config_.batch_size < 1 || config_.lr < 0) throw ConfigError("bad DCAE training config");
}

double DcaeTrainer::run_epoch() {
    const Index n = X_.cols();
    if (n == 0) return 0.0;
    const DcaeModel snapshot = model_;
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng_);

    double weighted = 0.0;
    const auto bs = static_cast<std::size_t>(config_.batch_size);
    for (std::size_t start = 0; start < order.size(); start += bs) {
        const std::size_t end = std::min(order.size(), start + bs);
        std::span<const Index> batch(order.data() + start, end - start);
        if (observer_) observer_(batch);
        Matrix Xb(X_.rows(), static_cast<Index>(batch.size()));
        std::vector<int> yb;
        for (std::size_t k = 0; k < batch.size(); ++k) {
            Xb.col(static_cast<Index>(k)) = X_.col(batch[k]);
            yb.push_back(labels_[static_cast<std::size_t>(batch[k])]);
        }
        auto loss = dcae_loss_and_gradients(model_, Xb, yb);
        if (!std::isfinite(loss.total)) {
            model_ = snapshot;
            throw NumericError("non-finite DCAE loss; restored the epoch-start parameters");
        }
        std::array<ParamGradients<double>*, 2> groups{&loss.encoder, &loss.decoder};
        clip_gradients<double>(groups, config_.clip_norm);
        try {
            sgd_step(model_.encoder, loss.encoder, config_.lr, config_.weight_decay);
            sgd_step(model_.decoder, loss.decoder, config_.lr, config_.weight_decay);
        } catch (const NumericError&) {
            model_ = snapshot;
            throw;
        }
        weighted += loss.total * static_cast<double>(batch.size());
    }
    return weighted / static_cast<double>(n);
}

DcaeTrainResult train_dcae(DcaeModel& model, const Matrix& X, std::span<const int> labels,
                           const TrainConfig& config) {
    if (model.lambda > 0 && config.epochs > 0) {
        std::vector<int> distinct(labels.begin(), labels.end());
        std::sort(distinct.begin(), distinct.end());
        if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() < 2)
            throw ConfigError("contrastive training needs at least two classes");
    }
    DcaeTrainer trainer(model, X, std::vector<int>(labels.begin(), labels.end()), config);
    DcaeTrainResult result;
    for (int e = 0; e < config.epochs; ++e) {
        try {
            result.loss_trace.push_back(trainer.run_epoch());
        } catch (const NumericError& err) {
            result.aborted = true;
            result.abort_reason = err.what();
            log::error(std::string("DCAE training aborted: ") + err.what());
            break;
        }
    }
    return result;
}

std::vector<LatentEmbedding> embed_dataset(const DcaeModel& model, std::span<const AlignedSample> samples) {
    const auto m = static_cast<std::size_t>(index_of(model.modality));
    std::vector<LatentEmbedding> out;
    for (const auto& s : samples) {
        if (!s.features[m]) continue;
        if (s.features[m]->size() != model.input_dim())
            throw ShapeError("embed_dataset: sample '" + s.hash + "' has the wrong feature width");
        out.push_back({s.hash, s.family, model.modality, encode(model, *s.features[m])});
    }
    return out;
}

void write_latent_csv(const std::filesystem::path& path, std::span<const LatentEmbedding> embeddings,
                      std::span<const std::string> vocabulary) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "sample_hash,family";
    const Index k = embeddings.empty() ? 0 : embeddings.front().z.size();
    for (Index j = 0; j < k; ++j) out << ",z_" << j;
    out << '\n';
    for (const auto& e : embeddings) {
        out << e.hash << ',' << vocabulary[static_cast<std::size_t>(e.family)];
        for (Index j = 0; j < e.z.size(); ++j) out << ',' << format_double(e.z(j));
        out << '\n';
    }
}

}  // namespace mmra
