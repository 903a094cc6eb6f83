#ifndef MMRA_NUMERICS_HPP
#define MMRA_NUMERICS_HPP

// Dense-layer kernels with exact reverse-mode gradients.
//
// Conventions: batches are matrices with one sample per column, so a layer
// maps an (in_dim x B) block to (out_dim x B). All reductions go through
// Eigen in a fixed order; nothing here spawns threads.

#include "mmra/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mmra {

enum class Activation { relu, linear };

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct DenseLayer {
    MatrixX<Scalar> W;  // out_dim x in_dim
    VectorX<Scalar> b;  // out_dim
    Activation activation = Activation::linear;

    Index in_dim() const { return W.cols(); }
    Index out_dim() const { return W.rows(); }
};

template <typename Scalar>
using LayerStack = std::vector<DenseLayer<Scalar>>;

using Layer = DenseLayer<double>;
using Stack = LayerStack<double>;

/// He-style initialisation: W ~ N(0, 2/in_dim), b = 0.
template <typename Scalar, typename Rng>
DenseLayer<Scalar> make_dense_layer(Index in_dim, Index out_dim, Activation act, Rng& rng) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(in_dim)));
    DenseLayer<Scalar> layer;
    layer.W.resize(out_dim, in_dim);
    for (Index c = 0; c < in_dim; ++c)
        for (Index r = 0; r < out_dim; ++r) layer.W(r, c) = static_cast<Scalar>(normal(rng));
    layer.b = VectorX<Scalar>::Zero(out_dim);
    layer.activation = act;
    return layer;
}

/// Builds dims[0] -> dims[1] -> ... -> dims.back(); every layer is ReLU
/// except the last, which uses `last`.
template <typename Scalar, typename Rng>
LayerStack<Scalar> make_stack(std::span<const Index> dims, Activation last, Rng& rng) {
    LayerStack<Scalar> stack;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const bool final_layer = i + 2 == dims.size();
        stack.push_back(make_dense_layer<Scalar>(dims[i], dims[i + 1],
                                                 final_layer ? last : Activation::relu, rng));
    }
    return stack;
}

template <typename Scalar>
void check_stack_shapes(const LayerStack<Scalar>& layers) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].b.size() != layers[i].W.rows())
            throw ShapeError("layer " + std::to_string(i) + ": bias length does not match W rows");
        if (i > 0 && layers[i].W.cols() != layers[i - 1].W.rows())
            throw ShapeError("layer " + std::to_string(i) + ": in_dim does not match previous out_dim");
    }
}

/// Inputs and pre-activations of every layer, enough for exact backprop.
template <typename Scalar>
struct StackCache {
    std::vector<MatrixX<Scalar>> inputs;
    std::vector<MatrixX<Scalar>> pre;
};

template <typename Scalar>
MatrixX<Scalar> forward_stack(const LayerStack<Scalar>& layers, const MatrixX<Scalar>& X,
                              StackCache<Scalar>* cache = nullptr) {
    if (!layers.empty() && X.rows() != layers.front().in_dim())
        throw ShapeError("forward_stack: input has " + std::to_string(X.rows()) +
                         " rows, first layer expects " + std::to_string(layers.front().in_dim()));
    if (cache) {
        cache->inputs.clear();
        cache->pre.clear();
    }
    MatrixX<Scalar> h = X;
    for (const auto& layer : layers) {
        MatrixX<Scalar> a = layer.W * h;
        a.colwise() += layer.b;
        if (cache) {
            cache->inputs.push_back(std::move(h));
            cache->pre.push_back(a);
        }
        if (layer.activation == Activation::relu) a = a.cwiseMax(Scalar(0));
        h = std::move(a);
    }
    return h;
}

template <typename Scalar>
VectorX<Scalar> forward_stack(const LayerStack<Scalar>& layers, const VectorX<Scalar>& x,
                              StackCache<Scalar>* cache = nullptr) {
    MatrixX<Scalar> X = x;
    return forward_stack(layers, X, cache).col(0);
}

template <typename Scalar>
struct ParamGradients {
    std::vector<MatrixX<Scalar>> dW;
    std::vector<VectorX<Scalar>> db;
    MatrixX<Scalar> dX;  // gradient with respect to the stack input

    static ParamGradients zeros_like(const LayerStack<Scalar>& layers) {
        ParamGradients g;
        for (const auto& l : layers) {
            g.dW.push_back(MatrixX<Scalar>::Zero(l.W.rows(), l.W.cols()));
            g.db.push_back(VectorX<Scalar>::Zero(l.b.size()));
        }
        return g;
    }
};

/// Reverse pass through a stack given dLoss/dOutput (one column per sample).
template <typename Scalar>
ParamGradients<Scalar> backward_stack(const LayerStack<Scalar>& layers,
                                      const StackCache<Scalar>& cache,
                                      const MatrixX<Scalar>& upstream) {
    if (cache.pre.size() != layers.size())
        throw ShapeError("backward_stack: cache does not belong to this stack");
    ParamGradients<Scalar> g = ParamGradients<Scalar>::zeros_like(layers);
    MatrixX<Scalar> delta = upstream;
    for (std::size_t k = layers.size(); k-- > 0;) {
        const auto& layer = layers[k];
        if (delta.rows() != layer.out_dim() || delta.cols() != cache.pre[k].cols())
            throw ShapeError("backward_stack: upstream gradient shape mismatch at layer " +
                             std::to_string(k));
        if (layer.activation == Activation::relu)
            delta = (cache.pre[k].array() > Scalar(0)).select(delta, Scalar(0));
        g.dW[k] = delta * cache.inputs[k].transpose();
        g.db[k] = delta.rowwise().sum();
        delta = layer.W.transpose() * delta;
    }
    g.dX = std::move(delta);
    return g;
}

template <typename Scalar>
VectorX<Scalar> softmax(const VectorX<Scalar>& logits) {
    const Scalar shift = logits.maxCoeff();
    VectorX<Scalar> e = (logits.array() - shift).exp();
    return e / e.sum();
}

/// Column-wise softmax.
template <typename Scalar>
MatrixX<Scalar> softmax_columns(const MatrixX<Scalar>& logits) {
    MatrixX<Scalar> out(logits.rows(), logits.cols());
    for (Index j = 0; j < logits.cols(); ++j) out.col(j) = softmax<Scalar>(logits.col(j));
    return out;
}

inline constexpr double kProbFloor = 1e-12;

/// -w_y * ln(max(p_y, 1e-12))
template <typename Scalar>
Scalar weighted_cross_entropy(const VectorX<Scalar>& probs, Index true_class,
                              std::span<const double> class_weights) {
    const Scalar p = std::max(probs(true_class), Scalar(kProbFloor));
    return -static_cast<Scalar>(class_weights[static_cast<std::size_t>(true_class)]) * std::log(p);
}

template <typename Scalar>
bool all_finite(const MatrixX<Scalar>& m) {
    return m.allFinite();
}

/// p <- p - lr * (g + weight_decay * p). Throws NumericError naming the first
/// layer with a non-finite gradient; parameters are untouched in that case.
template <typename Scalar>
void sgd_step(LayerStack<Scalar>& layers, const ParamGradients<Scalar>& grads, Scalar lr,
              Scalar weight_decay) {
    if (grads.dW.size() != layers.size() || grads.db.size() != layers.size())
        throw ShapeError("sgd_step: gradient count does not match layer count");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        if (grads.dW[k].rows() != layers[k].W.rows() || grads.dW[k].cols() != layers[k].W.cols() ||
            grads.db[k].size() != layers[k].b.size())
            throw ShapeError("sgd_step: gradient shape mismatch at layer " + std::to_string(k));
        if (!grads.dW[k].allFinite() || !grads.db[k].allFinite())
            throw NumericError("non-finite gradient in layer " + std::to_string(k),
                               static_cast<int>(k));
    }
    for (std::size_t k = 0; k < layers.size(); ++k) {
        layers[k].W -= lr * (grads.dW[k] + weight_decay * layers[k].W);
        layers[k].b -= lr * (grads.db[k] + weight_decay * layers[k].b);
    }
}

template <typename Scalar>
Scalar gradient_norm(const ParamGradients<Scalar>& g) {
    Scalar sq = 0;
    for (const auto& w : g.dW) sq += w.squaredNorm();
    for (const auto& b : g.db) sq += b.squaredNorm();
    return std::sqrt(sq);
}

/// Scales every gradient by min(1, max_norm / joint_norm).
template <typename Scalar>
void clip_gradients(std::span<ParamGradients<Scalar>* const> groups, Scalar max_norm) {
    if (!(max_norm > 0)) return;
    Scalar sq = 0;
    for (const auto* g : groups) {
        const Scalar n = gradient_norm(*g);
        sq += n * n;
    }
    const Scalar norm = std::sqrt(sq);
    if (!(norm > max_norm) || !std::isfinite(norm)) return;
    const Scalar scale = max_norm / norm;
    for (auto* g : groups) {
        for (auto& w : g->dW) w *= scale;
        for (auto& b : g->db) b *= scale;
    }
}

// ---------------------------------------------------------------------------
// Finite-difference checking

/// A named, contiguous block of parameters (a W or a b).
template <typename Scalar>
struct ParamView {
    Scalar* data;
    Index size;
    Index rows;
    std::string name;
};

template <typename Scalar>
struct ConstParamView {
    const Scalar* data;
    Index size;
    std::string name;
};

template <typename Scalar>
std::vector<ParamView<Scalar>> param_views(LayerStack<Scalar>& layers, const std::string& prefix = "") {
    std::vector<ParamView<Scalar>> views;
    for (std::size_t k = 0; k < layers.size(); ++k) {
        auto& l = layers[k];
        views.push_back({l.W.data(), l.W.size(), l.W.rows(), prefix + "W" + std::to_string(k)});
        views.push_back({l.b.data(), l.b.size(), l.b.size(), prefix + "b" + std::to_string(k)});
    }
    return views;
}

template <typename Scalar>
std::vector<ConstParamView<Scalar>> gradient_views(const ParamGradients<Scalar>& g,
                                                   const std::string& prefix = "") {
    std::vector<ConstParamView<Scalar>> views;
    for (std::size_t k = 0; k < g.dW.size(); ++k) {
        views.push_back({g.dW[k].data(), g.dW[k].size(), prefix + "W" + std::to_string(k)});
        views.push_back({g.db[k].data(), g.db[k].size(), prefix + "b" + std::to_string(k)});
    }
    return views;
}

struct GradCheckReport {
    bool passed = true;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::string worst_param;  // e.g. "W1"
    Index worst_row = -1;
    Index worst_col = -1;
};

/// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps entries
/// whose true gradient is ~0 from dominating through round-off.
inline double gradient_relative_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) /
           std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares analytic gradients against central differences with step h.
/// `loss` must re-evaluate the objective from the current parameter values.
template <typename Scalar>
GradCheckReport grad_check(std::span<const ParamView<Scalar>> params,
                           std::span<const ConstParamView<Scalar>> analytic,
                           const std::function<Scalar()>& loss, double tolerance, double h = 1e-5) {
    if (params.size() != analytic.size())
        throw ShapeError("grad_check: parameter and gradient block counts differ");
    GradCheckReport report;
    for (std::size_t blk = 0; blk < params.size(); ++blk) {
        const auto& p = params[blk];
        if (analytic[blk].size != p.size)
            throw ShapeError("grad_check: block " + p.name + " size mismatch");
        for (Index i = 0; i < p.size; ++i) {
            const Scalar saved = p.data[i];
            p.data[i] = saved + static_cast<Scalar>(h);
            const double up = static_cast<double>(loss());
            p.data[i] = saved - static_cast<Scalar>(h);
            const double down = static_cast<double>(loss());
            p.data[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double err =
                gradient_relative_error(static_cast<double>(analytic[blk].data[i]), numeric);
            ++report.checked;
            if (err > report.max_rel_error) {
                report.max_rel_error = err;
                report.worst_param = p.name;
                report.worst_row = i % p.rows;
                report.worst_col = i / p.rows;
            }
        }
    }
    report.passed = report.max_rel_error <= tolerance;
    return report;
}

/// Shifts biases so that no pre-activation of a ReLU unit lies within
/// `margin` of the kink for the given batch.
template <typename Scalar>
void nudge_off_kinks(LayerStack<Scalar>& layers, const MatrixX<Scalar>& X, Scalar margin) {
    MatrixX<Scalar> h = X;
    for (auto& layer : layers) {
        MatrixX<Scalar> a = layer.W * h;
        a.colwise() += layer.b;
        if (layer.activation == Activation::relu) {
            for (Index r = 0; r < a.rows(); ++r) {
                auto clear_of_kink = [&](Scalar shift) {
                    return ((a.row(r).array() + shift).abs() >= margin).all();
                };
                Scalar shift = 0;
                for (int step = 1; !clear_of_kink(shift) && step < 64; ++step) {
                    const Scalar magnitude = margin * Scalar(step);
                    shift = (step % 2) ? magnitude : -magnitude;
                }
                layer.b(r) += shift;
                a.row(r).array() += shift;
            }
            a = a.cwiseMax(Scalar(0));
        }
        h = std::move(a);
    }
}

/// FNV-1a over the raw bytes of every parameter; used to prove that code
/// paths leave a model bit-identical.
template <typename Scalar>
std::uint64_t parameter_checksum(const LayerStack<Scalar>& layers,
                                 std::uint64_t seed = 1469598103934665603ULL) {
    std::uint64_t hash = seed;
    auto mix = [&hash](const Scalar* data, Index n) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < static_cast<std::size_t>(n) * sizeof(Scalar); ++i) {
            hash ^= bytes[i];
            hash *= 1099511628211ULL;
        }
    };
    for (const auto& l : layers) {
        mix(l.W.data(), l.W.size());
        mix(l.b.data(), l.b.size());
    }
    return hash;
}

}  // namespace mmra

#endif
