#include "mmra/metrics.hpp"

#include "mmra/param_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mmra {

std::vector<double> per_class_f1(const ConfusionMatrix& confusion) {
    const Index C = confusion.rows();
    std::vector<double> f1(static_cast<std::size_t>(C), 0.0);
    for (Index c = 0; c < C; ++c) {
        const double tp = static_cast<double>(confusion(c, c));
        const double predicted = static_cast<double>(confusion.col(c).sum());
        const double actual = static_cast<double>(confusion.row(c).sum());
        const double precision = predicted > 0 ? tp / predicted : 0.0;
        const double recall = actual > 0 ? tp / actual : 0.0;
        if (precision + recall > 0) f1[static_cast<std::size_t>(c)] = 2 * precision * recall / (precision + recall);
    }
    return f1;
}

double macro_f1(const ConfusionMatrix& confusion) {
    const auto f1 = per_class_f1(confusion);
    if (f1.empty()) return 0.0;
    double sum = 0.0;
    for (double v : f1) sum += v;
    return sum / static_cast<double>(f1.size());
}

double accuracy(const ConfusionMatrix& confusion) {
    const double total = static_cast<double>(confusion.sum());
    return total > 0 ? static_cast<double>(confusion.trace()) / total : 0.0;
}

EceResult ece(std::span<const double> confidences, std::span<const std::uint8_t> correct, int num_bins) {
    if (num_bins < 1) throw ConfigError("ECE needs at least one bin");
    if (confidences.empty()) throw DataError("ECE of an empty prediction set");
    if (confidences.size() != correct.size()) throw ShapeError("ECE: length mismatch");
    EceResult r;
    r.bins.resize(static_cast<std::size_t>(num_bins));
    std::vector<double> conf_sum(static_cast<std::size_t>(num_bins), 0.0), hits(static_cast<std::size_t>(num_bins), 0.0);
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        const double c = confidences[i];
        if (!(c >= 0.0 && c <= 1.0)) throw DataError("ECE: confidence outside [0, 1]");
        // Bin b covers (b/B, (b+1)/B]; a confidence of exactly 0 joins bin 0.
        int b = std::clamp(static_cast<int>(std::ceil(c * num_bins)) - 1, 0, num_bins - 1);
        if (b > 0 && c <= static_cast<double>(b) / num_bins) --b;
        auto& bin = r.bins[static_cast<std::size_t>(b)];
        ++bin.count;
        conf_sum[static_cast<std::size_t>(b)] += c;
        hits[static_cast<std::size_t>(b)] += correct[i] ? 1.0 : 0.0;
    }
    const double N = static_cast<double>(confidences.size());
    for (int b = 0; b < num_bins; ++b) {
        auto& bin = r.bins[static_cast<std::size_t>(b)];
        bin.bin = b;
        if (bin.count == 0) continue;
        const double n = static_cast<double>(bin.count);
        bin.confidence = conf_sum[static_cast<std::size_t>(b)] / n;
        bin.accuracy = hits[static_cast<std::size_t>(b)] / n;
        r.ece += (n / N) * std::abs(bin.accuracy - bin.confidence);
    }
    return r;
}

EceResult ece(std::span<const Prediction> predictions, std::span<const int> truth, int num_bins) {
    if (predictions.size() != truth.size()) throw ShapeError("ECE: length mismatch");
    std::vector<double> conf;
    std::vector<std::uint8_t> hit;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        conf.push_back(predictions[i].confidence);
        hit.push_back(predictions[i].predicted == truth[i] ? 1 : 0);
    }
    return ece(conf, hit, num_bins);
}

double nll(std::span<const Prediction> predictions, std::span<const int> truth) {
    if (predictions.empty()) throw DataError("NLL of an empty prediction set");
    if (predictions.size() != truth.size()) throw ShapeError("NLL: length mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        total -= std::log(std::max(predictions[i].probs(truth[i]), kProbFloor));
    return total / static_cast<double>(predictions.size());
}

void write_reliability_csv(const std::filesystem::path& path, const EceResult& result) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "bin,lower,upper,count,confidence,accuracy\n";
    const double B = static_cast<double>(result.bins.size());
    for (const auto& b : result.bins)
        out << b.bin << ',' << format_double(b.bin / B) << ',' << format_double((b.bin + 1) / B) << ',' << b.count
            << ',' << format_double(b.confidence) << ',' << format_double(b.accuracy) << '\n';
}

}  // namespace mmra
