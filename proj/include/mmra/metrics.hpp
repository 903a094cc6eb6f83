#ifndef MMRA_METRICS_HPP
#define MMRA_METRICS_HPP

#include "mmra/classifier.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace mmra {

/// Per-class F1 = 2PR / (P + R); a class with P + R = 0 scores 0.
std::vector<double> per_class_f1(const ConfusionMatrix& confusion);

/// Unweighted mean of per_class_f1.
double macro_f1(const ConfusionMatrix& confusion);

/// Fraction of the confusion mass on the diagonal.
double accuracy(const ConfusionMatrix& confusion);

struct BinStats {
    int bin = 0;
    long count = 0;
    double confidence = 0.0;  // mean confidence in the bin, 0 when empty
    double accuracy = 0.0;    // empirical accuracy in the bin, 0 when empty
};

struct EceResult {
    double ece = 0.0;
    std::vector<BinStats> bins;
};

inline constexpr int kDefaultEceBins = 15;

/// Equal-width, right-closed bins over (0, 1]:
/// ECE = sum_b (n_b / N) |acc(b) - conf(b)|.
EceResult ece(std::span<const double> confidences, std::span<const std::uint8_t> correct,
              int num_bins = kDefaultEceBins);
EceResult ece(std::span<const Prediction> predictions, std::span<const int> truth, int num_bins = kDefaultEceBins);

/// Mean -ln p_true with a 1e-12 floor.
double nll(std::span<const Prediction> predictions, std::span<const int> truth);

/// `bin,lower,upper,count,confidence,accuracy`
void write_reliability_csv(const std::filesystem::path& path, const EceResult& result);

}  // namespace mmra

#endif
