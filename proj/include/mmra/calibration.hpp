#ifndef MMRA_CALIBRATION_HPP
#define MMRA_CALIBRATION_HPP

// Post-hoc calibration fitted on validation logits. The classifier itself is
// never touched.

#include "mmra/classifier.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace mmra {

enum class CalibrationKind { identity, temperature, vector };

std::string_view to_string(CalibrationKind k);
CalibrationKind calibration_kind_from_string(std::string_view s);

struct CalibrationModel {
    CalibrationKind kind = CalibrationKind::identity;
    double T = 1.0;  // temperature kind
    Vector a;        // vector kind: per-class scale
    Vector d;        // vector kind: per-class offset
    /// Convex mix with the uncalibrated softmax: blend * calibrated +
    /// (1 - blend) * softmax(z). 1 means plain calibration.
    double blend = 1.0;

    std::map<std::string, std::string> to_meta() const;
    static CalibrationModel from_meta(const std::map<std::string, std::string>& meta);
};

/// Temperature: golden-section search over ln T in [-3, 3] (T = 1 is always a
/// candidate). Vector: 500 backtracking gradient steps on (a, d) from the
/// identity. Both minimise mean validation NLL. `logits` is C x N.
CalibrationModel fit_calibration(CalibrationKind kind, const Matrix& logits, std::span<const int> labels);

/// identity: softmax(z); temperature: softmax(z / T); vector: softmax(a * z + d).
Vector apply_calibration(const CalibrationModel& model, const Vector& logits);
Matrix apply_calibration(const CalibrationModel& model, const Matrix& logits);

std::vector<Prediction> calibrated_predictions(const CalibrationModel& model, const Matrix& logits,
                                               std::span<const std::string> hashes = {});

/// Mean -ln p_true (1e-12 floor) of the calibrated distributions.
double calibration_nll(const CalibrationModel& model, const Matrix& logits, std::span<const int> labels);

struct AbstainDecision {
    bool kept = false;
    double threshold = 0.0;
    double confidence = 0.0;
};

/// Kept iff confidence >= threshold.
AbstainDecision abstain_decision(double confidence, double threshold);

struct AbstainResult {
    std::vector<std::size_t> kept;
    std::vector<std::size_t> abstained;
    double coverage = 0.0;
    double abstention_rate = 0.0;
};

AbstainResult abstain_filter(std::span<const Prediction> predictions, double threshold);

}  // namespace mmra

#endif
