#include "mmra/calibration.hpp"

#include "mmra/param_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace mmra {

std::string_view to_string(CalibrationKind k) {
    switch (k) {
        case CalibrationKind::identity: return "identity";
        case CalibrationKind::temperature: return "temperature";
        case CalibrationKind::vector: return "vector";
    }
    return "?";
}

CalibrationKind calibration_kind_from_string(std::string_view s) {
    if (s == "identity") return CalibrationKind::identity;
    if (s == "temperature") return CalibrationKind::temperature;
    if (s == "vector") return CalibrationKind::vector;
    throw ConfigError("unknown calibration kind '" + std::string(s) + "'");
}

namespace {

std::string join_vector(const Vector& v) {
    std::string out;
    for (Index i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += format_double(v(i));
    }
    return out;
}

Vector parse_vector(const std::string& s) {
    std::istringstream in(s);
    std::vector<double> values;
    std::string tok;
    while (in >> tok) {
        double v = 0;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc()) throw DataError("calibration: bad number '" + tok + "'");
        values.push_back(v);
    }
    return Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size()));
}

double parse_scalar(const std::map<std::string, std::string>& meta, const std::string& key, double fallback) {
    auto it = meta.find(key);
    if (it == meta.end()) return fallback;
    const Vector v = parse_vector(it->second);
    if (v.size() != 1) throw DataError("calibration: '" + key + "' must be a single number");
    return v(0);
}

}  // namespace

std::map<std::string, std::string> CalibrationModel::to_meta() const {
    std::map<std::string, std::string> meta;
    meta["calibration.kind"] = std::string(to_string(kind));
    meta["calibration.blend"] = format_double(blend);
    if (kind == CalibrationKind::temperature) meta["calibration.T"] = format_double(T);
    if (kind == CalibrationKind::vector) {
        meta["calibration.a"] = join_vector(a);
        meta["calibration.d"] = join_vector(d);
    }
    return meta;
}

CalibrationModel CalibrationModel::from_meta(const std::map<std::string, std::string>& meta) {
    CalibrationModel m;
    auto it = meta.find("calibration.kind");
    if (it == meta.end()) throw DataError("checkpoint has no calibration.kind entry");
    m.kind = calibration_kind_from_string(it->second);
    m.blend = parse_scalar(meta, "calibration.blend", 1.0);
    m.T = parse_scalar(meta, "calibration.T", 1.0);
    if (m.kind == CalibrationKind::vector) {
        m.a = parse_vector(meta.at("calibration.a"));
        m.d = parse_vector(meta.at("calibration.d"));
        if (m.a.size() != m.d.size()) throw DataError("calibration: a and d lengths differ");
    }
    if (!(m.T > 0)) throw DataError("calibration: temperature must be positive");
    return m;
}

Vector apply_calibration(const CalibrationModel& model, const Vector& z) {
    Vector calibrated;
    switch (model.kind) {
        case CalibrationKind::identity: calibrated = softmax<double>(z); break;
        case CalibrationKind::temperature: calibrated = softmax<double>(Vector(z / model.T)); break;
        case CalibrationKind::vector:
            if (model.a.size() != z.size()) throw ShapeError("vector calibration: class count mismatch");
            calibrated = softmax<double>(Vector(model.a.cwiseProduct(z) + model.d));
            break;
    }
    if (model.blend == 1.0) return calibrated;
    return model.blend * calibrated + (1.0 - model.blend) * softmax<double>(z);
}

Matrix apply_calibration(const CalibrationModel& model, const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Index j = 0; j < logits.cols(); ++j) out.col(j) = apply_calibration(model, Vector(logits.col(j)));
    return out;
}

std::vector<Prediction> calibrated_predictions(const CalibrationModel& model, const Matrix& logits,
                                               std::span<const std::string> hashes) {
    std::vector<Prediction> out;
    out.reserve(static_cast<std::size_t>(logits.cols()));
    for (Index j = 0; j < logits.cols(); ++j)
        out.push_back(make_prediction(apply_calibration(model, Vector(logits.col(j))),
                                      hashes.empty() ? std::string{} : hashes[static_cast<std::size_t>(j)]));
    return out;
}

double calibration_nll(const CalibrationModel& model, const Matrix& logits, std::span<const int> labels) {
    if (logits.cols() == 0) return 0.0;
    double total = 0.0;
    for (Index j = 0; j < logits.cols(); ++j) {
        const Vector p = apply_calibration(model, Vector(logits.col(j)));
        total -= std::log(std::max(p(labels[static_cast<std::size_t>(j)]), kProbFloor));
    }
    return total / static_cast<double>(logits.cols());
}

namespace {

CalibrationModel fit_temperature(const Matrix& logits, std::span<const int> labels) {
    CalibrationModel m;
    m.kind = CalibrationKind::temperature;
    auto nll_at = [&](double log_t) {
        m.T = std::exp(log_t);
        return calibration_nll(m, logits, labels);
    };
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = -3.0, hi = 3.0;
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = nll_at(x1), f2 = nll_at(x2);
    while (hi - lo > 1e-9) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = nll_at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = nll_at(x2);
        }
    }
    double best_log_t = 0.0;
    double best = nll_at(0.0);
    for (double cand : {lo, hi, 0.5 * (lo + hi), -3.0, 3.0}) {
        const double f = nll_at(cand);
        if (f < best) {
            best = f;
            best_log_t = cand;
        }
    }
    m.T = std::exp(best_log_t);
    return m;
}

CalibrationModel fit_vector(const Matrix& logits, std::span<const int> labels) {
    const Index C = logits.rows();
    const double N = static_cast<double>(logits.cols());
    CalibrationModel m;
    m.kind = CalibrationKind::vector;
    m.a = Vector::Ones(C);
    m.d = Vector::Zero(C);
    double current = calibration_nll(m, logits, labels);
    double step = 1.0;
    for (int it = 0; it < 500; ++it) {
        Vector ga = Vector::Zero(C), gd = Vector::Zero(C);
        for (Index j = 0; j < logits.cols(); ++j) {
            const Vector z = logits.col(j);
            Vector r = softmax<double>(Vector(m.a.cwiseProduct(z) + m.d));
            r(labels[static_cast<std::size_t>(j)]) -= 1.0;
            ga += r.cwiseProduct(z);
            gd += r;
        }
        ga /= N;
        gd /= N;
        const double gnorm2 = ga.squaredNorm() + gd.squaredNorm();
        if (gnorm2 < 1e-20) break;
        // Armijo backtracking; a step that fails to decrease the NLL is
        // never taken, so the result is never worse than the identity start.
        CalibrationModel trial = m;
        bool accepted = false;
        for (int bt = 0; bt < 40; ++bt) {
            trial.a = m.a - step * ga;
            trial.d = m.d - step * gd;
            const double f = calibration_nll(trial, logits, labels);
            if (f <= current - 1e-4 * step * gnorm2) {
                m = trial;
                current = f;
                accepted = true;
                step = std::min(step * 2.0, 1e3);
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    return m;
}

}  // namespace

CalibrationModel fit_calibration(CalibrationKind kind, const Matrix& logits, std::span<const int> labels) {
    if (logits.cols() == 0) throw DataError("calibration needs a non-empty validation set");
    if (static_cast<Index>(labels.size()) != logits.cols()) throw ShapeError("calibration: one label per column required");
    std::vector<int> distinct(labels.begin(), labels.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) throw DataError("calibration: validation set holds a single class");
    switch (kind) {
        case CalibrationKind::identity: return CalibrationModel{};
        case CalibrationKind::temperature: return fit_temperature(logits, labels);
        case CalibrationKind::vector: return fit_vector(logits, labels);
    }
    return CalibrationModel{};
}

AbstainDecision abstain_decision(double confidence, double threshold) {
    return {!(confidence < threshold), threshold, confidence};
}

AbstainResult abstain_filter(std::span<const Prediction> predictions, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("abstention threshold must lie in (0, 1)");
    if (predictions.empty()) throw DataError("abstain_filter: empty prediction set");
    AbstainResult r;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (abstain_decision(predictions[i].confidence, threshold).kept)
            r.kept.push_back(i);
        else
            r.abstained.push_back(i);
    }
    const double n = static_cast<double>(predictions.size());
    r.coverage = static_cast<double>(r.kept.size()) / n;
    // 1 - c rounds so that c + (1 - c) == 1 holds exactly in binary64.
    r.abstention_rate = 1.0 - r.coverage;
    return r;
}

}  // namespace mmra
