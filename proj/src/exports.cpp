#include "mmra/exports.hpp"

#include "mmra/common.hpp"
#include "mmra/log.hpp"
#include "mmra/param_io.hpp"

#include <json.hpp>

#include <fstream>

namespace mmra {

using json = nlohmann::ordered_json;

namespace {

std::string cell(const json& v) {
    if (v.is_null()) return "";
    if (v.is_number()) return format_double(v.get<double>());
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

}  // namespace

ExportResult export_reports(const std::filesystem::path& run_dir) {
    const auto reports_path = run_dir / "epoch_reports.jsonl";
    std::ifstream in(reports_path);
    if (!in) throw DataError("no epoch reports in " + run_dir.string());

    ExportResult res;
    res.complete = true;
    std::vector<json> reports;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            reports.push_back(json::parse(line));
        } catch (const json::parse_error&) {
            log::warn(reports_path.string() + ": line " + std::to_string(line_no) + " is truncated; skipped");
            res.complete = false;
        }
    }
    res.epochs = static_cast<int>(reports.size());

    const auto out_dir = run_dir / "exports";
    std::filesystem::create_directories(out_dir);

    {
        const auto path = out_dir / "metrics.csv";
        auto out = open_csv(path);
        out << "epoch,macro_f1,accuracy,ece,nll,val_macro_f1,val_accuracy,val_ece,val_nll,calibration_arm\n";
        for (const auto& r : reports) {
            out << r.value("epoch", 0);
            for (const char* k : {"macro_f1", "accuracy", "ece", "nll", "val_macro_f1", "val_accuracy", "val_ece",
                                  "val_nll", "calibration_arm"})
                out << ',' << cell(r.contains(k) ? r.at(k) : json(nullptr));
            out << '\n';
        }
        res.files.push_back(path);
    }
    {
        const auto path = out_dir / "agent_scores.csv";
        auto out = open_csv(path);
        out << "epoch,assistance,critic,composite\n";
        for (const auto& r : reports) {
            out << r.value("epoch", 0);
            const json scores = r.contains("agent_scores") ? r.at("agent_scores") : json(nullptr);
            for (const char* k : {"assistance", "critic", "composite"})
                out << ',' << (scores.is_object() && scores.contains(k) ? cell(scores.at(k)) : "");
            out << '\n';
        }
        res.files.push_back(path);
    }
    {
        const auto path = out_dir / "per_family_f1.csv";
        auto out = open_csv(path);
        std::vector<std::string> families;
        if (!reports.empty() && reports.front().contains("per_family_f1")) {
            const auto& first = reports.front().at("per_family_f1");
            for (auto it = first.begin(); it != first.end(); ++it) families.push_back(it.key());
        }
        out << "epoch";
        for (const auto& f : families) out << ',' << f;
        out << '\n';
        for (const auto& r : reports) {
            out << r.value("epoch", 0);
            for (const auto& f : families) {
                const bool has = r.contains("per_family_f1") && r.at("per_family_f1").contains(f);
                out << ',' << (has ? cell(r.at("per_family_f1").at(f)) : "");
            }
            out << '\n';
        }
        res.files.push_back(path);
    }

    std::ifstream summary_in(run_dir / "summary.json");
    json summary;
    if (summary_in) {
        try {
            summary = json::parse(summary_in);
        } catch (const json::parse_error&) {
            res.complete = false;
        }
    } else {
        res.complete = false;
    }
    if (summary.is_object() && summary.contains("reliability")) {
        const auto path = out_dir / "reliability.csv";
        auto out = open_csv(path);
        out << "bin,lower,upper,count,confidence,accuracy\n";
        for (const auto& b : summary.at("reliability"))
            out << b.at("bin").get<int>() << ',' << cell(b.at("lower")) << ',' << cell(b.at("upper")) << ','
                << b.at("count").get<long>() << ',' << cell(b.at("confidence")) << ',' << cell(b.at("accuracy")) << '\n';
        res.files.push_back(path);
    }
    if (summary.is_object() && summary.contains("epochs") && summary.at("epochs").get<int>() != res.epochs)
        res.complete = false;

    json s;
    s["complete"] = res.complete;
    s["epochs"] = res.epochs;
    s["files"] = json::array();
    for (const auto& f : res.files) s["files"].push_back(f.filename().string());
    if (summary.is_object() && summary.contains("final")) s["final"] = summary.at("final");
    std::ofstream(out_dir / "summary.json") << s.dump(2) << '\n';
    res.files.push_back(out_dir / "summary.json");
    return res;
}

}  // namespace mmra
