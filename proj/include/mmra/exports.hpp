#ifndef MMRA_EXPORTS_HPP
#define MMRA_EXPORTS_HPP

// Plot-ready exports of a run directory, written to <run>/exports/:
//
//   metrics.csv        epoch,macro_f1,accuracy,ece,nll,val_macro_f1,val_accuracy,val_ece,val_nll,calibration_arm
//   agent_scores.csv   epoch,assistance,critic,composite   (empty cells when a score is absent)
//   per_family_f1.csv  epoch,<family>...
//   reliability.csv    bin,lower,upper,count,confidence,accuracy   (completed runs only)
//   summary.json       {"complete", "epochs", "files", ...}

#include <filesystem>
#include <vector>

namespace mmra {

struct ExportResult {
    bool complete = false;  // summary.json present and every report line parsed
    int epochs = 0;
    std::vector<std::filesystem::path> files;
};

ExportResult export_reports(const std::filesystem::path& run_dir);

}  // namespace mmra

#endif
