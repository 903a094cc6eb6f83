// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include "grad_suite.hpp"
#include "oracles.hpp"

#include "mmra/agents.hpp"
#include "mmra/calibration.hpp"
#include "mmra/classifier.hpp"
#include "mmra/dataset.hpp"
#include "mmra/harness.hpp"
#include "mmra/log.hpp"
#include "mmra/metrics.hpp"
#include "mmra/pipeline.hpp"
#include "mmra/stats.hpp"
#include "mmra/text_scores.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

using namespace mmra;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

Outcome formula_oracles() {
    ConfusionMatrix dharma(2, 2);
    dharma << 9603, 97, 297, 500;
    const double f1 = per_class_f1(dharma)[0];

    const std::vector<double> multi{0.95, 0.94, 0.96, 0.93, 0.97};
    const std::vector<double> single{0.90, 0.92, 0.92, 0.925, 0.90};
    const auto w = wilcoxon_signed_rank(multi, single);

    const bool composite_ok = std::abs(composite_score(1.0, 1.0, 1.0) - 1.0) < 1e-12 &&
                              std::abs(composite_score(0.9, 0.8, 0.5) - 0.79) < 1e-12 &&
                              composite_score(0.0, 0.0, 0.0) == 0.0 &&
                              std::abs(composite_score(0.5, 1.0, 2.0) - 0.75) < 1e-12;
    Outcome o;
    o.pass = std::abs(f1 - 0.98) <= 0.005 && std::abs(w.p_two_sided - 0.0625) < 1e-12 && std::abs(w.r - 0.905) <= 0.001 &&
             composite_ok;
    o.detail = "dharma F1 " + fmt("%.4f", f1) + ", wilcoxon p " + fmt("%.4f", w.p_two_sided) + " r " +
               fmt("%.4f", w.r) + ", composite hand cases " + (composite_ok ? "exact" : "differ");
    return o;
}

Outcome gradient_suite() {
    const int N = 100;
    const std::array<std::pair<const char*, test::GradSuiteResult>, 4> suites{{
        {"reconstruction", test::dcae_grad_suite(N, 0.0, 101)},
        {"supcon", test::supcon_grad_suite(N, 102)},
        {"total", test::dcae_grad_suite(N, 1.0, 103)},
        {"classifier", test::classifier_grad_suite(N, 104)},
    }};
    Outcome o{true, ""};
    for (const auto& [name, r] : suites) {
        o.pass = o.pass && r.failures == 0 && r.models >= N;
        o.detail += std::string(o.detail.empty() ? "" : ", ") + name + " " + std::to_string(r.models - r.failures) +
                    "/" + std::to_string(r.models) + " (worst " + fmt("%.1e", r.worst) + ")";
    }
    return o;
}

Outcome oracle_equivalence() {
    std::mt19937_64 rng(303);
    double supcon_worst = 0.0;
    std::uniform_int_distribution<Index> batch(2, 8), dim(2, 6);
    std::uniform_real_distribution<double> temp(0.1, 2.0);
    for (int t = 0; t < 500; ++t) {
        const Index n = batch(rng);
        const Matrix Z = test::random_matrix(dim(rng), n, rng);
        const auto y = test::random_labels(n, 3, rng);
        const double tau = temp(rng);
        supcon_worst = std::max(supcon_worst, std::abs(supcon_loss(Z, y, tau) - test::supcon_brute_force(Z, y, tau)));
    }

    double wilcoxon_worst = 0.0;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int n = 1; n <= 10; ++n)
        for (int t = 0; t < 20; ++t) {
            std::vector<double> x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                x[static_cast<std::size_t>(i)] = normal(rng) + 0.2 * t;
                y[static_cast<std::size_t>(i)] = normal(rng);
            }
            const auto r = wilcoxon_signed_rank(x, y);
            const double expect = test::wilcoxon_enumerated_p(x, y);
            wilcoxon_worst = std::max(wilcoxon_worst, r.exact ? std::abs(r.p_two_sided - expect) : 1.0);
        }

    double ece_worst = 0.0;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> conf;
        std::vector<std::uint8_t> ok;
        const double skill = u(rng);
        for (int i = 0; i < 300; ++i) {
            const double c = t % 5 == 0 ? std::round(u(rng) * 15.0) / 15.0 : u(rng);
            conf.push_back(c);
            ok.push_back(u(rng) < skill);
        }
        for (int B : {1, 10, 15})
            ece_worst = std::max(ece_worst, std::abs(ece(conf, ok, B).ece - test::hand_binned_ece(conf, ok, B)));
    }
    Outcome o;
    o.pass = supcon_worst <= 1e-10 && wilcoxon_worst <= 1e-12 && ece_worst <= 1e-12;
    o.detail = "supcon max diff " + fmt("%.1e", supcon_worst) + " (500 batches <= 8), wilcoxon max diff " +
               fmt("%.1e", wilcoxon_worst) + " (n <= 10), ECE max diff " + fmt("%.1e", ece_worst);
    return o;
}

Outcome balancing() {
    const std::vector<int> counts{447, 495, 495, 437, 500, 500};
    std::vector<int> labels;
    for (std::size_t c = 0; c < counts.size(); ++c) labels.insert(labels.end(), counts[c], static_cast<int>(c));
    const auto idx = oversample_indices(labels, 6, 500, 7);
    std::vector<int> per(6, 0);
    for (auto i : idx) ++per[static_cast<std::size_t>(labels[i])];
    bool originals = idx.size() >= labels.size();
    std::vector<int> seen(labels.size(), 0);
    for (auto i : idx) ++seen[i];
    for (int s : seen) originals = originals && s >= 1;
    Outcome o;
    o.pass = idx.size() == 3000 && std::all_of(per.begin(), per.end(), [](int n) { return n == 500; }) && originals;
    o.detail = "total " + std::to_string(idx.size()) + ", per family";
    for (int n : per) o.detail += " " + std::to_string(n);
    o.detail += originals ? ", originals kept" : ", originals lost";
    return o;
}

Outcome calibration_properties() {
    int seeds_ok = 0;
    std::size_t argmax_same = 0, argmax_total = 0;
    bool partition_exact = true;
    std::string ece_pairs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        RunConfig cfg = run_config_from_json_text("{}");
        const auto data = prepare_data(load_dataset(cfg, seed), cfg, seed);
        auto view = [&](const std::vector<AlignedSample>& s, std::vector<int>& y) {
            std::vector<const AlignedSample*> keep;
            for (const auto& x : s)
                if (x.has(Modality::Static)) keep.push_back(&x);
            Matrix X(data.feature_dims[0], static_cast<Index>(keep.size()));
            y.clear();
            for (std::size_t j = 0; j < keep.size(); ++j) {
                X.col(static_cast<Index>(j)) = *keep[j]->features[0];
                y.push_back(keep[j]->family);
            }
            return X;
        };
        std::vector<int> ytr, yval;
        const Matrix Xtr = view(data.train, ytr);
        const Matrix Xval = view(data.val, yval);
        auto model = ClassifierModel::create(Xtr.rows(), std::vector<Index>{64}, data.vocabulary, seed);
        ClassifierTrainConfig tc;
        tc.epochs = 60;
        tc.seed = seed;
        train_classifier(model, Xtr, ytr, tc);

        const Matrix z = logits(model, Xval);
        const auto raw = calibrated_predictions(CalibrationModel{}, z);
        const auto fit = fit_calibration(CalibrationKind::temperature, z, yval);
        const auto cal = calibrated_predictions(fit, z);
        for (std::size_t i = 0; i < raw.size(); ++i) argmax_same += raw[i].predicted == cal[i].predicted;
        argmax_total += raw.size();
        const double before = ece(raw, yval).ece;
        const double after = ece(cal, yval).ece;
        seeds_ok += after <= before;
        ece_pairs += (ece_pairs.empty() ? "" : " ") + fmt("%.3f", before) + "->" + fmt("%.3f", after);
        for (double tau : {std::nextafter(0.0, 1.0), 0.3, 0.5, 0.7, 0.9, 0.99, std::nextafter(1.0, 0.0)}) {
            const auto a = abstain_filter(cal, tau);
            partition_exact = partition_exact && a.coverage + a.abstention_rate == 1.0 &&
                              a.kept.size() + a.abstained.size() == cal.size();
        }
    }
    Outcome o;
    o.pass = argmax_same == argmax_total && seeds_ok >= 4 && partition_exact;
    o.detail = "argmax kept " + std::to_string(argmax_same) + "/" + std::to_string(argmax_total) +
               ", val ECE not worse on " + std::to_string(seeds_ok) + "/5 seeds [" + ece_pairs + "], coverage+abstention " +
               (partition_exact ? "== 1" : "!= 1");
    return o;
}

std::vector<double> final_f1(RunConfig cfg, Strategy s, const std::filesystem::path& dir) {
    cfg.strategy = s;
    std::vector<double> out;
    for (auto seed : cfg.seeds)
        out.push_back(run_strategy(cfg, seed, dir / std::string(to_string(s)) / ("seed_" + std::to_string(seed)))
                          .final_epoch()
                          .macro_f1);
    return out;
}

Outcome strategy_ordering(const std::filesystem::path& dir) {
    RunConfig cfg = run_config_from_json_text(R"({"epochs": 30, "seeds": [1, 2, 3, 4, 5]})");
    std::map<Strategy, double> mean;
    for (auto s : {Strategy::static_only, Strategy::dynamic_only, Strategy::network_only, Strategy::single_agent,
                   Strategy::multi_agent})
        mean[s] = mean_of(final_f1(cfg, s, dir));
    const double best_single = std::max({mean[Strategy::static_only], mean[Strategy::dynamic_only], mean[Strategy::network_only]});
    const double multi = mean[Strategy::multi_agent], single = mean[Strategy::single_agent];
    Outcome o;
    o.pass = multi > single && single > best_single && multi - best_single >= 0.05;
    o.detail = "mean macro-F1 multi_agent " + fmt("%.3f", multi) + ", single_agent " + fmt("%.3f", single) +
               ", best single modality " + fmt("%.3f", best_single) + " (static " + fmt("%.3f", mean[Strategy::static_only]) +
               " dynamic " + fmt("%.3f", mean[Strategy::dynamic_only]) + " network " +
               fmt("%.3f", mean[Strategy::network_only]) + "), gap " + fmt("%.3f", multi - best_single);
    return o;
}

Outcome agent_loop(const std::filesystem::path& dir) {
    const RunConfig cfg = run_config_from_json_text(R"({
        "strategy": "multi_agent", "epochs": 100,
        "dcae": {"pretrain_epochs": 0, "lr": 0.002},
        "classifier": {"lr": 0.002}
    })");
    int passing = 0;
    bool inert = true;
    std::string gains;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto r = run_strategy(cfg, seed, dir / ("seed_" + std::to_string(seed)));
        std::vector<double> c;
        for (const auto& e : r.epochs) {
            c.push_back(e.agent_scores ? e.agent_scores->composite : 0.0);
            inert = inert && e.checksum_before_agents == e.checksum_after_agents;
        }
        const double first = std::accumulate(c.begin(), c.begin() + 10, 0.0) / 10.0;
        const double last = std::accumulate(c.end() - 10, c.end(), 0.0) / 10.0;
        passing += last - first >= 0.3;
        gains += (gains.empty() ? "" : " ") + fmt("%+.3f", last - first);
    }
    Outcome o;
    o.pass = passing >= 4 && inert;
    o.detail = "composite gain last10 - first10 [" + gains + "], " + std::to_string(passing) + "/5 seeds >= 0.3, " +
               (inert ? "checksums unchanged by every agent cycle" : "agent cycle changed weights");
    return o;
}

Outcome zero_day(const std::filesystem::path& dir) {
    bool pass = true;
    std::string near_detail, far_detail;
    std::size_t leaked = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        for (const char* preset : {"zeroday_near", "zeroday_far"}) {
            const auto cfg = run_config_from_json_text(std::string(R"({"strategy": "late_fusion", "epochs": 30,
                "data": {"synthetic": ")") + preset + R"("}})");
            const auto r = zero_day_eval(cfg, "Shade", seed, dir / (std::string(preset) + "_seed_" + std::to_string(seed)));
            leaked += r.leaked_hashes;
            pass = pass && r.leaked_hashes == 0 && r.audited_hashes > 0;
            if (std::string(preset) == "zeroday_near") {
                const double acc = r.kept_accuracy.value_or(0.0);
                pass = pass && r.coverage > 0.9 && acc > 0.9;
                near_detail += " " + fmt("%.3f", r.coverage) + "/" + fmt("%.3f", acc);
            } else {
                pass = pass && r.abstention > 0.8;
                far_detail += " " + fmt("%.3f", r.abstention);
            }
        }
    }
    return {pass, "near coverage/kept-accuracy [" + near_detail.substr(1) + "], far abstention [" + far_detail.substr(1) +
                      "], leaked hashes " + std::to_string(leaked) + " (late_fusion, seeds 1-3)"};
}

Outcome determinism(const std::filesystem::path& dir) {
    const RunConfig cfg = run_config_from_json_text(R"({"strategy": "multi_agent", "epochs": 5})");
    bool same = true;
    for (std::uint64_t seed : {1, 2}) {
        const auto a = dir / "a" / ("seed_" + std::to_string(seed));
        const auto b = dir / "b" / ("seed_" + std::to_string(seed));
        run_strategy(cfg, seed, a);
        run_strategy(cfg, seed, b);
        const auto ra = read_bytes(a / "epoch_reports.jsonl");
        same = same && !ra.empty() && ra == read_bytes(b / "epoch_reports.jsonl");
    }
    return {same, same ? "epoch_reports.jsonl byte-identical for seeds 1 and 2" : "epoch_reports.jsonl differ"};
}

Outcome guardrail_grid() {
    int disagreements = 0, escalations = 0;
    for (int i = 0; i <= 100; ++i)
        for (int j = 0; j <= 100; ++j) {
            const double top1 = i / 100.0, margin = j / 100.0;
            const bool literal = top1 < 0.55 || margin < 0.10;
            disagreements += guardrail_escalate(top1, margin) != literal;
            escalations += literal;
        }
    return {disagreements == 0,
            std::to_string(disagreements) + " disagreements over 101x101 grid (" + std::to_string(escalations) +
                " escalations)"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    std::filesystem::path work_dir = "acceptance_runs";
    std::vector<int> only;
    app.add_option("--work-dir", work_dir, "Directory for run outputs");
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);
    log::set_level(log::Level::error);

    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, formula_oracles},
        {2, gradient_suite},
        {3, oracle_equivalence},
        {4, balancing},
        {5, calibration_properties},
        {6, [&] { return strategy_ordering(work_dir / "ordering"); }},
        {7, [&] { return agent_loop(work_dir / "agent_loop"); }},
        {8, [&] { return zero_day(work_dir / "zeroday"); }},
        {9, [&] { return determinism(work_dir / "determinism"); }},
        {10, guardrail_grid},
    };
    std::filesystem::remove_all(work_dir);
    int failed = 0;
    for (const auto& [id, check] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !o.pass;
        std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  ["
                  << fmt("%.1f", secs) << " s]" << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
