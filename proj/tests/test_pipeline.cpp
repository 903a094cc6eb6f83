#include <doctest.h>

#include "mmra/pipeline.hpp"
#include "support.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

using namespace mmra;
using doctest::Approx;

namespace {

// Four small families; only the static view carries family information.
RunConfig small_config(Strategy strategy, int epochs) {
    RunConfig c = run_config_from_json_text(R"({
        "data": {"synthetic": {
            "families": [{"name": "Benign", "count": 60}, {"name": "Dharma", "count": 60},
                         {"name": "Ryuk", "count": 60}, {"name": "Shade", "count": 60}],
            "modalities": {"static":  {"dim": 8, "separation": 5.0, "noise": 1.0},
                           "dynamic": {"dim": 8, "separation": 0.0, "noise": 1.0},
                           "network": {"dim": 8, "separation": 0.0, "noise": 1.0}}}},
        "dcae": {"pretrain_epochs": 2, "encoder_dims": {"static": [8, 16, 6], "dynamic": [8, 16, 6], "network": [8, 16, 6]}},
        "classifier": {"hidden": [16]}
    })");
    c.strategy = strategy;
    c.epochs = epochs;
    return c;
}

std::vector<std::string> lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("one epoch writes one report") {
    test::TempDir dir("pipe1");
    const auto cfg = small_config(Strategy::multi_agent, 1);
    const auto r = run_strategy(cfg, 1, dir.path());
    CHECK(r.epochs.size() == 1);
    const auto reports = lines(dir / "epoch_reports.jsonl");
    REQUIRE(reports.size() == 1);
    const auto j = nlohmann::json::parse(reports[0]);
    CHECK(j.at("epoch") == 1);
    CHECK(j.at("weights_checksum").at("before_agents") == j.at("weights_checksum").at("after_agents"));
    CHECK(r.final_epoch().checksum_before_agents == r.final_epoch().checksum_after_agents);

    CHECK(std::filesystem::is_directory(dir / "checkpoints"));
    CHECK(std::filesystem::is_directory(dir / "exports"));
    CHECK(std::filesystem::exists(dir / "checkpoints" / "final.params"));
    CHECK(std::filesystem::exists(dir / "summary.json"));
    CHECK(std::filesystem::exists(dir / "config.json"));
    const auto turns = lines(dir / "dialogue.jsonl");
    CHECK(turns.size() == 4);
    std::set<std::string> roles;
    for (const auto& t : turns) roles.insert(nlohmann::json::parse(t).at("role").get<std::string>());
    CHECK(roles == std::set<std::string>{"analyst", "critic", "critic_plus", "predictor"});
    CHECK(run_config_from_json_text(test::read_text(dir / "config.json")).epochs == 1);
}

TEST_CASE("non-agent strategies leave the dialogue empty") {
    test::TempDir dir("pipe2");
    const auto r = run_strategy(small_config(Strategy::late_fusion, 2), 2, dir.path());
    CHECK(r.epochs.size() == 2);
    CHECK_FALSE(r.final_epoch().agent_scores.has_value());
    CHECK(lines(dir / "dialogue.jsonl").empty());
    CHECK(r.test_predictions.size() == r.test_labels.size());
}

TEST_CASE("identical seeds give identical reports") {
    test::TempDir a("pipe3a"), b("pipe3b");
    const auto cfg = small_config(Strategy::multi_agent, 3);
    run_strategy(cfg, 7, a.path());
    run_strategy(cfg, 7, b.path());
    CHECK(test::read_text(a / "epoch_reports.jsonl") == test::read_text(b / "epoch_reports.jsonl"));
    CHECK(test::read_text(a / "dialogue.jsonl") == test::read_text(b / "dialogue.jsonl"));
}

TEST_CASE("single informative view") {
    const auto only = run_strategy(small_config(Strategy::static_only, 15), 3, {});
    const auto fused = run_strategy(small_config(Strategy::early_fusion, 15), 3, {});
    CHECK(only.final_epoch().macro_f1 > 0.9);
    CHECK(std::abs(only.final_epoch().macro_f1 - fused.final_epoch().macro_f1) <= 0.02);
    const auto noise = run_strategy(small_config(Strategy::dynamic_only, 15), 3, {});
    CHECK(noise.final_epoch().macro_f1 < 0.6);
}

TEST_CASE("data preparation") {
    const auto cfg = small_config(Strategy::early_fusion, 1);
    const auto p = prepare_data(load_dataset(cfg, 1), cfg, 1);
    CHECK(p.vocabulary.size() == 4);
    std::vector<int> counts(4, 0);
    for (const auto& s : p.train) ++counts[static_cast<std::size_t>(s.family)];
    CHECK(std::set<int>(counts.begin(), counts.end()).size() == 1);
    std::set<std::string> train_hashes;
    for (const auto& s : p.train) train_hashes.insert(s.hash);
    for (const auto& s : p.test) CHECK(train_hashes.count(s.hash) == 0);
    for (const auto& s : p.val) CHECK(train_hashes.count(s.hash) == 0);
}

}  // TEST_SUITE
