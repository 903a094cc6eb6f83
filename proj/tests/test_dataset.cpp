#include <doctest.h>

#include "mmra/dataset.hpp"
#include "support.hpp"

#include <algorithm>
#include <map>
#include <set>

using namespace mmra;
using mmra::test::TempDir;
using mmra::test::write_text;

namespace {

std::string csv_header(int dim) {
    std::string h = "sample_hash,family";
    for (int j = 0; j < dim; ++j) h += ",f_" + std::to_string(j);
    return h + "\n";
}

ModalityTable table(Modality m, std::vector<std::pair<std::string, std::string>> rows, Index dim = 2) {
    ModalityTable t;
    t.modality = m;
    t.feature_dim = dim;
    t.features = Matrix::Zero(static_cast<Index>(rows.size()), dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        t.hashes.push_back(rows[i].first);
        t.families.push_back(rows[i].second);
        t.features.row(static_cast<Index>(i)).setConstant(static_cast<double>(i));
    }
    return t;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("csv round trip keeps every value") {
    TempDir dir("csv");
    ModalityTable t;
    t.modality = Modality::Dynamic;
    t.feature_dim = 3;
    t.hashes = {"a", "b"};
    t.families = {"Ryuk", "Shade"};
    t.features.resize(2, 3);
    t.features << 0.1, -2.5, 1e-17, 3.0, 4.25, 1.0 / 3.0;
    write_modality_csv(dir / "d.csv", t);
    const auto back = load_modality_csv(dir / "d.csv", Modality::Dynamic);
    CHECK(back.feature_dim == 3);
    CHECK(back.rows() == 2);
    CHECK(back.hashes == t.hashes);
    CHECK(back.families == t.families);
    CHECK(back.features == t.features);
}

TEST_CASE("header-only file gives an empty table with the declared width") {
    TempDir dir("csv");
    write_text(dir / "s.csv", csv_header(4));
    const auto t = load_modality_csv(dir / "s.csv", Modality::Static);
    CHECK(t.rows() == 0);
    CHECK(t.feature_dim == 4);
    CHECK(t.features.rows() == 0);
}

TEST_CASE("NaN cell is rejected with its data row number") {
    TempDir dir("csv");
    std::string text = csv_header(2);
    for (int r = 1; r <= 9; ++r) text += "h" + std::to_string(r) + ",Ryuk," + (r == 7 ? "NaN" : "1.0") + ",2.0\n";
    write_text(dir / "s.csv", text);
    try {
        load_modality_csv(dir / "s.csv", Modality::Static);
        FAIL("expected a DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("row 7") != std::string::npos);
    }
}

TEST_CASE("malformed files are rejected") {
    TempDir dir("csv");
    SUBCASE("missing family column") {
        write_text(dir / "x.csv", "sample_hash,f_0\nh,1\n");
        CHECK_THROWS_AS(load_modality_csv(dir / "x.csv", Modality::Static), DataError);
    }
    SUBCASE("ragged row") {
        write_text(dir / "x.csv", csv_header(2) + "h,Ryuk,1\n");
        CHECK_THROWS_AS(load_modality_csv(dir / "x.csv", Modality::Static), DataError);
    }
    SUBCASE("duplicate hash") {
        write_text(dir / "x.csv", csv_header(1) + "h,Ryuk,1\nh,Ryuk,2\n");
        CHECK_THROWS_AS(load_modality_csv(dir / "x.csv", Modality::Static), DataError);
    }
    SUBCASE("non-numeric cell") {
        write_text(dir / "x.csv", csv_header(1) + "h,Ryuk,abc\n");
        CHECK_THROWS_AS(load_modality_csv(dir / "x.csv", Modality::Static), DataError);
    }
    SUBCASE("family outside the declared vocabulary") {
        write_text(dir / "x.csv", csv_header(1) + "h,Petya,1\n");
        const std::vector<std::string> vocab{"Ryuk", "Shade"};
        CHECK_THROWS_AS(load_modality_csv(dir / "x.csv", Modality::Static, vocab), DataError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_modality_csv(dir / "absent.csv", Modality::Static), DataError);
    }
}

TEST_CASE("alignment builds availability masks") {
    std::array<ModalityTable, 3> tables{
        table(Modality::Static, {{"h1", "Ryuk"}, {"h2", "Ryuk"}}),
        table(Modality::Dynamic, {{"h1", "Ryuk"}, {"h2", "Ryuk"}}),
        table(Modality::Network, {{"h1", "Ryuk"}}),
    };
    const auto ds = align_modalities(tables);
    REQUIRE(ds.samples.size() == 2);
    CHECK(ds.samples[0].hash == "h1");
    CHECK(ds.samples[0].availability_mask() == std::array<bool, 3>{true, true, true});
    CHECK(ds.samples[1].availability_mask() == std::array<bool, 3>{true, true, false});
    for (const auto& s : ds.samples)
        for (auto m : kModalities)
            if (s.has(m)) CHECK(s.features[index_of(m)]->size() == ds.feature_dims[index_of(m)]);
}

TEST_CASE("label conflict names the hash") {
    std::array<ModalityTable, 3> tables{
        table(Modality::Static, {{"h3", "Ryuk"}, {"h1", "Shade"}}),
        table(Modality::Dynamic, {}),
        table(Modality::Network, {{"h3", "Shade"}}),
    };
    try {
        align_modalities(tables);
        FAIL("expected a DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("h3") != std::string::npos);
    }
}

TEST_CASE("grouped split counts and determinism") {
    SynthConfig cfg;
    for (const char* name : {"A", "B", "C", "D", "E", "F"}) {
        SynthFamily f;
        f.name = name;
        f.count = 100;
        cfg.families.push_back(f);
    }
    for (auto& m : cfg.modalities) m.dim = 3;
    const auto ds = align_modalities(synth_generate(cfg, 5));
    const auto a = split_grouped(ds, {0.8, 0.1, 0.1}, 42);
    for (Split s : {Split::train, Split::val, Split::test}) {
        const auto counts = a.class_counts(s);
        const int expect = s == Split::train ? 80 : 10;
        for (int c : counts) CHECK(std::abs(c - expect) <= 1);
    }
    CHECK(a.in_split(Split::train).size() == 480);
    CHECK(a.in_split(Split::val).size() == 60);
    CHECK(a.in_split(Split::test).size() == 60);

    const auto b = split_grouped(ds, {0.8, 0.1, 0.1}, 42);
    CHECK(a.split_assignment() == b.split_assignment());

    std::set<std::string> hashes;
    for (const auto& s : a.samples) CHECK(hashes.insert(s.hash).second);

    const auto all_train = split_grouped(ds, {1.0, 0.0, 0.0}, 7);
    CHECK(all_train.in_split(Split::train).size() == ds.samples.size());
    CHECK_THROWS_AS(split_grouped(ds, {0.5, 0.1, 0.1}, 1), ConfigError);
}

TEST_CASE("oversampling reaches the target and keeps the originals") {
    const std::vector<int> counts{447, 495, 495, 437, 500, 500};
    std::vector<int> labels;
    for (std::size_t c = 0; c < counts.size(); ++c) labels.insert(labels.end(), counts[c], static_cast<int>(c));
    const auto idx = oversample_indices(labels, 6, 500, 11);
    CHECK(idx.size() == 3000);
    std::vector<int> per(6, 0);
    for (auto i : idx) ++per[static_cast<std::size_t>(labels[i])];
    for (int n : per) CHECK(n == 500);
    for (std::size_t i = 0; i < labels.size(); ++i) CHECK(idx[i] == i);

    const std::vector<int> balanced{0, 0, 1, 1};
    CHECK(oversample_indices(balanced, 2, 2, 3) == std::vector<std::size_t>{0, 1, 2, 3});

    const std::vector<int> three{0, 0, 0};
    const auto five = oversample_indices(three, 1, 5, 9);
    REQUIRE(five.size() == 5);
    for (std::size_t i = 0; i < 3; ++i) CHECK(five[i] == i);
    for (std::size_t i = 3; i < 5; ++i) CHECK(five[i] < 3);
    CHECK(oversample_indices(three, 1, 5, 9) == five);
}

TEST_CASE("inverse frequency weights") {
    const auto w = inverse_frequency_weights(std::map<std::string, int>{{"A", 10}, {"B", 30}});
    CHECK(w.at("A") == doctest::Approx(2.0));
    CHECK(w.at("B") == doctest::Approx(2.0 / 3.0));
    const std::vector<int> six(6, 500);
    for (double x : inverse_frequency_weights(six)) CHECK(x == doctest::Approx(1.0));
    CHECK(inverse_frequency_weights(std::map<std::string, int>{{"A", 7}}).at("A") == doctest::Approx(1.0));
    const std::vector<int> with_empty{3, 0};
    CHECK_THROWS_AS(inverse_frequency_weights(with_empty), DataError);
}

TEST_CASE("synthetic generator") {
    SynthConfig cfg;
    for (const char* name : {"A", "B", "C", "D", "E", "F"}) {
        SynthFamily f;
        f.name = name;
        f.count = 100;
        cfg.families.push_back(f);
    }
    cfg.modalities[0].dim = 40;
    cfg.modalities[0].separation = 6;
    cfg.modalities[1].dim = 20;
    cfg.modalities[1].separation = 3;
    cfg.modalities[2].dim = 20;
    cfg.modalities[2].separation = 1;

    const auto t = synth_generate(cfg, 3);
    for (const auto& m : t) CHECK(m.rows() == 600);
    CHECK(t[0].feature_dim == 40);
    CHECK(align_modalities(t).samples.size() == 600);

    const auto again = synth_generate(cfg, 3);
    for (std::size_t m = 0; m < 3; ++m) {
        CHECK(again[m].hashes == t[m].hashes);
        CHECK(again[m].features == t[m].features);
    }

    for (auto& m : cfg.modalities) m.noise = 0.0;
    const auto flat = synth_generate(cfg, 3);
    for (std::size_t i = 1; i < 100; ++i) CHECK(flat[1].features.row(static_cast<Index>(i)) == flat[1].features.row(0));

    cfg.modalities[2].merged_groups = {{"A", "B"}};
    const auto merged = synth_generate(cfg, 3);
    CHECK(merged[2].features.row(0) == merged[2].features.row(100));
    CHECK(merged[1].features.row(0) != merged[1].features.row(100));
}

TEST_CASE("standardizer uses train statistics only") {
    std::array<ModalityTable, 3> tables{
        table(Modality::Static, {{"a", "X"}, {"b", "X"}, {"c", "Y"}, {"d", "Y"}}, 1),
        table(Modality::Dynamic, {}, 1),
        table(Modality::Network, {}, 1),
    };
    auto ds = align_modalities(tables);
    ds.samples[3].split = Split::test;
    const auto st = Standardizer::fit(ds);
    CHECK(st.mean[0](0) == doctest::Approx(1.0));
    st.apply(ds);
    double mean = 0;
    for (int i = 0; i < 3; ++i) mean += (*ds.samples[static_cast<std::size_t>(i)].features[0])(0);
    CHECK(mean == doctest::Approx(0.0));
}

}  // TEST_SUITE
