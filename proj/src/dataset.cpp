#include "mmra/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

namespace mmra {

std::string_view to_string(Modality m) {
    switch (m) {
        case Modality::Static: return "static";
        case Modality::Dynamic: return "dynamic";
        case Modality::Network: return "network";
    }
    return "?";
}

Modality modality_from_string(std::string_view name) {
    if (name == "static") return Modality::Static;
    if (name == "dynamic") return Modality::Dynamic;
    if (name == "network") return Modality::Network;
    throw ConfigError("unknown modality '" + std::string(name) + "'");
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

std::unordered_map<std::string, Split> AlignedDataset::split_assignment() const {
    std::unordered_map<std::string, Split> out;
    for (const auto& s : samples) out.emplace(s.hash, s.split);
    return out;
}

std::vector<const AlignedSample*> AlignedDataset::in_split(Split s) const {
    std::vector<const AlignedSample*> out;
    for (const auto& sample : samples)
        if (sample.split == s) out.push_back(&sample);
    return out;
}

int AlignedDataset::family_index(const std::string& label) const {
    auto it = std::find(vocabulary.begin(), vocabulary.end(), label);
    if (it == vocabulary.end()) throw DataError("family '" + label + "' is not in the vocabulary");
    return static_cast<int>(it - vocabulary.begin());
}

std::vector<int> AlignedDataset::class_counts(Split s) const {
    std::vector<int> counts(vocabulary.size(), 0);
    for (const auto& sample : samples)
        if (sample.split == s) ++counts[static_cast<std::size_t>(sample.family)];
    return counts;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return cells;
}

}  // namespace

ModalityTable load_modality_csv(const std::filesystem::path& path, Modality modality,
                                std::span<const std::string> vocabulary) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": missing header row");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "sample_hash")
        throw DataError(path.string() + ": missing required column 'sample_hash'");
    if (header[1] != "family") throw DataError(path.string() + ": missing required column 'family'");
    const Index dim = static_cast<Index>(header.size()) - 2;
    if (dim < 1) throw DataError(path.string() + ": no feature columns");
    for (Index j = 0; j < dim; ++j) {
        const std::string expected = "f_" + std::to_string(j);
        if (header[static_cast<std::size_t>(j) + 2] != expected)
            throw DataError(path.string() + ": missing required column '" + expected + "'");
    }

    ModalityTable table;
    table.modality = modality;
    table.feature_dim = dim;
    std::vector<double> values;
    std::unordered_set<std::string> seen;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        const auto cells = split_csv_line(line);
        const std::string where = path.string() + ": row " + std::to_string(row);
        if (static_cast<Index>(cells.size()) != dim + 2)
            throw DataError(where + ": expected " + std::to_string(dim + 2) + " cells, found " +
                            std::to_string(cells.size()));
        if (!seen.insert(cells[0]).second) throw DataError(where + ": duplicate sample_hash '" + cells[0] + "'");
        if (!vocabulary.empty() &&
            std::find(vocabulary.begin(), vocabulary.end(), cells[1]) == vocabulary.end())
            throw DataError(where + ": family '" + cells[1] + "' is not in the declared vocabulary");
        for (Index j = 0; j < dim; ++j) {
            const auto& cell = cells[static_cast<std::size_t>(j) + 2];
            double v = 0.0;
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
                throw DataError(where + ": non-numeric feature f_" + std::to_string(j) + " '" + cell + "'");
            if (!std::isfinite(v))
                throw DataError(where + ": non-finite feature f_" + std::to_string(j) + " '" + cell + "'");
            values.push_back(v);
        }
        table.hashes.push_back(cells[0]);
        table.families.push_back(cells[1]);
    }
    table.features = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), static_cast<Index>(table.hashes.size()), dim);
    return table;
}

void write_modality_csv(const std::filesystem::path& path, const ModalityTable& table) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "sample_hash,family";
    for (Index j = 0; j < table.feature_dim; ++j) out << ",f_" << j;
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < table.rows(); ++i) {
        out << table.hashes[i] << ',' << table.families[i];
        for (Index j = 0; j < table.feature_dim; ++j) {
            auto res = std::to_chars(buf, buf + sizeof(buf), table.features(static_cast<Index>(i), j));
            out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Join and split

AlignedDataset align_modalities(const std::array<ModalityTable, 3>& tables,
                                std::span<const std::string> vocabulary) {
    AlignedDataset ds;
    std::optional<std::set<std::string>> common;
    std::set<std::string> all_labels;
    for (const auto& t : tables) {
        if (t.rows() == 0) continue;
        std::set<std::string> labels(t.families.begin(), t.families.end());
        all_labels.insert(labels.begin(), labels.end());
        if (!common) {
            common = labels;
        } else {
            std::set<std::string> both;
            std::set_intersection(common->begin(), common->end(), labels.begin(), labels.end(),
                                  std::inserter(both, both.begin()));
            common = std::move(both);
        }
    }
    if (common && common->empty())
        throw DataError("modality tables share no family labels");

    if (!vocabulary.empty()) {
        ds.vocabulary.assign(vocabulary.begin(), vocabulary.end());
        for (const auto& label : all_labels)
            if (std::find(ds.vocabulary.begin(), ds.vocabulary.end(), label) == ds.vocabulary.end())
                throw DataError("family '" + label + "' is not in the declared vocabulary");
    } else {
        ds.vocabulary.assign(all_labels.begin(), all_labels.end());
    }

    std::unordered_map<std::string, std::size_t> by_hash;
    for (const auto& t : tables) {
        const int m = index_of(t.modality);
        ds.feature_dims[static_cast<std::size_t>(m)] = t.feature_dim;
        for (std::size_t i = 0; i < t.rows(); ++i) {
            const int family = ds.family_index(t.families[i]);
            auto [it, inserted] = by_hash.emplace(t.hashes[i], ds.samples.size());
            if (inserted) {
                AlignedSample s;
                s.hash = t.hashes[i];
                s.family = family;
                ds.samples.push_back(std::move(s));
            }
            auto& sample = ds.samples[it->second];
            if (sample.family != family)
                throw DataError("label conflict for hash '" + t.hashes[i] + "': '" +
                                ds.vocabulary[static_cast<std::size_t>(sample.family)] + "' vs '" +
                                t.families[i] + "'");
            if (sample.features[static_cast<std::size_t>(m)])
                throw DataError("hash '" + t.hashes[i] + "' appears twice in the " +
                                std::string(to_string(t.modality)) + " table");
            sample.features[static_cast<std::size_t>(m)] =
                t.features.row(static_cast<Index>(i)).transpose();
        }
    }
    return ds;
}

AlignedDataset split_grouped(AlignedDataset ds, const std::array<double, 3>& ratios,
                             std::uint64_t seed) {
    double total = 0.0;
    int nonzero = 0;
    for (double r : ratios) {
        if (r < 0.0) throw ConfigError("split ratios must be non-negative");
        total += r;
        nonzero += r > 0.0 ? 1 : 0;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");

    std::vector<std::vector<std::size_t>> members(ds.vocabulary.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        members[static_cast<std::size_t>(ds.samples[i].family)].push_back(i);

    std::mt19937_64 rng(seed);
    for (std::size_t f = 0; f < members.size(); ++f) {
        auto& idx = members[f];
        const auto n = static_cast<double>(idx.size());
        if (static_cast<int>(idx.size()) < nonzero)
            throw DataError("family '" + ds.vocabulary[f] + "' has " + std::to_string(idx.size()) +
                            " samples, fewer than the " + std::to_string(nonzero) + " splits requested");
        std::shuffle(idx.begin(), idx.end(), rng);

        // Largest-remainder apportionment keeps every split within one sample
        // of its exact share.
        std::array<std::size_t, 3> counts{};
        std::array<double, 3> remainder{};
        std::size_t assigned = 0;
        for (std::size_t s = 0; s < 3; ++s) {
            const double exact = ratios[s] * n;
            counts[s] = static_cast<std::size_t>(std::floor(exact));
            remainder[s] = exact - std::floor(exact);
            assigned += counts[s];
        }
        std::array<std::size_t, 3> order{0, 1, 2};
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
        for (std::size_t k = 0; assigned < idx.size(); k = (k + 1) % 3) {
            if (ratios[order[k]] <= 0.0) continue;
            ++counts[order[k]];
            ++assigned;
        }
        std::size_t pos = 0;
        for (std::size_t s = 0; s < 3; ++s)
            for (std::size_t c = 0; c < counts[s]; ++c) ds.samples[idx[pos++]].split = static_cast<Split>(s);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Balancing

std::vector<std::size_t> oversample_indices(std::span<const int> labels, int num_classes,
                                            int target_per_class, std::uint64_t seed) {
    if (target_per_class < 1) throw ConfigError("oversampling target must be positive");
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes) throw DataError("label out of range");
        members[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    for (int c = 0; c < num_classes; ++c)
        if (members[static_cast<std::size_t>(c)].empty())
            throw DataError("cannot oversample: class " + std::to_string(c) + " is empty");

    std::vector<std::size_t> out(labels.size());
    std::iota(out.begin(), out.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (const auto& idx : members) {
        if (static_cast<int>(idx.size()) >= target_per_class) continue;
        std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
        for (int k = static_cast<int>(idx.size()); k < target_per_class; ++k) out.push_back(idx[pick(rng)]);
    }
    return out;
}

std::vector<AlignedSample> oversample_to_balance(std::span<const AlignedSample> split,
                                                 int num_classes, int target_per_class,
                                                 std::uint64_t seed) {
    std::vector<int> labels;
    labels.reserve(split.size());
    for (const auto& s : split) labels.push_back(s.family);
    std::vector<AlignedSample> out;
    for (std::size_t i : oversample_indices(labels, num_classes, target_per_class, seed))
        out.push_back(split[i]);
    return out;
}

std::vector<double> inverse_frequency_weights(std::span<const int> counts) {
    double total = 0.0;
    for (int c : counts) {
        if (c < 1) throw DataError("inverse_frequency_weights: every class needs at least one sample");
        total += c;
    }
    const double classes = static_cast<double>(counts.size());
    std::vector<double> w;
    for (int c : counts) w.push_back(total / (classes * c));
    return w;
}

std::map<std::string, double> inverse_frequency_weights(const std::map<std::string, int>& counts) {
    std::vector<int> flat;
    for (const auto& [k, v] : counts) flat.push_back(v);
    const auto w = inverse_frequency_weights(flat);
    std::map<std::string, double> out;
    std::size_t i = 0;
    for (const auto& [k, v] : counts) out[k] = w[i++];
    return out;
}

// ---------------------------------------------------------------------------
// Standardisation

Standardizer Standardizer::fit(const AlignedDataset& ds) {
    Standardizer st;
    for (Modality m : kModalities) {
        const auto mi = static_cast<std::size_t>(index_of(m));
        const Index dim = ds.feature_dims[mi];
        Vector sum = Vector::Zero(dim), sq = Vector::Zero(dim);
        double n = 0.0;
        for (const auto& s : ds.samples) {
            if (s.split != Split::train || !s.features[mi]) continue;
            sum += *s.features[mi];
            sq += s.features[mi]->cwiseAbs2();
            n += 1.0;
        }
        st.mean[mi] = n > 0 ? Vector(sum / n) : Vector::Zero(dim);
        st.scale[mi] = Vector::Ones(dim);
        if (n > 1) {
            Vector var = (sq - n * st.mean[mi].cwiseAbs2()) / (n - 1.0);
            for (Index j = 0; j < dim; ++j) {
                const double sd = std::sqrt(std::max(var(j), 0.0));
                st.scale[mi](j) = sd > 1e-12 ? sd : 1.0;
            }
        }
    }
    return st;
}

void Standardizer::apply(AlignedDataset& ds) const {
    for (auto& s : ds.samples)
        for (std::size_t m = 0; m < 3; ++m)
            if (s.features[m])
                *s.features[m] = (s.features[m]->array() - mean[m].array()) / scale[m].array();
}

}  // namespace mmra
