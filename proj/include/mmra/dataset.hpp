#ifndef MMRA_DATASET_HPP
#define MMRA_DATASET_HPP

#include "mmra/common.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mmra {

/// One feature CSV: rows are samples, keyed by hash.
struct ModalityTable {
    Modality modality = Modality::Static;
    Index feature_dim = 0;
    std::vector<std::string> hashes;
    std::vector<std::string> families;
    Matrix features;  // rows() == hashes.size(), cols() == feature_dim

    std::size_t rows() const { return hashes.size(); }
};

enum class Split { train = 0, val = 1, test = 2 };
std::string_view to_string(Split s);

struct AlignedSample {
    std::string hash;
    int family = -1;  // index into AlignedDataset::vocabulary
    std::array<std::optional<Vector>, 3> features;
    Split split = Split::train;

    bool has(Modality m) const { return features[index_of(m)].has_value(); }
    std::array<bool, 3> availability_mask() const { return {has(Modality::Static), has(Modality::Dynamic), has(Modality::Network)}; }
};

struct AlignedDataset {
    std::vector<AlignedSample> samples;
    std::vector<std::string> vocabulary;
    std::array<Index, 3> feature_dims{0, 0, 0};

    std::unordered_map<std::string, Split> split_assignment() const;
    std::vector<const AlignedSample*> in_split(Split s) const;
    int family_index(const std::string& label) const;
    std::vector<int> class_counts(Split s) const;
};

/// Parses `sample_hash,family,f_0,...,f_{d-1}`. Data rows are numbered from 1
/// in error messages. When `vocabulary` is non-empty every family must be in it.
ModalityTable load_modality_csv(const std::filesystem::path& path, Modality modality,
                                std::span<const std::string> vocabulary = {});
void write_modality_csv(const std::filesystem::path& path, const ModalityTable& table);

/// Hash join with strict label matching. Samples keep first-seen order
/// (static, then dynamic, then network). The vocabulary is `vocabulary` when
/// given, otherwise the sorted union of labels.
AlignedDataset align_modalities(const std::array<ModalityTable, 3>& tables,
                                std::span<const std::string> vocabulary = {});

/// Stratified, seeded train/val/test assignment; every hash lands in exactly
/// one split and per-family counts follow the ratios to within one sample.
AlignedDataset split_grouped(AlignedDataset ds, const std::array<double, 3>& ratios,
                             std::uint64_t seed);

/// Indices into `labels` after random oversampling: all originals in order,
/// followed by seeded with-replacement draws filling each class below
/// `target_per_class`. Classes at or above target are left alone.
std::vector<std::size_t> oversample_indices(std::span<const int> labels, int num_classes,
                                            int target_per_class, std::uint64_t seed);

std::vector<AlignedSample> oversample_to_balance(std::span<const AlignedSample> split,
                                                 int num_classes, int target_per_class,
                                                 std::uint64_t seed);

/// w_c = N / (C * n_c).
std::vector<double> inverse_frequency_weights(std::span<const int> counts);
std::map<std::string, double> inverse_frequency_weights(const std::map<std::string, int>& counts);

/// Per-modality z-score statistics from the train split.
struct Standardizer {
    std::array<Vector, 3> mean;
    std::array<Vector, 3> scale;

    static Standardizer fit(const AlignedDataset& ds);
    void apply(AlignedDataset& ds) const;
};

// ---------------------------------------------------------------------------
// Synthetic tri-modal data

/// Where a family's cluster centre sits in every modality.
enum class Placement {
    random,    // independent random direction scaled by the modality separation
    near,      // centre of `anchor` plus a random offset of length `anchor_offset`
    centroid,  // mean of every other family's centre
};

struct SynthFamily {
    std::string name;
    int count = 100;
    Placement placement = Placement::random;
    std::string anchor;
    double anchor_offset = 0.0;
};

struct SynthModality {
    Index dim = 20;
    double separation = 3.0;  // norm of each family centre
    double noise = 1.0;       // isotropic Gaussian sigma
    double drop_fraction = 0.0;
    /// Families in one group share a centre in this modality, so the view
    /// cannot tell them apart.
    std::vector<std::vector<std::string>> merged_groups;
};

struct SynthConfig {
    std::vector<SynthFamily> families;
    std::array<SynthModality, 3> modalities;
};

std::array<ModalityTable, 3> synth_generate(const SynthConfig& config, std::uint64_t seed);

}  // namespace mmra

#endif
