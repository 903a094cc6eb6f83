#include "mmra/fusion.hpp"

#include "mmra/param_io.hpp"

#include <fstream>
#include <unordered_map>

namespace mmra {

Index FusedLayout::offset(Modality m) const {
    Index off = 0;
    for (int k = 0; k < index_of(m); ++k) off += dims[static_cast<std::size_t>(k)];
    return off;
}

Vector fuse(const FusedLayout& layout, const std::optional<StaticLatent>& zs,
            const std::optional<DynamicLatent>& zd, const std::optional<NetworkLatent>& zn,
            const std::array<double, 3>& gate_scale) {
    if (!zs && !zd && !zn) throw DataError("fuse: every modality gate is closed");
    Vector out = Vector::Zero(layout.total());
    auto place = [&](Modality m, const Vector& z) {
        const auto mi = static_cast<std::size_t>(index_of(m));
        if (z.size() != layout.dims[mi])
            throw ShapeError("fuse: " + std::string(to_string(m)) + " latent has " + std::to_string(z.size()) +
                             " entries, layout expects " + std::to_string(layout.dims[mi]));
        out.segment(layout.offset(m), layout.dims[mi]) = gate_scale[mi] == 1.0 ? z : Vector(gate_scale[mi] * z);
    };
    if (zs) place(Modality::Static, zs->z);
    if (zd) place(Modality::Dynamic, zd->z);
    if (zn) place(Modality::Network, zn->z);
    return out;
}

std::vector<AlignedLatents> align_latents(std::span<const LatentEmbedding> zs,
                                          std::span<const LatentEmbedding> zd,
                                          std::span<const LatentEmbedding> zn, int num_classes,
                                          int balance_target, std::uint64_t seed) {
    std::vector<AlignedLatents> joined;
    std::unordered_map<std::string, std::size_t> by_hash;
    auto slot = [&](const LatentEmbedding& e) -> AlignedLatents& {
        auto [it, inserted] = by_hash.emplace(e.hash, joined.size());
        if (inserted) joined.push_back({e.hash, e.family, {}, {}, {}});
        auto& a = joined[it->second];
        if (a.family != e.family) throw DataError("label conflict for hash '" + e.hash + "' while aligning latents");
        return a;
    };
    for (const auto& e : zs) slot(e).zs = StaticLatent{e.z};
    for (const auto& e : zd) slot(e).zd = DynamicLatent{e.z};
    for (const auto& e : zn) slot(e).zn = NetworkLatent{e.z};
    if (joined.empty()) throw DataError("align_latents: empty join");
    if (balance_target <= 0) return joined;

    std::vector<int> labels;
    for (const auto& a : joined) labels.push_back(a.family);
    std::vector<AlignedLatents> balanced;
    for (std::size_t i : oversample_indices(labels, num_classes, balance_target, seed)) balanced.push_back(joined[i]);
    return balanced;
}

FusedSample fuse_sample(const FusedLayout& layout, const AlignedLatents& latents,
                        const std::array<double, 3>& gate_scale) {
    FusedSample s;
    s.hash = latents.hash;
    s.family = latents.family;
    s.gate = latents.gate();
    s.gate_scale = gate_scale;
    s.z_fused = fuse(layout, latents.zs, latents.zd, latents.zn, gate_scale);
    return s;
}

std::vector<FusedSample> fuse_all(const FusedLayout& layout, std::span<const AlignedLatents> latents,
                                  const std::array<double, 3>& gate_scale) {
    std::vector<FusedSample> out;
    out.reserve(latents.size());
    for (const auto& a : latents) out.push_back(fuse_sample(layout, a, gate_scale));
    return out;
}

Matrix stack_columns(std::span<const FusedSample> samples) {
    if (samples.empty()) return {};
    Matrix X(samples.front().z_fused.size(), static_cast<Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) X.col(static_cast<Index>(i)) = samples[i].z_fused;
    return X;
}

void write_fused_csv(const std::filesystem::path& path, std::span<const FusedSample> samples,
                     std::span<const std::string> vocabulary) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "sample_hash,family";
    const Index k = samples.empty() ? 0 : samples.front().z_fused.size();
    for (Index j = 0; j < k; ++j) out << ",z_" << j;
    out << '\n';
    for (const auto& s : samples) {
        out << s.hash << ',' << vocabulary[static_cast<std::size_t>(s.family)];
        for (Index j = 0; j < s.z_fused.size(); ++j) out << ',' << format_double(s.z_fused(j));
        out << '\n';
    }
}

}  // namespace mmra
