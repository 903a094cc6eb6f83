#ifndef MMRA_FUSION_HPP
#define MMRA_FUSION_HPP

// Gated concatenation of the three modality latents. The layout is fixed,
// static | dynamic | network, and absent blocks are zero-filled so a single
// classifier serves every availability mask.

#include "mmra/dcae.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace mmra {

/// A latent vector tagged with the modality it came from, so fuse() cannot
/// be handed the blocks in the wrong order.
template <Modality M>
struct Latent {
    static constexpr Modality modality = M;
    Vector z;
};

using StaticLatent = Latent<Modality::Static>;
using DynamicLatent = Latent<Modality::Dynamic>;
using NetworkLatent = Latent<Modality::Network>;

struct FusedLayout {
    std::array<Index, 3> dims{0, 0, 0};

    Index offset(Modality m) const;
    Index total() const { return dims[0] + dims[1] + dims[2]; }
};

struct FusedSample {
    std::string hash;
    int family = -1;
    Vector z_fused;
    std::array<bool, 3> gate{false, false, false};
    std::array<double, 3> gate_scale{1.0, 1.0, 1.0};

    auto block(const FusedLayout& layout, Modality m) const {
        return z_fused.segment(layout.offset(m), layout.dims[static_cast<std::size_t>(index_of(m))]);
    }
};

/// z_fused = [g_s * z_s || g_d * z_d || g_n * z_n], g_m = scale_m when the
/// block is present and 0 otherwise. Throws when every block is absent.
Vector fuse(const FusedLayout& layout, const std::optional<StaticLatent>& zs,
            const std::optional<DynamicLatent>& zd, const std::optional<NetworkLatent>& zn,
            const std::array<double, 3>& gate_scale = {1.0, 1.0, 1.0});

/// Hash-joined latents of one sample; empty slots mean the modality is absent.
struct AlignedLatents {
    std::string hash;
    int family = -1;
    std::optional<StaticLatent> zs;
    std::optional<DynamicLatent> zd;
    std::optional<NetworkLatent> zn;

    std::array<bool, 3> gate() const { return {zs.has_value(), zd.has_value(), zn.has_value()}; }
};

/// Joins the three embedding sequences on hash with strict label matching.
/// Output order follows first appearance (static, dynamic, network). With
/// `balance_target` > 0 the joined set is oversampled per family to that count.
std::vector<AlignedLatents> align_latents(std::span<const LatentEmbedding> zs,
                                          std::span<const LatentEmbedding> zd,
                                          std::span<const LatentEmbedding> zn, int num_classes,
                                          int balance_target = 0, std::uint64_t seed = 0);

FusedSample fuse_sample(const FusedLayout& layout, const AlignedLatents& latents,
                        const std::array<double, 3>& gate_scale = {1.0, 1.0, 1.0});

std::vector<FusedSample> fuse_all(const FusedLayout& layout, std::span<const AlignedLatents> latents,
                                  const std::array<double, 3>& gate_scale = {1.0, 1.0, 1.0});

/// One column per sample.
Matrix stack_columns(std::span<const FusedSample> samples);

/// `sample_hash,family,z_0..z_{k-1}` over the fused vectors.
void write_fused_csv(const std::filesystem::path& path, std::span<const FusedSample> samples,
                     std::span<const std::string> vocabulary);

}  // namespace mmra

#endif
