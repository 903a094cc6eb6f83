#include "mmra/dataset.hpp"

#include <cstdio>
#include <random>

namespace mmra {

namespace {

Vector random_direction(Index dim, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(dim);
    for (Index j = 0; j < dim; ++j) v(j) = normal(rng);
    const double n = v.norm();
    return n > 0 ? Vector(v / n) : v;
}

std::size_t find_family(const SynthConfig& config, const std::string& name) {
    for (std::size_t f = 0; f < config.families.size(); ++f)
        if (config.families[f].name == name) return f;
    throw ConfigError("synthetic config references unknown family '" + name + "'");
}

// Family centres for one modality.
std::vector<Vector> family_centres(const SynthConfig& config, const SynthModality& spec,
                                   std::mt19937_64& rng) {
    const std::size_t F = config.families.size();
    std::vector<Vector> centre(F);
    std::vector<int> group_of(F, -1);
    for (std::size_t g = 0; g < spec.merged_groups.size(); ++g)
        for (const auto& name : spec.merged_groups[g]) group_of[find_family(config, name)] = static_cast<int>(g);

    std::vector<std::optional<Vector>> group_centre(spec.merged_groups.size());
    for (std::size_t f = 0; f < F; ++f) {
        // Every family draws a direction so the stream does not depend on
        // placement choices.
        Vector own = spec.separation * random_direction(spec.dim, rng);
        if (config.families[f].placement != Placement::random) continue;
        const int g = group_of[f];
        if (g >= 0) {
            auto& gc = group_centre[static_cast<std::size_t>(g)];
            if (!gc) gc = own;
            centre[f] = *gc;
        } else {
            centre[f] = own;
        }
    }
    for (std::size_t f = 0; f < F; ++f) {
        const auto& fam = config.families[f];
        Vector offset = random_direction(spec.dim, rng);
        if (fam.placement != Placement::near) continue;
        const std::size_t a = find_family(config, fam.anchor);
        if (config.families[a].placement != Placement::random)
            throw ConfigError("family '" + fam.name + "' must anchor on a randomly placed family");
        centre[f] = centre[a] + fam.anchor_offset * offset;
    }
    for (std::size_t f = 0; f < F; ++f) {
        if (config.families[f].placement != Placement::centroid) continue;
        Vector sum = Vector::Zero(spec.dim);
        double n = 0;
        for (std::size_t o = 0; o < F; ++o) {
            if (o == f || config.families[o].placement == Placement::centroid) continue;
            sum += centre[o];
            n += 1;
        }
        centre[f] = n > 0 ? Vector(sum / n) : sum;
    }
    return centre;
}

}  // namespace

std::array<ModalityTable, 3> synth_generate(const SynthConfig& config, std::uint64_t seed) {
    if (config.families.empty()) throw ConfigError("synthetic config has no families");
    for (const auto& f : config.families)
        if (f.count < 1) throw ConfigError("family '" + f.name + "' must have a positive sample count");
    for (const auto& m : config.modalities) {
        if (m.dim < 1) throw ConfigError("synthetic modality dims must be positive");
        if (m.noise < 0 || m.drop_fraction < 0 || m.drop_fraction >= 1)
            throw ConfigError("synthetic noise must be >= 0 and drop_fraction in [0, 1)");
    }

    std::mt19937_64 centre_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::array<std::vector<Vector>, 3> centres;
    for (std::size_t m = 0; m < 3; ++m) centres[m] = family_centres(config, config.modalities[m], centre_rng);

    std::array<ModalityTable, 3> tables;
    std::array<std::vector<Vector>, 3> rows;
    for (std::size_t m = 0; m < 3; ++m) {
        tables[m].modality = kModalities[m];
        tables[m].feature_dim = config.modalities[m].dim;
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t serial = 0;
    char hash[32];
    for (std::size_t f = 0; f < config.families.size(); ++f) {
        for (int i = 0; i < config.families[f].count; ++i, ++serial) {
            std::snprintf(hash, sizeof(hash), "s%07zu", serial);
            std::array<bool, 3> keep{};
            for (std::size_t m = 0; m < 3; ++m) keep[m] = unit(rng) >= config.modalities[m].drop_fraction;
            if (!keep[0] && !keep[1] && !keep[2]) keep[0] = true;
            for (std::size_t m = 0; m < 3; ++m) {
                const auto& spec = config.modalities[m];
                Vector x(spec.dim);
                for (Index j = 0; j < spec.dim; ++j) x(j) = centres[m][f](j) + spec.noise * normal(rng);
                if (!keep[m]) continue;
                tables[m].hashes.emplace_back(hash);
                tables[m].families.push_back(config.families[f].name);
                rows[m].push_back(std::move(x));
            }
        }
    }
    for (std::size_t m = 0; m < 3; ++m) {
        tables[m].features.resize(static_cast<Index>(rows[m].size()), tables[m].feature_dim);
        for (std::size_t i = 0; i < rows[m].size(); ++i)
            tables[m].features.row(static_cast<Index>(i)) = rows[m][i].transpose();
    }
    return tables;
}

}  // namespace mmra
