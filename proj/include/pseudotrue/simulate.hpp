/*
 * Copyright 2026 The pseudotrue Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "pseudotrue/error.hpp"
#include "pseudotrue/gaussian.hpp"
#include "pseudotrue/kernel.hpp"
#include "pseudotrue/parallel.hpp"
#include "pseudotrue/rng.hpp"

namespace pseudotrue
{

struct Interval
{
    double lo = 0.0;
    double hi = 1.0;
};

struct Unrelated
{
};

/// Balding-Nichols structure: subpopulation allele frequencies drawn from
/// Beta(pi (1 - F) / F, (1 - pi)(1 - F) / F) around an ancestral pi.
struct BaldingNichols
{
    int n_subpops = 3;
    double fst = 0.1;
    Interval ancestral_maf_range{0.05, 0.95};
};

struct PopulationConfig
{
    Index n_samples = 3000;
    Index n_markers = 20000;
    std::variant<Unrelated, BaldingNichols> structure = Unrelated{};
    Interval maf_range{0.1, 0.5};
    std::uint64_t seed = 1;

    bool structured() const { return std::holds_alternative<BaldingNichols>(structure); }
};

namespace detail
{

// Substream layout: marker j uses streams 2j (frequencies) and 2j + 1
// (dosages), so columns are independent of each other and of n.
inline std::uint64_t frequency_stream(Index marker) { return 2 * static_cast<std::uint64_t>(marker); }
inline std::uint64_t dosage_stream(Index marker) { return 2 * static_cast<std::uint64_t>(marker) + 1; }

inline MarkerMatrix empty_panel(const PopulationConfig& config)
{
    if (config.n_samples < 2)
    {
        throw Error("population needs at least 2 samples");
    }
    if (config.n_markers < 1)
    {
        throw Error("population needs at least 1 marker");
    }
    MarkerMatrix m;
    m.values.resize(config.n_samples, config.n_markers);
    m.sample_ids.reserve(static_cast<std::size_t>(config.n_samples));
    for (Index i = 0; i < config.n_samples; ++i)
    {
        m.sample_ids.push_back("ind" + std::to_string(i + 1));
    }
    m.marker_ids.reserve(static_cast<std::size_t>(config.n_markers));
    for (Index j = 0; j < config.n_markers; ++j)
    {
        m.marker_ids.push_back("snp" + std::to_string(j + 1));
    }
    return m;
}

}  // namespace detail

/// Subpopulation of sample i under round-robin assignment.
inline int subpopulation_of(Index sample, int n_subpops)
{
    return static_cast<int>(sample % n_subpops);
}

/// Unrelated panel: p_j ~ U(maf_range), dosages i.i.d. Binomial(2, p_j).
inline MarkerMatrix simulate_unrelated(const PopulationConfig& config)
{
    if (config.structured())
    {
        throw Error("simulate_unrelated called with a structured config");
    }
    if (!(config.maf_range.lo > 0.0) || config.maf_range.hi > 0.5
        || config.maf_range.lo > config.maf_range.hi)
    {
        throw Error("maf range must lie within (0, 0.5]");
    }
    auto m = detail::empty_panel(config);
    parallel_for(
        static_cast<std::size_t>(config.n_markers),
        [&](std::size_t col)
        {
            const auto j = static_cast<Index>(col);
            Philox freq_rng(config.seed, detail::frequency_stream(j));
            const double p = uniform(freq_rng, config.maf_range.lo, config.maf_range.hi);
            Philox rng(config.seed, detail::dosage_stream(j));
            for (Index i = 0; i < config.n_samples; ++i)
            {
                m.values(i, j) = binomial2(rng, p);
            }
        });
    return m;
}

/// Balding-Nichols panel with samples assigned to subpopulations
/// round-robin.
inline MarkerMatrix simulate_structured(const PopulationConfig& config)
{
    const auto* bn = std::get_if<BaldingNichols>(&config.structure);
    if (bn == nullptr)
    {
        throw Error("simulate_structured called without a Balding-Nichols structure");
    }
    if (!(bn->fst > 0.0 && bn->fst < 1.0))
    {
        throw Error("fst must lie in (0, 1)");
    }
    if (bn->n_subpops < 2)
    {
        throw Error("Balding-Nichols needs at least 2 subpopulations");
    }
    const auto range = bn->ancestral_maf_range;
    if (!(range.lo > 0.0) || !(range.hi < 1.0) || range.lo > range.hi)
    {
        throw Error("ancestral frequency range must lie within (0, 1)");
    }
    auto m = detail::empty_panel(config);
    const double shape = (1.0 - bn->fst) / bn->fst;
    parallel_for(
        static_cast<std::size_t>(config.n_markers),
        [&](std::size_t col)
        {
            const auto j = static_cast<Index>(col);
            Philox freq_rng(config.seed, detail::frequency_stream(j));
            const double ancestral = uniform(freq_rng, range.lo, range.hi);
            std::vector<double> freqs(static_cast<std::size_t>(bn->n_subpops));
            for (auto& f : freqs)
            {
                f = beta_variate(freq_rng, ancestral * shape, (1.0 - ancestral) * shape);
            }
            Philox rng(config.seed, detail::dosage_stream(j));
            for (Index i = 0; i < config.n_samples; ++i)
            {
                const auto k = static_cast<std::size_t>(subpopulation_of(i, bn->n_subpops));
                m.values(i, j) = binomial2(rng, freqs[k]);
            }
        });
    return m;
}

inline MarkerMatrix simulate_markers(const PopulationConfig& config)
{
    return config.structured() ? simulate_structured(config) : simulate_unrelated(config);
}

/// n_reps independent trait vectors from N(0, truth), one per row.
inline Eigen::MatrixXd simulate_phenotypes(const Covariance& truth, Index n_reps, std::uint64_t seed)
{
    return sample_mvn(truth, n_reps, seed);
}

/// Observation identifiers `<genotype_id>_<replicate>` (replicates from 1).
inline std::vector<std::string> observation_ids(
    const std::vector<std::string>& genotype_ids,
    Index n_replicates)
{
    std::vector<std::string> out;
    out.reserve(genotype_ids.size() * static_cast<std::size_t>(n_replicates));
    for (const auto& g : genotype_ids)
    {
        for (Index r = 1; r <= n_replicates; ++r)
        {
            out.push_back(g + "_" + std::to_string(r));
        }
    }
    return out;
}

}  // namespace pseudotrue
