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

#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pseudotrue.hpp"

namespace pseudotrue::test
{

inline Eigen::MatrixXd random_matrix(std::mt19937_64& gen, Index rows, Index cols)
{
    std::normal_distribution<double> z;
    Eigen::MatrixXd a(rows, cols);
    for (Index i = 0; i < a.size(); ++i)
    {
        a.data()[i] = z(gen);
    }
    return a;
}

// A^T A / d + shift * I, comfortably positive definite.
inline Eigen::MatrixXd random_spd(std::mt19937_64& gen, Index d, double shift = 0.5)
{
    const Eigen::MatrixXd a = random_matrix(gen, d, d);
    Eigen::MatrixXd s = a.transpose() * a / static_cast<double>(d);
    s.diagonal().array() += shift;
    return s;
}

inline std::vector<std::string> ids(Index n, const std::string& prefix = "s")
{
    std::vector<std::string> out;
    for (Index i = 0; i < n; ++i)
    {
        out.push_back(prefix + std::to_string(i));
    }
    return out;
}

inline MarkerMatrix random_markers(std::mt19937_64& gen, Index n, Index m)
{
    std::uniform_int_distribution<int> dosage(0, 2);
    MarkerMatrix raw;
    raw.values.resize(n, m);
    for (Index i = 0; i < raw.values.size(); ++i)
    {
        raw.values.data()[i] = dosage(gen);
    }
    // keep every column polymorphic
    for (Index j = 0; j < m; ++j)
    {
        raw.values(0, j) = 0;
        raw.values(1, j) = 2;
    }
    raw.sample_ids = ids(n);
    raw.marker_ids = ids(m, "m");
    return raw;
}

inline Kernel random_kernel(std::mt19937_64& gen, Index n, Index m = 50)
{
    return gsm_from_markers(random_markers(gen, n, m));
}

inline Kernel small_panel_kernel(Index n, Index m, std::uint64_t seed, double fst = 0.0, int subpops = 3)
{
    PopulationConfig c;
    c.n_samples = n;
    c.n_markers = m;
    c.seed = seed;
    if (fst > 0.0)
    {
        c.structure = BaldingNichols{subpops, fst, {0.05, 0.95}};
    }
    return gsm_from_markers(simulate_markers(c));
}

}  // namespace pseudotrue::test
