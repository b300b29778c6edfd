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


#include <catch_amalgamated.hpp>

#include "pseudotrue.hpp"
#include "test_support.hpp"

namespace pseudotrue
{

using test::ids;

namespace
{

struct BlockMeans
{
    double within = 0.0;
    double between = 0.0;
};

BlockMeans block_means(const Eigen::MatrixXd& k, int subpops)
{
    double w = 0.0;
    double b = 0.0;
    long nw = 0;
    long nb = 0;
    for (Index i = 0; i < k.rows(); ++i)
    {
        for (Index j = 0; j < i; ++j)
        {
            if (subpopulation_of(i, subpops) == subpopulation_of(j, subpops))
            {
                w += k(i, j);
                ++nw;
            }
            else
            {
                b += k(i, j);
                ++nb;
            }
        }
    }
    return {w / static_cast<double>(nw), b / static_cast<double>(nb)};
}

PopulationConfig bn(Index n, Index m, double fst, std::uint64_t seed, int subpops = 3)
{
    PopulationConfig c;
    c.n_samples = n;
    c.n_markers = m;
    c.seed = seed;
    c.structure = BaldingNichols{subpops, fst, {0.05, 0.95}};
    return c;
}

}  // namespace

TEST_CASE("large unrelated panel has small off-diagonal GSM entries", "[simulate]")
{
    PopulationConfig c;
    c.n_samples = 3000;
    c.n_markers = 20000;
    c.seed = 1;
    const auto raw = simulate_unrelated(c);
    CHECK(raw.sample_ids.front() == "ind1");
    CHECK(raw.marker_ids.back() == "snp20000");
    const auto k = gsm_from_markers(raw).matrix;
    const Index n = k.rows();
    const double off_sum = k.cwiseAbs().sum() - k.diagonal().cwiseAbs().sum();
    const double off_count = static_cast<double>(n * (n - 1));
    CHECK(off_sum / off_count < 0.02);

    const double mean = (k.sum() - k.trace()) / off_count;
    const double sq = (k.cwiseProduct(k).sum() - k.diagonal().squaredNorm()) / off_count;
    const double sd = std::sqrt(sq - mean * mean);
    const double expected = 1.0 / std::sqrt(20000.0);
    CHECK(sd < 1.5 * expected);
    CHECK(sd > expected / 1.5);
}

TEST_CASE("dosages at p = 0.5 average one", "[simulate]")
{
    PopulationConfig c;
    c.n_samples = 20000;
    c.n_markers = 5;
    c.maf_range = {0.5, 0.5};
    c.seed = 3;
    const auto raw = simulate_unrelated(c);
    const double se = std::sqrt(0.5 / 20000.0);  // var Binomial(2, 0.5) = 0.5
    for (Index j = 0; j < 5; ++j)
    {
        CHECK(std::abs(raw.values.col(j).mean() - 1.0) < 5 * se);
    }
}

TEST_CASE("simulators are deterministic given the seed", "[simulate]")
{
    PopulationConfig c;
    c.n_samples = 50;
    c.n_markers = 80;
    c.seed = 5;
    CHECK(simulate_unrelated(c).values == simulate_unrelated(c).values);
    const auto s = bn(50, 80, 0.2, 5);
    CHECK(simulate_structured(s).values == simulate_structured(s).values);
    auto other = s;
    other.seed = 6;
    CHECK(simulate_structured(s).values != simulate_structured(other).values);
    CHECK(simulate_markers(s).values == simulate_structured(s).values);
}

TEST_CASE("dosages are valid genotype codes", "[simulate]")
{
    const auto raw = simulate_markers(bn(30, 200, 0.3, 7));
    CHECK((raw.values.array() == 0.0 || raw.values.array() == 1.0 || raw.values.array() == 2.0).all());
    CHECK_NOTHROW(raw.validate());
}

TEST_CASE("subpopulations are assigned round-robin", "[simulate]")
{
    std::vector<int> sizes(3, 0);
    for (Index i = 0; i < 10; ++i)
    {
        ++sizes[static_cast<std::size_t>(subpopulation_of(i, 3))];
    }
    CHECK(sizes == std::vector<int>{4, 3, 3});
    CHECK(subpopulation_of(4, 3) == 1);
}

TEST_CASE("weak differentiation looks unrelated", "[simulate]")
{
    const auto k = gsm_from_markers(simulate_markers(bn(300, 5000, 0.001, 11))).matrix;
    const auto m = block_means(k, 3);
    CHECK(m.within - m.between < 0.01);
}

TEST_CASE("strong differentiation produces block structure", "[simulate]")
{
    for (const double fst : {0.1, 0.3})
    {
        const auto k = gsm_from_markers(simulate_markers(bn(300, 5000, fst, 13))).matrix;
        const auto m = block_means(k, 3);
        CHECK(m.within > m.between);
        if (fst == 0.3)
        {
            CHECK(m.within - m.between > 0.1);
        }
    }
}

TEST_CASE("invalid structures are rejected", "[simulate]")
{
    CHECK_THROWS_AS(simulate_structured(bn(30, 10, 0.0, 1)), Error);
    CHECK_THROWS_AS(simulate_structured(bn(30, 10, 1.0, 1)), Error);
    CHECK_THROWS_AS(simulate_structured(bn(30, 10, 0.1, 1, 1)), Error);
    PopulationConfig unrelated;
    unrelated.n_samples = 10;
    unrelated.n_markers = 10;
    CHECK_THROWS_AS(simulate_structured(unrelated), Error);
    unrelated.n_samples = 1;
    CHECK_THROWS_AS(simulate_unrelated(unrelated), Error);
}

TEST_CASE("phenotypes from the identity are independent standard normals", "[simulate]")
{
    const Covariance truth{Eigen::MatrixXd::Identity(4, 4), "identity"};
    const auto y = simulate_phenotypes(truth, 2, 1);
    CHECK(y.rows() == 2);
    CHECK(y.cols() == 4);
    CHECK(y == sample_mvn(truth.matrix, 2, 1));
    CHECK(y.row(0) != y.row(1));
    CHECK(simulate_phenotypes(truth, 2, 2) != y);
}

TEST_CASE("phenotype covariance matches the scenario truth", "[simulate]")
{
    std::mt19937_64 gen(17);
    const auto k = test::random_kernel(gen, 5, 20);
    const auto truth = build_truth(Scenario::A, k, ReplicateDesign{5, 1}).covariance();
    const Index reps = 10000;
    const auto y = simulate_phenotypes(truth, reps, 19);
    const Eigen::MatrixXd c = y.transpose() * y / static_cast<double>(reps);
    const auto& s = truth.matrix;
    for (Index i = 0; i < 5; ++i)
    {
        for (Index j = 0; j < 5; ++j)
        {
            const double se = std::sqrt((s(i, i) * s(j, j) + s(i, j) * s(i, j)) / static_cast<double>(reps));
            CHECK(std::abs(c(i, j) - s(i, j)) < 5 * se);
        }
    }
}

TEST_CASE("observation ids are genotype-major", "[simulate]")
{
    CHECK(observation_ids({"g1", "g2"}, 2) == std::vector<std::string>{"g1_1", "g1_2", "g2_1", "g2_2"});
}

}  // namespace pseudotrue
