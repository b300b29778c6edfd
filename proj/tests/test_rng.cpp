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


#include <set>

#include <catch_amalgamated.hpp>

#include "pseudotrue.hpp"

namespace pseudotrue
{

namespace
{

using Block = std::array<std::uint32_t, 4>;

Block philox(Block ctr, std::array<std::uint32_t, 2> key)
{
    return philox4x32_10(ctr, key);
}

}  // namespace

// Known-answer vectors from the Random123 distribution.
TEST_CASE("philox4x32-10 known answers", "[rng]")
{
    CHECK(philox({0, 0, 0, 0}, {0, 0}) == Block{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(
        philox({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff})
        == Block{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(
        philox({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0})
        == Block{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("engine is deterministic per seed and stream", "[rng]")
{
    Philox a(42, 3);
    Philox b(42, 3);
    for (int i = 0; i < 1000; ++i)
    {
        REQUIRE(a() == b());
    }
}

TEST_CASE("seeds and streams give distinct sequences", "[rng]")
{
    std::set<std::uint64_t> first;
    for (std::uint64_t seed = 0; seed < 4; ++seed)
    {
        for (std::uint64_t stream = 0; stream < 4; ++stream)
        {
            Philox g(seed, stream);
            first.insert(g());
        }
    }
    CHECK(first.size() == 16);
}

TEST_CASE("distribution helpers have the right moments", "[rng]")
{
    Philox g(7);
    const int n = 200000;
    double su = 0.0;
    double sz = 0.0;
    double sz2 = 0.0;
    double sb = 0.0;
    double sk = 0.0;
    for (int i = 0; i < n; ++i)
    {
        const double u = uniform01(g);
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        su += u;
        const double z = standard_normal(g);
        sz += z;
        sz2 += z * z;
        sb += beta_variate(g, 2.0, 6.0);
        const int k = binomial2(g, 0.3);
        REQUIRE(k >= 0);
        REQUIRE(k <= 2);
        sk += k;
    }
    // 5 standard errors in each case
    CHECK(std::abs(su / n - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
    CHECK(std::abs(sz / n) < 5 * std::sqrt(1.0 / n));
    CHECK(std::abs(sz2 / n - 1.0) < 5 * std::sqrt(2.0 / n));
    const double beta_var = 2.0 * 6.0 / (64.0 * 9.0);
    CHECK(std::abs(sb / n - 0.25) < 5 * std::sqrt(beta_var / n));
    CHECK(std::abs(sk / n - 0.6) < 5 * std::sqrt(2 * 0.3 * 0.7 / n));
}

TEST_CASE("uniform respects its bounds", "[rng]")
{
    Philox g(1);
    for (int i = 0; i < 10000; ++i)
    {
        const double v = uniform(g, 0.1, 0.5);
        REQUIRE(v >= 0.1);
        REQUIRE(v < 0.5);
    }
}

}  // namespace pseudotrue
