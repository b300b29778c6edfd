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


#include <sstream>

#include <catch_amalgamated.hpp>

#include "pseudotrue.hpp"
#include "test_support.hpp"

namespace pseudotrue
{

using test::ids;

TEST_CASE("numbers use 12 significant digits", "[io]")
{
    CHECK(io::format_number(0.1) == "0.1");
    CHECK(io::format_number(1.0 / 3.0) == "0.333333333333");
    CHECK(io::format_number(std::nan("")) == "NA");
}

TEST_CASE("kernel round-trip", "[io]")
{
    std::mt19937_64 gen(3);
    const auto k = test::random_kernel(gen, 7, 40);
    std::stringstream ss;
    io::write_kernel(ss, k);
    const auto back = io::read_kernel(ss);
    CHECK(back.sample_ids == k.sample_ids);
    CHECK((back.matrix - k.matrix).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("malformed kernel files are rejected", "[io]")
{
    const std::vector<std::string> bad{
        "",
        "id\n",
        "id\ta\tb\na\t1\t0\n",                 // missing row
        "id\ta\tb\na\t1\t0\nb\t0\n",           // short row
        "id\ta\tb\nb\t1\t0\na\t0\t1\n",        // row order
        "id\ta\tb\na\t1\tx\nb\t0\t1\n"};       // not a number
    for (const auto& text : bad)
    {
        std::stringstream ss(text);
        CHECK_THROWS_AS(io::read_kernel(ss), Error);
    }
    // parsing succeeds, validation does not
    std::stringstream asymmetric("id\ta\tb\na\t1\t0.5\nb\t0\t1\n");
    CHECK_THROWS_AS(validate_kernel(io::read_kernel(asymmetric)), Error);
}

TEST_CASE("marker round-trip keeps missing calls", "[io]")
{
    std::mt19937_64 gen(5);
    auto raw = test::random_markers(gen, 4, 3);
    raw.missing = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(4, 3, false);
    raw.missing(2, 1) = true;
    std::stringstream ss;
    io::write_markers(ss, raw);
    CHECK(ss.str().find("NA") != std::string::npos);
    const auto back = io::read_markers(ss);
    CHECK(back.sample_ids == raw.sample_ids);
    CHECK(back.marker_ids == raw.marker_ids);
    REQUIRE(back.missing.size() == 12);
    CHECK(back.missing(2, 1));
    CHECK(back.missing.count() == 1);
    for (Index i = 0; i < 4; ++i)
    {
        for (Index j = 0; j < 3; ++j)
        {
            if (!raw.missing(i, j))
            {
                CHECK(back.values(i, j) == raw.values(i, j));
            }
        }
    }
}

TEST_CASE("malformed marker files are rejected", "[io]")
{
    const std::vector<std::string> bad{
        "",
        "id,m1,m2\ns1,0,1\ns2,1\n",
        "id,m1\ns1,0\ns2,zz\n",
        "id,m1,m1\ns1,0,1\ns2,1,0\n",
        "id,m1\ns1,0\n"};
    for (const auto& text : bad)
    {
        std::stringstream ss(text);
        CHECK_THROWS_AS(io::read_markers(ss), Error);
    }
}

TEST_CASE("phenotype round-trip", "[io]")
{
    io::PhenotypeTable t{observation_ids({"a", "b"}, 2), sample_mvn(Eigen::MatrixXd::Identity(4, 4), 3, 1)};
    std::stringstream ss;
    io::write_phenotypes(ss, t);
    const auto back = io::read_phenotypes(ss);
    CHECK(back.observation_ids == t.observation_ids);
    CHECK((back.values - t.values).cwiseAbs().maxCoeff() < 1e-11);

    std::stringstream bad("a_1\tb_1\n0.5\n");
    CHECK_THROWS_AS(io::read_phenotypes(bad), Error);
}

}  // namespace pseudotrue
