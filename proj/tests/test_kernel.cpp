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

using Catch::Matchers::ContainsSubstring;
using test::ids;

namespace
{

MarkerMatrix markers_from(const Eigen::MatrixXd& values)
{
    MarkerMatrix raw;
    raw.values = values;
    raw.sample_ids = ids(values.rows());
    raw.marker_ids = ids(values.cols(), "m");
    return raw;
}

}  // namespace

// ============================================================================
// standardize_markers
// ============================================================================

TEST_CASE("two-point columns standardize to +-1", "[kernel]")
{
    Eigen::MatrixXd v(2, 2);
    v << 0, 2, 2, 0;
    const auto s = standardize_markers(markers_from(v));
    Eigen::MatrixXd expected(2, 2);
    expected << -1, 1, 1, -1;
    CHECK(s.values.isApprox(expected, 1e-14));
    CHECK(s.dropped.empty());
}

TEST_CASE("monomorphic column is dropped and reported", "[kernel]")
{
    Eigen::MatrixXd v(3, 2);
    v << 1, 0, 1, 1, 1, 2;
    const auto s = standardize_markers(markers_from(v));
    REQUIRE(s.values.cols() == 1);
    REQUIRE(s.dropped == std::vector<std::string>{"m0"});
    CHECK(s.marker_ids == std::vector<std::string>{"m1"});
}

TEST_CASE("all-monomorphic input is an error", "[kernel]")
{
    const Eigen::MatrixXd v = Eigen::MatrixXd::Ones(4, 3);
    CHECK_THROWS_WITH(standardize_markers(markers_from(v)), ContainsSubstring("no informative markers"));
}

TEST_CASE("missing entries are mean-imputed before scaling", "[kernel]")
{
    std::mt19937_64 gen(11);
    auto raw = test::random_markers(gen, 5, 4);
    raw.missing = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(5, 4, false);
    raw.missing(2, 1) = true;
    raw.missing(4, 3) = true;
    raw.values(2, 1) = 99.0;  // ignored under the mask
    raw.values(4, 3) = std::nan("");
    const auto s = standardize_markers(raw);
    REQUIRE(s.values.cols() == 4);

    for (Index j = 0; j < 4; ++j)
    {
        // recompute by hand: impute the observed mean, centre, scale with divisor n
        Eigen::VectorXd col = raw.values.col(j);
        double sum = 0.0;
        int observed = 0;
        for (Index i = 0; i < 5; ++i)
        {
            if (!raw.missing(i, j))
            {
                sum += col(i);
                ++observed;
            }
        }
        const double mean = sum / observed;
        for (Index i = 0; i < 5; ++i)
        {
            if (raw.missing(i, j))
            {
                col(i) = mean;
            }
        }
        col.array() -= mean;
        col /= std::sqrt(col.squaredNorm() / 5.0);
        CHECK((s.values.col(j) - col).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(std::abs(s.values.col(j).mean()) < 1e-12);
        CHECK(std::abs(s.values.col(j).squaredNorm() / 5.0 - 1.0) < 1e-10);
    }
    CHECK(s.values(2, 1) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("non-finite value outside the mask is rejected", "[kernel]")
{
    Eigen::MatrixXd v(3, 1);
    v << 0, std::numeric_limits<double>::infinity(), 2;
    CHECK_THROWS_AS(standardize_markers(markers_from(v)), Error);
}

TEST_CASE("marker matrix validation", "[kernel]")
{
    Eigen::MatrixXd v(2, 2);
    v << 0, 1, 2, 1;
    auto raw = markers_from(v);
    raw.sample_ids = {"a", "a"};
    CHECK_THROWS_AS(raw.validate(), Error);
    raw = markers_from(Eigen::MatrixXd::Zero(1, 2));
    CHECK_THROWS_AS(raw.validate(), Error);
}

// ============================================================================
// compute_gsm
// ============================================================================

TEST_CASE("gsm of a 2x2 standardized matrix", "[kernel]")
{
    Eigen::MatrixXd x(2, 2);
    x << -1, 1, 1, -1;
    const auto k = compute_gsm(x, {"a", "b"});
    Eigen::MatrixXd expected(2, 2);
    expected << 1, -1, -1, 1;
    CHECK(k.matrix.isApprox(expected, 1e-14));
    CHECK(k.kind == KernelKind::additive);
}

TEST_CASE("gsm equals the rank-one accumulation", "[kernel]")
{
    std::mt19937_64 gen(5);
    const auto x = standardize_markers(test::random_markers(gen, 6, 50)).values;
    const auto k = compute_gsm(x, ids(6));
    Eigen::MatrixXd brute = Eigen::MatrixXd::Zero(6, 6);
    for (Index j = 0; j < x.cols(); ++j)
    {
        brute += x.col(j) * x.col(j).transpose();
    }
    brute /= static_cast<double>(x.cols());
    CHECK((k.matrix - brute).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gsm invariants: zero row sums, unit mean diagonal, PSD", "[kernel]")
{
    std::mt19937_64 gen(17);
    for (int t = 0; t < 20; ++t)
    {
        const auto k = test::random_kernel(gen, 3 + t % 9, 10 + t);
        CHECK(is_symmetric(k.matrix));
        CHECK(k.matrix.rowwise().sum().cwiseAbs().maxCoeff() < 1e-8);
        CHECK(std::abs(k.matrix.diagonal().mean() - 1.0) < 1e-10);
        CHECK(check_psd(k.matrix).psd);
    }
}

TEST_CASE("blocked gsm matches the direct product", "[kernel]")
{
    std::mt19937_64 gen(23);
    auto raw = test::random_markers(gen, 9, 70);
    raw.values.col(5).setConstant(1.0);  // monomorphic
    std::vector<std::string> dropped;
    const auto blocked = gsm_from_markers(raw, &dropped, 8);
    const auto s = standardize_markers(raw);
    const auto direct = compute_gsm(s.values, raw.sample_ids);
    CHECK((blocked.matrix - direct.matrix).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(dropped == s.dropped);
}

TEST_CASE("gsm is invariant to affine recoding of a marker", "[kernel]")
{
    std::mt19937_64 gen(29);
    auto raw = test::random_markers(gen, 8, 12);
    const auto before = gsm_from_markers(raw);
    raw.values.col(3) = (2.0 - raw.values.col(3).array()).matrix();   // allele flip
    raw.values.col(7) = (0.5 + 3.0 * raw.values.col(7).array()).matrix();
    const auto after = gsm_from_markers(raw);
    CHECK((before.matrix - after.matrix).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("gsm needs at least one marker", "[kernel]")
{
    CHECK_THROWS_AS(compute_gsm(Eigen::MatrixXd(3, 0), ids(3)), Error);
}

// ============================================================================
// PSD checks and hadamard_square
// ============================================================================

TEST_CASE("hadamard square of the 2x2 example and the identity", "[kernel]")
{
    Kernel k{Eigen::MatrixXd(2, 2), {"a", "b"}, KernelKind::additive};
    k.matrix << 1, -1, -1, 1;
    const auto e = hadamard_square(k);
    CHECK(e.matrix.isApprox(Eigen::MatrixXd::Ones(2, 2)));
    CHECK(e.kind == KernelKind::epistatic);

    const Kernel id{Eigen::MatrixXd::Identity(4, 4), ids(4), KernelKind::custom};
    CHECK(hadamard_square(id).matrix == Eigen::MatrixXd::Identity(4, 4));
}

TEST_CASE("hadamard square of random PSD matrices stays PSD", "[kernel]")
{
    std::mt19937_64 gen(31);
    for (int t = 0; t < 100; ++t)
    {
        const Index n = 8;
        const Eigen::MatrixXd a = test::random_matrix(gen, n, 3);  // rank 3
        const Kernel k{a * a.transpose(), ids(n), KernelKind::custom};
        const auto e = hadamard_square(k);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e.matrix);
        REQUIRE(es.eigenvalues().minCoeff() >= -1e-10);
        REQUIRE(is_symmetric(e.matrix));
    }
}

TEST_CASE("is_psd agrees with the exact eigenvalue check", "[kernel]")
{
    std::mt19937_64 gen(37);
    std::uniform_real_distribution<double> shift(-0.3, 0.3);
    int disagreements = 0;
    for (int t = 0; t < 200; ++t)
    {
        const Index n = 2 + t % 10;
        const Eigen::MatrixXd a = test::random_matrix(gen, n, n);
        Eigen::MatrixXd m = a * a.transpose() / static_cast<double>(n);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
        m.diagonal().array() += shift(gen) - es.eigenvalues().minCoeff();
        const auto exact = check_psd(m);
        disagreements += static_cast<int>(exact.psd != is_psd(m));
    }
    CHECK(disagreements == 0);
}

TEST_CASE("kernel validation catches asymmetry and indefiniteness", "[kernel]")
{
    Kernel k{Eigen::MatrixXd::Identity(3, 3), ids(3), KernelKind::custom};
    CHECK_NOTHROW(validate_kernel(k));
    k.matrix(0, 1) = 0.5;
    CHECK_THROWS_AS(validate_kernel(k), Error);
    k.matrix(1, 0) = 0.5;
    CHECK_NOTHROW(validate_kernel(k));
    k.matrix(2, 2) = -1.0;
    CHECK_THROWS_AS(validate_kernel(k), Error);
    CHECK(check_psd(clip_to_psd(k.matrix)).psd);
}

// ============================================================================
// expand_replicates
// ============================================================================

TEST_CASE("identity expands to constant blocks", "[kernel]")
{
    const auto e = expand_replicates(Eigen::MatrixXd::Identity(2, 2), ReplicateDesign{2, 2});
    Eigen::MatrixXd expected(4, 4);
    expected << 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1;
    CHECK(e == expected);
}

TEST_CASE("r = 1 leaves the matrix unchanged", "[kernel]")
{
    std::mt19937_64 gen(41);
    const Eigen::MatrixXd m = test::random_spd(gen, 4);
    CHECK(expand_replicates(m, ReplicateDesign{4, 1}) == m);
}

TEST_CASE("expansion equals Z M Z^T with a materialized incidence", "[kernel]")
{
    std::mt19937_64 gen(43);
    const Eigen::MatrixXd m = test::random_spd(gen, 3);
    const ReplicateDesign d{3, 3};
    const Eigen::MatrixXd z = d.incidence();
    CHECK(z.rows() == 9);
    CHECK((z.rowwise().sum().array() == 1.0).all());
    CHECK((z.colwise().sum().array() == 3.0).all());
    CHECK((expand_replicates(m, d) - z * m * z.transpose()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("expanded spectrum is r times the original plus zeros", "[kernel]")
{
    std::mt19937_64 gen(47);
    for (Index r = 1; r <= 3; ++r)
    {
        const Eigen::MatrixXd m = test::random_spd(gen, 4);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(m);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> big(expand_replicates(m, ReplicateDesign{4, r}));
        std::vector<double> expected(static_cast<std::size_t>(4 * (r - 1)), 0.0);
        for (Index i = 0; i < 4; ++i)
        {
            expected.push_back(r * small.eigenvalues()(i));
        }
        std::sort(expected.begin(), expected.end());
        for (Index i = 0; i < big.eigenvalues().size(); ++i)
        {
            CHECK(big.eigenvalues()(i) == Catch::Approx(expected[static_cast<std::size_t>(i)]).margin(1e-10));
        }
    }
}

TEST_CASE("expansion rejects mismatched sizes", "[kernel]")
{
    CHECK_THROWS_AS(expand_replicates(Eigen::MatrixXd::Identity(3, 3), ReplicateDesign{2, 2}), Error);
}

}  // namespace pseudotrue
