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

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "pseudotrue/error.hpp"
#include "pseudotrue/parallel.hpp"
#include "pseudotrue/rng.hpp"

namespace pseudotrue
{

using Eigen::Index;

/// Zero-mean Gaussian covariance.
struct Covariance
{
    Eigen::MatrixXd matrix;
    std::string label;

    Index dim() const { return matrix.rows(); }
};

struct CholeskyFactor
{
    Eigen::MatrixXd lower;
    double log_det = 0.0;
};

namespace detail
{

// Unblocked pass used only after Eigen::LLT has failed, to locate the
// first non-positive pivot.
inline Index first_bad_pivot(const Eigen::MatrixXd& s)
{
    const Index n = s.rows();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (Index j = 0; j < n; ++j)
    {
        const double pivot = s(j, j) - l.row(j).head(j).squaredNorm();
        if (!(pivot > 0.0))
        {
            return j;
        }
        l(j, j) = std::sqrt(pivot);
        for (Index i = j + 1; i < n; ++i)
        {
            l(i, j) = (s(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
        }
    }
    return n - 1;
}

inline std::optional<Eigen::LLT<Eigen::MatrixXd>> try_llt(const Eigen::MatrixXd& s)
{
    if (s.rows() != s.cols() || !s.allFinite())
    {
        return std::nullopt;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success)
    {
        return std::nullopt;
    }
    // LLT only flags pivots <= 0; reject non-finite results too.
    if (!llt.matrixLLT().diagonal().allFinite()
        || llt.matrixLLT().diagonal().minCoeff() <= 0.0)
    {
        return std::nullopt;
    }
    return llt;
}

inline double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt)
{
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace detail

/// Cholesky factor S = L L^T and log det S = 2 sum log L_ii.
inline CholeskyFactor chol_logdet(const Eigen::MatrixXd& s)
{
    if (s.rows() != s.cols())
    {
        throw Error("chol_logdet: matrix is not square");
    }
    auto llt = detail::try_llt(s);
    if (!llt)
    {
        throw NotPositiveDefinite(detail::first_bad_pivot(s));
    }
    return {llt->matrixL(), detail::log_det(*llt)};
}

inline CholeskyFactor chol_logdet(const Covariance& s)
{
    return chol_logdet(s.matrix);
}

namespace detail
{

// KL(Q || P) from the two Cholesky factors; tr(P^-1 Q) = ||L_p^-1 L_q||_F^2.
inline double kl_from_factors(
    const Eigen::MatrixXd& lower_q,
    double log_det_q,
    const Eigen::LLT<Eigen::MatrixXd>& p)
{
    const Eigen::MatrixXd solved = p.matrixL().solve(lower_q);
    const auto d = static_cast<double>(lower_q.rows());
    return 0.5 * (solved.squaredNorm() - d + log_det(p) - log_det_q);
}

}  // namespace detail

/// Kullback-Leibler divergence KL(N(0, sq) || N(0, sp)).
inline double kl_divergence(const Eigen::MatrixXd& sq, const Eigen::MatrixXd& sp)
{
    if (sq.rows() != sp.rows() || sq.cols() != sp.cols())
    {
        throw Error("kl_divergence: dimension mismatch");
    }
    const auto q = chol_logdet(sq);
    auto p = detail::try_llt(sp);
    if (!p)
    {
        throw NotPositiveDefinite(detail::first_bad_pivot(sp));
    }
    return detail::kl_from_factors(q.lower, q.log_det, *p);
}

inline double kl_divergence(const Covariance& sq, const Covariance& sp)
{
    return kl_divergence(sq.matrix, sp.matrix);
}

/// KL between N(0, Z mq Z^T + cq I) and N(0, Z mp Z^T + cp I) for a balanced
/// design with r replicates, without forming the (n r) x (n r) matrices.
///
/// The genotype-mean subspace (span of Z) carries covariances r M + c I; its
/// n(r - 1)-dimensional orthogonal complement sees only c I.
inline double kl_balanced(
    const Eigen::MatrixXd& mq,
    double cq,
    const Eigen::MatrixXd& mp,
    double cp,
    Index r)
{
    if (mq.rows() != mp.rows() || mq.rows() != mq.cols() || mp.rows() != mp.cols())
    {
        throw Error("kl_balanced: dimension mismatch");
    }
    if (r < 1)
    {
        throw Error("kl_balanced: replicate count must be positive");
    }
    const Index n = mq.rows();
    const auto rd = static_cast<double>(r);
    Eigen::MatrixXd q = rd * mq;
    q.diagonal().array() += cq;
    Eigen::MatrixXd p = rd * mp;
    p.diagonal().array() += cp;
    double kl = kl_divergence(q, p);
    if (r > 1)
    {
        if (!(cq > 0.0))
        {
            throw NotPositiveDefinite(0);
        }
        if (!(cp > 0.0))
        {
            throw NotPositiveDefinite(0);
        }
        kl += 0.5 * static_cast<double>(n * (r - 1)) * (cq / cp - 1.0 + std::log(cp / cq));
    }
    return kl;
}

/// Gaussian log-density -1/2 [d log 2 pi + log det S + y^T S^-1 y].
inline double loglik(const Eigen::MatrixXd& s, const Eigen::VectorXd& y)
{
    if (s.rows() != y.size())
    {
        throw Error("loglik: dimension mismatch");
    }
    auto llt = detail::try_llt(s);
    if (!llt)
    {
        throw NotPositiveDefinite(detail::first_bad_pivot(s));
    }
    const Eigen::VectorXd w = llt->matrixL().solve(y);
    const auto d = static_cast<double>(y.size());
    return -0.5 * (d * std::log(2.0 * std::numbers::pi) + detail::log_det(*llt) + w.squaredNorm());
}

inline double loglik(const Covariance& s, const Eigen::VectorXd& y)
{
    return loglik(s.matrix, y);
}

/// `count` draws from N(0, S), one per row. Row i uses Philox stream i of
/// `seed`, so each row is reproducible on its own.
inline Eigen::MatrixXd sample_mvn(const Eigen::MatrixXd& s, Index count, std::uint64_t seed)
{
    if (count < 1)
    {
        throw Error("sample_mvn: count must be at least 1");
    }
    const auto factor = chol_logdet(s);
    const Index d = s.rows();
    Eigen::MatrixXd z(d, count);
    parallel_for(
        static_cast<std::size_t>(count),
        [&](std::size_t row)
        {
            Philox rng(seed, row);
            for (Index k = 0; k < d; ++k)
            {
                z(k, static_cast<Index>(row)) = standard_normal(rng);
            }
        });
    Eigen::MatrixXd draws = (factor.lower.triangularView<Eigen::Lower>() * z).transpose();
    return draws;
}

inline Eigen::MatrixXd sample_mvn(const Covariance& s, Index count, std::uint64_t seed)
{
    return sample_mvn(s.matrix, count, seed);
}

}  // namespace pseudotrue
