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

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pseudotrue/error.hpp"

namespace pseudotrue
{

using Eigen::Index;

/// Genotype dosages, one row per sample. `missing` is either empty (no
/// missing calls) or has the same shape as `values`.
struct MarkerMatrix
{
    Eigen::MatrixXd values;
    std::vector<std::string> sample_ids;
    std::vector<std::string> marker_ids;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing;

    Index n_samples() const { return values.rows(); }
    Index n_markers() const { return values.cols(); }

    bool is_missing(Index i, Index j) const
    {
        return missing.size() != 0 && missing(i, j);
    }

    void validate() const;
};

enum class KernelKind
{
    additive,
    epistatic,
    custom
};

inline const char* to_string(KernelKind kind)
{
    switch (kind)
    {
        case KernelKind::additive:
            return "additive";
        case KernelKind::epistatic:
            return "epistatic";
        case KernelKind::custom:
            return "custom";
    }
    return "custom";
}

struct Kernel
{
    Eigen::MatrixXd matrix;
    std::vector<std::string> sample_ids;
    KernelKind kind = KernelKind::custom;

    Index size() const { return matrix.rows(); }
};

/// Balanced replication: every genotype observed `n_replicates` times.
/// Observations are genotype-major, i.e. observation o belongs to genotype
/// o / n_replicates.
struct ReplicateDesign
{
    Index n_genotypes = 0;
    Index n_replicates = 1;

    Index n_observations() const { return n_genotypes * n_replicates; }
    Index genotype_of(Index observation) const { return observation / n_replicates; }

    /// Materialized (n*r) x n incidence matrix Z.
    Eigen::MatrixXd incidence() const
    {
        Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n_observations(), n_genotypes);
        for (Index o = 0; o < n_observations(); ++o)
        {
            z(o, genotype_of(o)) = 1.0;
        }
        return z;
    }

    friend bool operator==(const ReplicateDesign&, const ReplicateDesign&) = default;
};

struct StandardizedMarkers
{
    Eigen::MatrixXd values;
    std::vector<std::string> marker_ids;
    /// Monomorphic markers removed before scaling.
    std::vector<std::string> dropped;
};

namespace detail
{

template <typename Ids>
void require_unique(const Ids& ids, const char* what)
{
    std::unordered_set<std::string> seen;
    for (const auto& id : ids)
    {
        if (!seen.insert(id).second)
        {
            throw Error(std::string("duplicate ") + what + " identifier '" + id + "'");
        }
    }
}

struct ColumnMoments
{
    double mean = 0.0;
    double sd = 0.0;
    bool monomorphic = true;
};

// Mean over non-missing calls; sd uses divisor n after mean imputation.
inline ColumnMoments column_moments(const MarkerMatrix& raw, Index j)
{
    const Index n = raw.n_samples();
    ColumnMoments m;
    double sum = 0.0;
    Index observed = 0;
    double first = 0.0;
    for (Index i = 0; i < n; ++i)
    {
        if (raw.is_missing(i, j))
        {
            continue;
        }
        const double v = raw.values(i, j);
        if (observed == 0)
        {
            first = v;
        }
        else if (v != first)
        {
            m.monomorphic = false;
        }
        sum += v;
        ++observed;
    }
    if (observed == 0)
    {
        throw Error("marker '" + raw.marker_ids[j] + "' has no observed genotypes");
    }
    m.mean = sum / static_cast<double>(observed);
    if (m.monomorphic)
    {
        return m;
    }
    double ss = 0.0;
    for (Index i = 0; i < n; ++i)
    {
        if (!raw.is_missing(i, j))
        {
            const double d = raw.values(i, j) - m.mean;
            ss += d * d;
        }
    }
    m.sd = std::sqrt(ss / static_cast<double>(n));
    return m;
}

inline void standardize_column_into(
    const MarkerMatrix& raw,
    Index j,
    const ColumnMoments& m,
    Eigen::Ref<Eigen::VectorXd> out)
{
    for (Index i = 0; i < raw.n_samples(); ++i)
    {
        out(i) = raw.is_missing(i, j) ? 0.0 : (raw.values(i, j) - m.mean) / m.sd;
    }
}

inline void symmetrize_from_lower(Eigen::MatrixXd& m)
{
    m.triangularView<Eigen::StrictlyUpper>() = m.transpose();
}

}  // namespace detail

inline void MarkerMatrix::validate() const
{
    if (n_samples() < 2)
    {
        throw Error("marker matrix needs at least 2 samples");
    }
    if (n_markers() < 1)
    {
        throw Error("marker matrix needs at least 1 marker");
    }
    if (static_cast<Index>(sample_ids.size()) != n_samples()
        || static_cast<Index>(marker_ids.size()) != n_markers())
    {
        throw Error("marker identifiers do not match matrix dimensions");
    }
    if (missing.size() != 0
        && (missing.rows() != n_samples() || missing.cols() != n_markers()))
    {
        throw Error("missing-value mask has the wrong shape");
    }
    detail::require_unique(sample_ids, "sample");
    detail::require_unique(marker_ids, "marker");
    for (Index j = 0; j < n_markers(); ++j)
    {
        for (Index i = 0; i < n_samples(); ++i)
        {
            if (!is_missing(i, j) && !std::isfinite(values(i, j)))
            {
                throw Error(
                    "non-finite genotype value for sample '" + sample_ids[i]
                    + "', marker '" + marker_ids[j] + "'");
            }
        }
    }
}

/// Mean-imputes missing calls, then centers and scales every polymorphic
/// column to mean 0 and variance 1 (divisor n). Monomorphic columns are
/// dropped and reported.
inline StandardizedMarkers standardize_markers(const MarkerMatrix& raw)
{
    raw.validate();
    const Index n = raw.n_samples();

    std::vector<detail::ColumnMoments> moments;
    std::vector<Index> kept;
    StandardizedMarkers out;
    for (Index j = 0; j < raw.n_markers(); ++j)
    {
        auto m = detail::column_moments(raw, j);
        if (m.monomorphic)
        {
            out.dropped.push_back(raw.marker_ids[j]);
            continue;
        }
        moments.push_back(m);
        kept.push_back(j);
    }
    if (kept.empty())
    {
        throw Error("no informative markers");
    }

    out.values.resize(n, static_cast<Index>(kept.size()));
    out.marker_ids.reserve(kept.size());
    for (std::size_t c = 0; c < kept.size(); ++c)
    {
        detail::standardize_column_into(
            raw, kept[c], moments[c], out.values.col(static_cast<Index>(c)));
        out.marker_ids.push_back(raw.marker_ids[kept[c]]);
    }
    return out;
}

/// K = X X^T / m for standardized markers X.
inline Kernel compute_gsm(const Eigen::MatrixXd& x_std, std::vector<std::string> sample_ids)
{
    if (x_std.cols() == 0)
    {
        throw Error("cannot build a GSM from zero markers");
    }
    if (static_cast<Index>(sample_ids.size()) != x_std.rows())
    {
        throw Error("sample identifiers do not match standardized marker rows");
    }
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(x_std.rows(), x_std.rows());
    k.selfadjointView<Eigen::Lower>().rankUpdate(x_std, 1.0 / static_cast<double>(x_std.cols()));
    detail::symmetrize_from_lower(k);
    return {std::move(k), std::move(sample_ids), KernelKind::additive};
}

/// Same result as compute_gsm(standardize_markers(raw)) without holding the
/// whole standardized matrix in memory.
inline Kernel gsm_from_markers(
    const MarkerMatrix& raw,
    std::vector<std::string>* dropped = nullptr,
    Index block_size = 2048)
{
    raw.validate();
    const Index n = raw.n_samples();
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd block(n, block_size);
    Index filled = 0;
    Index used = 0;

    auto flush = [&]
    {
        if (filled > 0)
        {
            k.selfadjointView<Eigen::Lower>().rankUpdate(block.leftCols(filled));
            filled = 0;
        }
    };

    for (Index j = 0; j < raw.n_markers(); ++j)
    {
        const auto m = detail::column_moments(raw, j);
        if (m.monomorphic)
        {
            if (dropped != nullptr)
            {
                dropped->push_back(raw.marker_ids[j]);
            }
            continue;
        }
        detail::standardize_column_into(raw, j, m, block.col(filled));
        ++filled;
        ++used;
        if (filled == block_size)
        {
            flush();
        }
    }
    flush();
    if (used == 0)
    {
        throw Error("no informative markers");
    }
    k /= static_cast<double>(used);
    detail::symmetrize_from_lower(k);
    return {std::move(k), raw.sample_ids, KernelKind::additive};
}

inline bool is_symmetric(const Eigen::MatrixXd& m, double rel_tol = 1e-12)
{
    if (m.rows() != m.cols())
    {
        return false;
    }
    const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

struct PsdReport
{
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
    bool psd = false;
};

/// Exact spectral PSD check: min eigenvalue >= -rel_tol * max eigenvalue.
inline PsdReport check_psd(const Eigen::MatrixXd& m, double rel_tol = 1e-8)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
    PsdReport r;
    r.min_eigenvalue = solver.eigenvalues().minCoeff();
    r.max_eigenvalue = solver.eigenvalues().maxCoeff();
    r.psd = r.min_eigenvalue >= -rel_tol * std::max(r.max_eigenvalue, 0.0);
    return r;
}

/// Fast PSD test: Cholesky of m + rel_tol * lambda_max * I succeeds iff
/// lambda_min > -rel_tol * lambda_max (up to rounding far below rel_tol).
/// lambda_max comes from power iteration.
inline bool is_psd(const Eigen::MatrixXd& m, double rel_tol = 1e-8)
{
    const Index n = m.rows();
    if (n == 0)
    {
        return true;
    }
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
    v(0) += 0.5;  // break symmetry with the centered-kernel null vector
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 200; ++it)
    {
        Eigen::VectorXd w = m.selfadjointView<Eigen::Lower>() * v;
        const double next = v.dot(w);
        const double norm = w.norm();
        if (norm == 0.0)
        {
            lambda = 0.0;
            break;
        }
        v = w / norm;
        if (it > 10 && std::abs(next - lambda) <= 1e-6 * std::abs(next))
        {
            lambda = next;
            break;
        }
        lambda = next;
    }
    // Power iteration converges to the largest |eigenvalue|; a dominant
    // negative eigenvalue already means "not PSD".
    if (lambda < 0.0)
    {
        return false;
    }
    if (lambda == 0.0)
    {
        return m.cwiseAbs().maxCoeff() == 0.0;
    }
    Eigen::MatrixXd shifted = m;
    shifted.diagonal().array() += rel_tol * lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    return llt.info() == Eigen::Success;
}

/// Throws unless the kernel is square, labeled, symmetric and PSD.
inline void validate_kernel(const Kernel& k)
{
    if (k.matrix.rows() != k.matrix.cols() || k.matrix.rows() == 0)
    {
        throw Error("kernel must be a non-empty square matrix");
    }
    if (static_cast<Index>(k.sample_ids.size()) != k.size())
    {
        throw Error("kernel sample identifiers do not match its dimension");
    }
    if (!k.matrix.allFinite())
    {
        throw Error("kernel contains non-finite entries");
    }
    if (!is_symmetric(k.matrix))
    {
        throw Error("kernel is not symmetric");
    }
    if (!is_psd(k.matrix))
    {
        throw Error("kernel is not positive semi-definite within tolerance");
    }
}

/// Repair by clipping negative eigenvalues to zero. Only applied on request.
inline Eigen::MatrixXd clip_to_psd(const Eigen::MatrixXd& m)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    const Eigen::VectorXd clipped = solver.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd out = solver.eigenvectors() * clipped.asDiagonal()
                          * solver.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

/// Entrywise square K∘K, the epistatic (additive-by-additive) kernel.
inline Kernel hadamard_square(const Kernel& k)
{
    if (!is_symmetric(k.matrix))
    {
        throw Error("hadamard_square requires a symmetric kernel");
    }
    Kernel out{k.matrix.cwiseProduct(k.matrix), k.sample_ids, KernelKind::epistatic};
    if (!is_psd(out.matrix))
    {
        throw Error("epistatic kernel failed the PSD check");
    }
    return out;
}

/// Z M Z^T under the genotype-major design: genotype block (i, j) is the
/// r x r constant block M(i, j).
inline Eigen::MatrixXd expand_replicates(const Eigen::MatrixXd& m, const ReplicateDesign& design)
{
    if (m.rows() != m.cols() || m.rows() != design.n_genotypes)
    {
        throw Error("expand_replicates: matrix size does not match design genotypes");
    }
    if (design.n_replicates < 1)
    {
        throw Error("expand_replicates: replicate count must be positive");
    }
    const Index r = design.n_replicates;
    if (r == 1)
    {
        return m;
    }
    const Index n = design.n_observations();
    Eigen::MatrixXd out(n, n);
    for (Index j = 0; j < design.n_genotypes; ++j)
    {
        for (Index i = 0; i < design.n_genotypes; ++i)
        {
            out.block(i * r, j * r, r, r).setConstant(m(i, j));
        }
    }
    return out;
}

}  // namespace pseudotrue
