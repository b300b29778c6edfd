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

// Shared eigenbasis for the families
//
//     Sigma(a, g, e) = Z (a K + g I_n) Z^T + e I_N
//
// With K = U diag(lambda) U^T, the orthonormal vectors w_i = Z u_i / sqrt(r)
// are eigenvectors of Sigma with eigenvalue r (a lambda_i + g) + e, and the
// n(r - 1)-dimensional complement of span(Z) has eigenvalue e. One O(n^3)
// decomposition therefore makes every later evaluation O(n).

#include <cmath>
#include <optional>
#include <span>

#include <Eigen/Dense>

#include "pseudotrue/scenarios.hpp"

namespace pseudotrue
{

/// Positions of the terms of a spectral-family spec (-1 = absent).
struct SpectralLayout
{
    int kernel = -1;
    int genotype = -1;
    int residual = -1;
};

/// Returns a layout iff the spec is exactly one kernel term, one residual
/// term and at most one genotype term.
inline std::optional<SpectralLayout> spectral_layout(const CovarianceSpec& spec)
{
    SpectralLayout layout;
    for (std::size_t i = 0; i < spec.size(); ++i)
    {
        int* slot = nullptr;
        switch (spec.term(i).kind)
        {
            case TermKind::kernel:
                slot = &layout.kernel;
                break;
            case TermKind::genotype:
                slot = &layout.genotype;
                break;
            case TermKind::residual:
                slot = &layout.residual;
                break;
        }
        if (*slot != -1)
        {
            return std::nullopt;
        }
        *slot = static_cast<int>(i);
    }
    if (layout.kernel < 0 || layout.residual < 0)
    {
        return std::nullopt;
    }
    return layout;
}

/// An observation vector expressed in the spectral basis.
struct RotatedData
{
    Eigen::VectorXd mean_coords;  // w_i^T y
    double contrast_ss = 0.0;     // squared norm of the projection off span(Z)
};

class SpectralModel
{
   public:
    explicit SpectralModel(const CovarianceSpec& spec) : design_(spec.design())
    {
        auto layout = spectral_layout(spec);
        if (!layout)
        {
            throw Error("covariance spec is not of the spectral form");
        }
        layout_ = *layout;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
            spec.term(static_cast<std::size_t>(layout_.kernel)).genotype_matrix);
        if (solver.info() != Eigen::Success)
        {
            throw Error("eigendecomposition of the kernel failed");
        }
        eigenvalues_ = solver.eigenvalues();
        eigenvectors_ = solver.eigenvectors();
        n_terms_ = spec.size();
    }

    const ReplicateDesign& design() const { return design_; }
    const SpectralLayout& layout() const { return layout_; }
    const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
    const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }
    std::size_t n_terms() const { return n_terms_; }

    Index contrast_dim() const
    {
        return design_.n_genotypes * (design_.n_replicates - 1);
    }

    double kernel_weight(std::span<const double> w) const
    {
        return w[static_cast<std::size_t>(layout_.kernel)];
    }

    double genotype_weight(std::span<const double> w) const
    {
        return layout_.genotype < 0 ? 0.0 : w[static_cast<std::size_t>(layout_.genotype)];
    }

    double residual_weight(std::span<const double> w) const
    {
        return w[static_cast<std::size_t>(layout_.residual)];
    }

    /// Eigenvalues of Sigma(w) on span(Z).
    Eigen::ArrayXd mean_spectrum(std::span<const double> w) const
    {
        const auto r = static_cast<double>(design_.n_replicates);
        return r * (kernel_weight(w) * eigenvalues_.array() + genotype_weight(w))
               + residual_weight(w);
    }

    /// Eigenvalue of every basis matrix V_term on span(Z), coordinate-wise.
    Eigen::ArrayXd term_mean_spectrum(std::size_t term) const
    {
        const auto r = static_cast<double>(design_.n_replicates);
        const auto n = eigenvalues_.size();
        if (static_cast<int>(term) == layout_.kernel)
        {
            return r * eigenvalues_.array();
        }
        if (static_cast<int>(term) == layout_.genotype)
        {
            return Eigen::ArrayXd::Constant(n, r);
        }
        return Eigen::ArrayXd::Ones(n);
    }

    /// Eigenvalue of V_term on the contrast space.
    double term_contrast_value(std::size_t term) const
    {
        return static_cast<int>(term) == layout_.residual ? 1.0 : 0.0;
    }

    /// Sigma(w) is numerically positive definite.
    bool positive_definite(const Eigen::ArrayXd& spectrum, double residual) const
    {
        const double top = std::max(spectrum.maxCoeff(), residual);
        const double bottom = contrast_dim() > 0 ? std::min(spectrum.minCoeff(), residual)
                                                 : spectrum.minCoeff();
        return top > 0.0 && bottom > 1e-12 * top;
    }

    /// Coordinates of Z^T y / sqrt(r) in the eigenbasis plus the contrast
    /// sum of squares.
    RotatedData rotate(const Eigen::VectorXd& y) const
    {
        if (y.size() != design_.n_observations())
        {
            throw Error("observation vector does not match the design");
        }
        const Index n = design_.n_genotypes;
        const Index r = design_.n_replicates;
        Eigen::VectorXd sums = Eigen::VectorXd::Zero(n);
        for (Index o = 0; o < y.size(); ++o)
        {
            sums(design_.genotype_of(o)) += y(o);
        }
        RotatedData out;
        out.mean_coords = eigenvectors_.transpose() * sums / std::sqrt(static_cast<double>(r));
        if (r > 1)
        {
            // Within-genotype sum of squares, computed directly to avoid
            // cancellation in ||y||^2 - ||mean coords||^2.
            double ss = 0.0;
            for (Index o = 0; o < y.size(); ++o)
            {
                const double d = y(o) - sums(design_.genotype_of(o)) / static_cast<double>(r);
                ss += d * d;
            }
            out.contrast_ss = ss;
        }
        return out;
    }

    /// diag(W^T Q W), tr(Q) and log det(Q) for a truth spec on the same
    /// design, without forming any N x N matrix.
    struct TruthMoments
    {
        Eigen::ArrayXd projected;
        double trace = 0.0;
        double log_det = 0.0;
    };

    TruthMoments truth_moments(const CovarianceSpec& truth) const
    {
        if (!truth.weights())
        {
            throw Error("truth covariance has no weights set");
        }
        const auto& w = *truth.weights();
        const Index big_n = design_.n_observations();
        const auto r = static_cast<double>(design_.n_replicates);
        TruthMoments m;
        if (truth.design() == design_)
        {
            const Eigen::MatrixXd mq = truth.genotype_part(w);
            const double cq = truth.residual_part(w);
            const Eigen::MatrixXd mu = mq * eigenvectors_;
            m.projected = r * (eigenvectors_.cwiseProduct(mu)).colwise().sum().transpose().array()
                          + cq;
            m.trace = r * mq.trace() + static_cast<double>(big_n) * cq;
            Eigen::MatrixXd means = r * mq;
            means.diagonal().array() += cq;
            m.log_det = chol_logdet(means).log_det;
            if (contrast_dim() > 0)
            {
                if (!(cq > 0.0))
                {
                    throw Error("truth covariance is singular on the replicate contrasts");
                }
                m.log_det += static_cast<double>(contrast_dim()) * std::log(cq);
            }
            return m;
        }
        const Eigen::MatrixXd q = truth.realize(w);
        if (q.rows() != big_n)
        {
            throw Error("truth covariance dimension does not match the model");
        }
        const Eigen::MatrixXd basis = expand_columns();
        const Eigen::MatrixXd qw = q * basis;
        m.projected = basis.cwiseProduct(qw).colwise().sum().transpose().array();
        m.trace = q.trace();
        m.log_det = chol_logdet(q).log_det;
        return m;
    }

   private:
    // W = Z U / sqrt(r), N x n.
    Eigen::MatrixXd expand_columns() const
    {
        const Index r = design_.n_replicates;
        Eigen::MatrixXd w(design_.n_observations(), design_.n_genotypes);
        const double scale = 1.0 / std::sqrt(static_cast<double>(r));
        for (Index o = 0; o < w.rows(); ++o)
        {
            w.row(o) = scale * eigenvectors_.row(design_.genotype_of(o));
        }
        return w;
    }

    ReplicateDesign design_;
    SpectralLayout layout_;
    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd eigenvectors_;
    std::size_t n_terms_ = 0;
};

}  // namespace pseudotrue
