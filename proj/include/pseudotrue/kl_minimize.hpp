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
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pseudotrue/gaussian.hpp"
#include "pseudotrue/parallel.hpp"
#include "pseudotrue/scenarios.hpp"
#include "pseudotrue/simplex.hpp"
#include "pseudotrue/spectral.hpp"

namespace pseudotrue
{

/// How KL(Q, P_theta) is evaluated for each theta.
enum class KlPath
{
    spectral,  // shared eigenbasis, O(n) per point
    balanced,  // genotype-level Cholesky + closed-form contrast term
    dense      // N x N Cholesky
};

inline const char* to_string(KlPath p)
{
    switch (p)
    {
        case KlPath::spectral:
            return "spectral";
        case KlPath::balanced:
            return "balanced";
        case KlPath::dense:
            return "dense";
    }
    return "dense";
}

/// theta -> KL(truth || model(theta)). Returns +inf where Sigma(theta) is
/// not positive definite, so scans can skip those points.
class KlObjective
{
   public:
    KlObjective(
        const CovarianceSpec& truth,
        const CovarianceSpec& model,
        std::optional<KlPath> force = std::nullopt)
        : model_(std::make_shared<CovarianceSpec>(model))
    {
        if (!truth.weights())
        {
            throw Error("truth covariance has no weights set");
        }
        if (truth.dim() != model.dim())
        {
            throw Error(
                "truth dimension " + std::to_string(truth.dim())
                + " does not match model dimension " + std::to_string(model.dim()));
        }
        const bool same_design = truth.design() == model.design();
        if (force)
        {
            path_ = *force;
        }
        else if (spectral_layout(model))
        {
            path_ = KlPath::spectral;
        }
        else
        {
            path_ = same_design ? KlPath::balanced : KlPath::dense;
        }
        if (path_ == KlPath::balanced && !same_design)
        {
            throw Error("balanced KL path needs truth and model on the same design");
        }

        const auto& tw = *truth.weights();
        switch (path_)
        {
            case KlPath::spectral:
            {
                spectral_ = std::make_shared<SpectralModel>(model);
                const auto m = spectral_->truth_moments(truth);
                projected_ = m.projected;
                log_det_q_ = m.log_det;
                const auto cd = static_cast<double>(spectral_->contrast_dim());
                contrast_trace_ = same_design ? cd * truth.residual_part(tw)
                                              : m.trace - m.projected.sum();
                break;
            }
            case KlPath::balanced:
            {
                truth_residual_ = truth.residual_part(tw);
                Eigen::MatrixXd means = static_cast<double>(model.design().n_replicates)
                                        * truth.genotype_part(tw);
                means.diagonal().array() += truth_residual_;
                auto f = chol_logdet(means);
                truth_lower_ = std::move(f.lower);
                log_det_q_ = f.log_det;
                if (model.design().n_replicates > 1 && !(truth_residual_ > 0.0))
                {
                    throw Error("truth covariance is singular on the replicate contrasts");
                }
                break;
            }
            case KlPath::dense:
            {
                auto f = chol_logdet(truth.realize(tw));
                truth_lower_ = std::move(f.lower);
                log_det_q_ = f.log_det;
                break;
            }
        }
    }

    KlPath path() const { return path_; }
    const CovarianceSpec& model() const { return *model_; }

    double operator()(std::span<const double> w) const
    {
        constexpr double inf = std::numeric_limits<double>::infinity();
        switch (path_)
        {
            case KlPath::spectral:
            {
                const Eigen::ArrayXd p = spectral_->mean_spectrum(w);
                const double e = spectral_->residual_weight(w);
                if (!spectral_->positive_definite(p, e))
                {
                    return inf;
                }
                const auto cd = static_cast<double>(spectral_->contrast_dim());
                const double big_n = static_cast<double>(p.size()) + cd;
                double sum = (projected_ / p).sum() + p.log().sum() - big_n - log_det_q_;
                if (cd > 0.0)
                {
                    sum += contrast_trace_ / e + cd * std::log(e);
                }
                return 0.5 * sum;
            }
            case KlPath::balanced:
            {
                const auto& design = model_->design();
                const Index r = design.n_replicates;
                const double cp = model_->residual_part(w);
                if (r > 1 && !(cp > 0.0))
                {
                    return inf;
                }
                Eigen::MatrixXd means = static_cast<double>(r) * model_->genotype_part(w);
                means.diagonal().array() += cp;
                const auto llt = detail::try_llt(means);
                if (!llt)
                {
                    return inf;
                }
                double kl = detail::kl_from_factors(truth_lower_, log_det_q_, *llt);
                if (r > 1)
                {
                    const double cq = truth_residual_;
                    kl += 0.5 * static_cast<double>(design.n_genotypes * (r - 1))
                          * (cq / cp - 1.0 + std::log(cp / cq));
                }
                return kl;
            }
            case KlPath::dense:
            {
                const auto llt = detail::try_llt(model_->realize(w));
                if (!llt)
                {
                    return inf;
                }
                return detail::kl_from_factors(truth_lower_, log_det_q_, *llt);
            }
        }
        return inf;
    }

   private:
    std::shared_ptr<const CovarianceSpec> model_;
    KlPath path_ = KlPath::dense;

    std::shared_ptr<const SpectralModel> spectral_;
    Eigen::ArrayXd projected_;
    double contrast_trace_ = 0.0;

    Eigen::MatrixXd truth_lower_;
    double truth_residual_ = 0.0;
    double log_det_q_ = 0.0;
};

struct KlCurvePoint
{
    Ticks ticks;
    double kl = 0.0;  // +inf for skipped points
};

struct KlScanResult
{
    std::vector<std::string> names;
    int steps = 100;
    Ticks ticks;
    std::vector<double> theta_tilde;
    double kl_min = 0.0;
    /// Other grid points whose KL is within 1e-10 of kl_min.
    std::vector<Ticks> ties;
    std::size_t skipped_points = 0;
    std::size_t evaluated_points = 0;
    KlPath path = KlPath::dense;
    std::optional<std::vector<KlCurvePoint>> curve;
};

struct KlScanOptions
{
    bool keep_curve = false;
    unsigned threads = 0;  // 0 = PSEUDOTRUE_THREADS / hardware
    std::optional<KlPath> force_path;
    double tie_tolerance = 1e-10;
};

namespace detail
{

// Exact-tie order: smaller ticks on the leading components win
// (sigma_A2 first, then sigma_G2).
inline bool tie_precedes(const Ticks& a, const Ticks& b)
{
    for (std::size_t i = 0; i + 1 < a.size(); ++i)
    {
        if (a[i] != b[i])
        {
            return a[i] < b[i];
        }
    }
    return false;
}

}  // namespace detail

/// Evaluates KL on every grid point and returns the minimizer. The reduction
/// is by value, then tick order, so the result does not depend on threads.
inline KlScanResult minimize_kl(
    const KlObjective& objective,
    const SimplexGrid& grid,
    const KlScanOptions& options = {})
{
    const auto& model = objective.model();
    if (static_cast<int>(model.size()) != grid.components)
    {
        throw Error(
            "model has " + std::to_string(model.size()) + " components but the grid has "
            + std::to_string(grid.components));
    }
    const auto points = enumerate_grid(grid);
    std::vector<double> values(points.size());
    parallel_for(
        points.size(),
        [&](std::size_t i)
        {
            const auto w = grid.weights(points[i]);
            values[i] = objective(w);
        },
        options.threads == 0 ? thread_count() : options.threads);

    KlScanResult result;
    result.names = model.names();
    result.steps = grid.steps;
    result.path = objective.path();
    std::ptrdiff_t best = -1;
    for (std::size_t i = 0; i < points.size(); ++i)
    {
        if (!std::isfinite(values[i]))
        {
            ++result.skipped_points;
            continue;
        }
        ++result.evaluated_points;
        if (best < 0 || values[i] < values[static_cast<std::size_t>(best)]
            || (values[i] == values[static_cast<std::size_t>(best)]
                && detail::tie_precedes(points[i], points[static_cast<std::size_t>(best)])))
        {
            best = static_cast<std::ptrdiff_t>(i);
        }
    }
    if (best < 0)
    {
        throw Error("model degenerate on grid");
    }
    const auto b = static_cast<std::size_t>(best);
    result.ticks = points[b];
    result.theta_tilde = grid.weights(points[b]);
    result.kl_min = values[b];
    for (std::size_t i = 0; i < points.size(); ++i)
    {
        if (i != b && std::isfinite(values[i])
            && values[i] <= result.kl_min + options.tie_tolerance)
        {
            result.ties.push_back(points[i]);
        }
    }
    if (options.keep_curve)
    {
        result.curve.emplace();
        result.curve->reserve(points.size());
        for (std::size_t i = 0; i < points.size(); ++i)
        {
            result.curve->push_back({points[i], values[i]});
        }
    }
    return result;
}

inline KlScanResult minimize_kl(
    const CovarianceSpec& truth,
    const CovarianceSpec& model,
    const SimplexGrid& grid,
    const KlScanOptions& options = {})
{
    return minimize_kl(KlObjective(truth, model, options.force_path), grid, options);
}

inline KlScanResult minimize_kl(
    const Covariance& truth,
    const CovarianceSpec& model,
    const SimplexGrid& grid,
    const KlScanOptions& options = {})
{
    return minimize_kl(CovarianceSpec::dense(truth.matrix, truth.label), model, grid, options);
}

/// Derivative-free descent from a feasible start, staying on the simplex.
/// The returned point never has larger KL than `start`.
inline std::vector<double> refine_local(
    const KlObjective& objective,
    const std::vector<double>& start,
    const SimplexSearchOptions& options = {})
{
    objective.model().check_weights(start);
    if (!std::isfinite(objective(start)))
    {
        throw Error("refine_local: start point is not positive definite");
    }
    auto result = minimize_on_simplex(objective, start, options);
    if (!(result.value <= objective(start)))
    {
        return start;
    }
    return result.point;
}

inline std::vector<double> refine_local(
    const CovarianceSpec& truth,
    const CovarianceSpec& model,
    const std::vector<double>& start,
    const SimplexSearchOptions& options = {})
{
    return refine_local(KlObjective(truth, model), start, options);
}

}  // namespace pseudotrue
