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
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pseudotrue/gaussian.hpp"
#include "pseudotrue/kl_minimize.hpp"
#include "pseudotrue/parallel.hpp"
#include "pseudotrue/scenarios.hpp"
#include "pseudotrue/simplex.hpp"
#include "pseudotrue/simulate.hpp"
#include "pseudotrue/spectral.hpp"

namespace pseudotrue
{

enum class ScaleConstraint
{
    sum_to_one,
    free  // overall scale profiled out
};

struct FitResult
{
    std::vector<std::string> names;
    std::vector<double> theta_hat;
    double loglik = -std::numeric_limits<double>::infinity();
    std::optional<std::vector<double>> standard_errors;
    bool converged = false;
    bool on_boundary = false;
    int n_evaluations = 0;
    std::vector<std::string> notes;
};

/// F[i][j] = 1/2 tr(Sigma^-1 V_i Sigma^-1 V_j) at Sigma = Sigma(theta).
inline Eigen::MatrixXd fisher_information(const CovarianceSpec& model, std::span<const double> theta)
{
    if (theta.size() != model.size())
    {
        throw Error("fisher_information: theta length does not match the basis");
    }
    const std::size_t k = model.size();
    Eigen::MatrixXd f(k, k);

    if (spectral_layout(model))
    {
        const SpectralModel sm(model);
        const Eigen::ArrayXd p = sm.mean_spectrum(theta);
        const double e = sm.residual_weight(theta);
        if (!sm.positive_definite(p, e))
        {
            throw NotPositiveDefinite(0);
        }
        const auto cd = static_cast<double>(sm.contrast_dim());
        const Eigen::ArrayXd inv2 = p.square().inverse();
        for (std::size_t a = 0; a < k; ++a)
        {
            const Eigen::ArrayXd sa = sm.term_mean_spectrum(a);
            for (std::size_t b = 0; b <= a; ++b)
            {
                const Eigen::ArrayXd sb = sm.term_mean_spectrum(b);
                double v = (sa * sb * inv2).sum();
                if (cd > 0.0)
                {
                    v += cd * sm.term_contrast_value(a) * sm.term_contrast_value(b) / (e * e);
                }
                f(static_cast<Index>(a), static_cast<Index>(b)) = 0.5 * v;
                f(static_cast<Index>(b), static_cast<Index>(a)) = 0.5 * v;
            }
        }
        return f;
    }

    const auto llt = detail::try_llt(model.realize(theta));
    if (!llt)
    {
        throw NotPositiveDefinite(detail::first_bad_pivot(model.realize(theta)));
    }
    // A_i = L^-1 V_i L^-T is symmetric and tr(Sigma^-1 V_i Sigma^-1 V_j) = <A_i, A_j>.
    std::vector<Eigen::MatrixXd> whitened;
    whitened.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
    {
        const Eigen::MatrixXd half = llt->matrixL().solve(model.basis_matrix(i));
        const Eigen::MatrixXd half_t = half.transpose();
        whitened.push_back(llt->matrixL().solve(half_t));
    }
    for (std::size_t a = 0; a < k; ++a)
    {
        for (std::size_t b = 0; b <= a; ++b)
        {
            const double v = 0.5 * whitened[a].cwiseProduct(whitened[b]).sum();
            f(static_cast<Index>(a), static_cast<Index>(b)) = v;
            f(static_cast<Index>(b), static_cast<Index>(a)) = v;
        }
    }
    return f;
}

/// sqrt(diag(F^-1)), or nothing when F is numerically singular.
inline std::optional<std::vector<double>> standard_errors(const Eigen::MatrixXd& fisher)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(fisher);
    const auto& ev = solver.eigenvalues();
    if (ev.size() == 0 || !(ev.minCoeff() > 1e-12 * ev.cwiseAbs().maxCoeff()))
    {
        return std::nullopt;
    }
    const Eigen::MatrixXd inv = solver.eigenvectors() * ev.cwiseInverse().asDiagonal()
                                * solver.eigenvectors().transpose();
    std::vector<double> se(static_cast<std::size_t>(inv.rows()));
    for (Index i = 0; i < inv.rows(); ++i)
    {
        se[static_cast<std::size_t>(i)] = std::sqrt(inv(i, i));
    }
    return se;
}

/// A fitted family prepared once (eigendecomposition when the spec has
/// the spectral form) and reused across data vectors.
class LikelihoodModel
{
   public:
    explicit LikelihoodModel(const CovarianceSpec& model)
        : model_(std::make_shared<CovarianceSpec>(model))
    {
        bool has_residual = false;
        for (const auto& t : model.terms())
        {
            has_residual = has_residual || t.kind == TermKind::residual;
        }
        if (!has_residual)
        {
            throw Error("ML fitting needs an identity (residual) basis term");
        }
        if (spectral_layout(model))
        {
            spectral_ = std::make_shared<SpectralModel>(model);
        }
        find_aliasing();
    }

    const CovarianceSpec& spec() const { return *model_; }
    bool spectral() const { return spectral_ != nullptr; }
    const std::vector<std::string>& aliasing_notes() const { return aliasing_; }

    /// Data vector in whatever form the evaluation path needs.
    struct Data
    {
        Eigen::VectorXd y;
        RotatedData rotated;
    };

    Data prepare(const Eigen::VectorXd& y) const
    {
        if (y.size() != model_->dim())
        {
            throw Error("data vector length does not match the model dimension");
        }
        if (!y.allFinite())
        {
            throw Error("data vector contains non-finite values");
        }
        if (y.squaredNorm() == 0.0)
        {
            throw Error("degenerate data");
        }
        Data d;
        if (spectral_)
        {
            d.rotated = spectral_->rotate(y);
        }
        else
        {
            d.y = y;
        }
        return d;
    }

    /// log det Sigma(w) and y^T Sigma(w)^-1 y; nullopt if not PD.
    struct Terms
    {
        double log_det = 0.0;
        double quad = 0.0;
    };

    std::optional<Terms> terms(const Data& data, std::span<const double> w) const
    {
        if (spectral_)
        {
            const Eigen::ArrayXd p = spectral_->mean_spectrum(w);
            const double e = spectral_->residual_weight(w);
            if (!spectral_->positive_definite(p, e))
            {
                return std::nullopt;
            }
            Terms t;
            t.log_det = p.log().sum();
            t.quad = (data.rotated.mean_coords.array().square() / p).sum();
            const auto cd = static_cast<double>(spectral_->contrast_dim());
            if (cd > 0.0)
            {
                t.log_det += cd * std::log(e);
                t.quad += data.rotated.contrast_ss / e;
            }
            return t;
        }
        const auto llt = detail::try_llt(model_->realize(w));
        if (!llt)
        {
            return std::nullopt;
        }
        return Terms{detail::log_det(*llt), llt->matrixL().solve(data.y).squaredNorm()};
    }

    /// Log-likelihood at absolute weights w (-inf if not PD).
    double loglik(const Data& data, std::span<const double> w) const
    {
        const auto t = terms(data, w);
        if (!t)
        {
            return -std::numeric_limits<double>::infinity();
        }
        const auto d = static_cast<double>(model_->dim());
        return -0.5 * (d * std::log(2.0 * std::numbers::pi) + t->log_det + t->quad);
    }

    /// Log-likelihood with the scale profiled out, for mixing proportions
    /// phi on the simplex. Also returns the profiled scale.
    double profiled_loglik(const Data& data, std::span<const double> phi, double* scale = nullptr)
        const
    {
        const auto t = terms(data, phi);
        if (!t)
        {
            return -std::numeric_limits<double>::infinity();
        }
        const auto d = static_cast<double>(model_->dim());
        const double s2 = t->quad / d;
        if (scale != nullptr)
        {
            *scale = s2;
        }
        return -0.5 * (d * std::log(2.0 * std::numbers::pi) + d * std::log(s2) + t->log_det + d);
    }

    Eigen::MatrixXd fisher(std::span<const double> theta) const
    {
        return fisher_information(*model_, theta);
    }

   private:
    // A kernel term proportional to the identity is aliased with the
    // residual: the likelihood is flat along a simplex line.
    void find_aliasing()
    {
        for (const auto& t : model_->terms())
        {
            if (t.kind == TermKind::residual)
            {
                continue;
            }
            bool aliased = t.kind == TermKind::genotype && model_->design().n_replicates == 1;
            if (t.kind == TermKind::kernel)
            {
                const auto& m = t.genotype_matrix;
                const double d0 = m(0, 0);
                Eigen::MatrixXd off = m;
                off.diagonal().setZero();
                const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
                aliased = off.cwiseAbs().maxCoeff() <= 1e-10 * scale
                          && (m.diagonal().array() - d0).abs().maxCoeff() <= 1e-10 * scale;
                if (aliased && model_->design().n_replicates > 1)
                {
                    // Z (c I) Z^T is only aliased with another ZZ^T term.
                    aliased = false;
                    for (const auto& u : model_->terms())
                    {
                        aliased = aliased || u.kind == TermKind::genotype;
                    }
                }
            }
            if (aliased)
            {
                aliasing_.push_back(
                    "non-identifiable: basis term '" + t.name
                    + "' is proportional to another basis term");
            }
        }
    }

    std::shared_ptr<const CovarianceSpec> model_;
    std::shared_ptr<const SpectralModel> spectral_;
    std::vector<std::string> aliasing_;
};

struct FitOptions
{
    bool compute_standard_errors = true;
    int coarse_steps = 100;
    double golden_tolerance = 1e-8;
};

namespace detail
{

// Golden-section maximization of f on [lo, hi].
template <typename F>
double golden_section_max(F&& f, double lo, double hi, double tol, int& evaluations, bool& converged)
{
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo;
    double b = hi;
    double c = b - ratio * (b - a);
    double d = a + ratio * (b - a);
    double fc = f(c);
    double fd = f(d);
    evaluations += 2;
    for (int it = 0; it < 200 && (b - a) > tol; ++it)
    {
        if (fc >= fd)
        {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        }
        else
        {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
        ++evaluations;
    }
    converged = (b - a) <= tol;
    return fc >= fd ? c : d;
}

}  // namespace detail

/// Maximum-likelihood variance components.
///
/// Two components: a coarse scan over the mixing proportion h followed by
/// golden-section search to 1e-8 on h. More components: a 0.01 simplex grid
/// followed by Nelder-Mead. Under ScaleConstraint::free the search runs on
/// mixing proportions with the scale profiled out, and theta_hat is the
/// scaled result.
inline FitResult fit_ml(
    const Eigen::VectorXd& y,
    const LikelihoodModel& model,
    ScaleConstraint constraint = ScaleConstraint::sum_to_one,
    const FitOptions& options = {})
{
    const auto data = model.prepare(y);
    const auto& spec = model.spec();
    const std::size_t k = spec.size();

    FitResult result;
    result.names = spec.names();
    result.notes = model.aliasing_notes();

    auto objective = [&](std::span<const double> phi)
    {
        ++result.n_evaluations;
        return constraint == ScaleConstraint::free ? model.profiled_loglik(data, phi)
                                                   : model.loglik(data, phi);
    };

    std::vector<double> best_phi;
    double best = -std::numeric_limits<double>::infinity();
    auto consider = [&](const std::vector<double>& phi, double value)
    {
        if (value > best)
        {
            best = value;
            best_phi = phi;
        }
    };

    const SimplexGrid coarse{options.coarse_steps, static_cast<int>(k)};
    if (k == 1)
    {
        consider({1.0}, objective(std::vector<double>{1.0}));
        result.converged = std::isfinite(best);
    }
    else if (k == 2)
    {
        auto at = [&](double h)
        {
            const std::vector<double> phi{h, 1.0 - h};
            const double v = objective(phi);
            consider(phi, v);
            return v;
        };
        double h0 = 0.0;
        double f0 = -std::numeric_limits<double>::infinity();
        for (int t = 0; t <= coarse.steps; ++t)
        {
            const double h = static_cast<double>(t) / coarse.steps;
            const double v = at(h);
            if (v > f0)
            {
                f0 = v;
                h0 = h;
            }
        }
        if (std::isfinite(f0))
        {
            const double lo = std::max(0.0, h0 - coarse.step());
            const double hi = std::min(1.0, h0 + coarse.step());
            int evals = 0;
            bool converged = false;
            const double h = detail::golden_section_max(at, lo, hi, options.golden_tolerance, evals, converged);
            at(h);
            result.converged = converged;
        }
    }
    else
    {
        for (const auto& ticks : enumerate_grid(coarse))
        {
            const auto phi = coarse.weights(ticks);
            consider(phi, objective(phi));
        }
        if (std::isfinite(best))
        {
            auto negated = [&](std::span<const double> phi)
            {
                const double v = objective(phi);
                return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
            };
            const auto start = best_phi;
            const auto search = minimize_on_simplex(negated, start);
            consider(search.point, -search.value);
            result.converged = search.converged;
        }
    }

    if (!std::isfinite(best))
    {
        throw Error("covariance is not positive definite at any candidate");
    }
    if (!result.notes.empty())
    {
        result.converged = false;
    }

    result.theta_hat = best_phi;
    if (constraint == ScaleConstraint::free)
    {
        double scale = 1.0;
        model.profiled_loglik(data, best_phi, &scale);
        for (auto& v : result.theta_hat)
        {
            v *= scale;
        }
    }
    result.loglik = constraint == ScaleConstraint::free ? best : model.loglik(data, result.theta_hat);
    const double total = std::accumulate(result.theta_hat.begin(), result.theta_hat.end(), 0.0);
    for (double v : result.theta_hat)
    {
        result.on_boundary = result.on_boundary || v <= 1e-8 * total;
    }
    if (options.compute_standard_errors)
    {
        try
        {
            result.standard_errors = standard_errors(model.fisher(result.theta_hat));
        }
        catch (const NotPositiveDefinite&)
        {
            result.standard_errors.reset();
        }
    }
    return result;
}

inline FitResult fit_ml(
    const Eigen::VectorXd& y,
    const CovarianceSpec& model,
    ScaleConstraint constraint = ScaleConstraint::sum_to_one,
    const FitOptions& options = {})
{
    return fit_ml(y, LikelihoodModel(model), constraint, options);
}

struct McStudyOptions
{
    TruthWeights weights{};
    std::optional<Model> model;  // defaults to the paired model
    bool allow_unpaired = false;
    int grid_steps = 100;
    unsigned threads = 0;
};

struct McStudyResult
{
    std::vector<std::string> names;
    Eigen::MatrixXd estimates;  // successful replicates x k
    std::vector<double> mean_estimate;
    std::vector<double> theta_tilde;
    std::vector<double> bias;
    double kl_min = 0.0;
    Index n_failed = 0;
    std::vector<Index> failed_replicates;
};

/// Simulates traits from the scenario truth, fits the paired model to each
/// by ML (sum-to-one) and compares the mean estimate with the pseudo-true
/// grid point. Replicate i uses Philox stream i of `seed`.
inline McStudyResult mc_study(
    Scenario scenario,
    const Kernel& k,
    const ReplicateDesign& design,
    Index n_reps,
    std::uint64_t seed,
    const McStudyOptions& options = {})
{
    if (n_reps < 1)
    {
        throw Error("mc_study needs at least one replicate");
    }
    const Model model_id = options.model.value_or(paired_model(scenario));
    check_pairing(scenario, model_id, options.allow_unpaired);
    const auto truth = build_truth(scenario, k, design, options.weights);
    const auto model = build_model(model_id, k, design);
    const LikelihoodModel prepared(model);

    KlScanOptions scan_options;
    scan_options.threads = options.threads;
    const auto scan = minimize_kl(
        truth, model, SimplexGrid{options.grid_steps, static_cast<int>(model.size())}, scan_options);

    const Eigen::MatrixXd traits = simulate_phenotypes(truth.covariance(), n_reps, seed);
    const std::size_t kdim = model.size();
    Eigen::MatrixXd all(n_reps, static_cast<Index>(kdim));
    std::vector<char> ok(static_cast<std::size_t>(n_reps), 0);
    FitOptions fit_options;
    fit_options.compute_standard_errors = false;
    parallel_for(
        static_cast<std::size_t>(n_reps),
        [&](std::size_t rep)
        {
            try
            {
                const auto fit = fit_ml(
                    traits.row(static_cast<Index>(rep)).transpose(), prepared,
                    ScaleConstraint::sum_to_one, fit_options);
                for (std::size_t c = 0; c < kdim; ++c)
                {
                    all(static_cast<Index>(rep), static_cast<Index>(c)) = fit.theta_hat[c];
                }
                ok[rep] = 1;
            }
            catch (const Error&)
            {
                ok[rep] = 0;
            }
        },
        options.threads == 0 ? thread_count() : options.threads);

    McStudyResult result;
    result.names = model.names();
    result.theta_tilde = scan.theta_tilde;
    result.kl_min = scan.kl_min;
    std::vector<Index> rows;
    for (Index i = 0; i < n_reps; ++i)
    {
        if (ok[static_cast<std::size_t>(i)] != 0)
        {
            rows.push_back(i);
        }
        else
        {
            result.failed_replicates.push_back(i);
        }
    }
    result.n_failed = static_cast<Index>(result.failed_replicates.size());
    if (static_cast<double>(result.n_failed) > 0.1 * static_cast<double>(n_reps) || rows.empty())
    {
        throw Error(
            "mc_study aborted: " + std::to_string(result.n_failed) + " of "
            + std::to_string(n_reps) + " replicate fits failed");
    }
    result.estimates.resize(static_cast<Index>(rows.size()), static_cast<Index>(kdim));
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        result.estimates.row(static_cast<Index>(i)) = all.row(rows[i]);
    }
    const Eigen::VectorXd mean = result.estimates.colwise().mean();
    for (std::size_t c = 0; c < kdim; ++c)
    {
        result.mean_estimate.push_back(mean(static_cast<Index>(c)));
        result.bias.push_back(mean(static_cast<Index>(c)) - result.theta_tilde[c]);
    }
    return result;
}

}  // namespace pseudotrue
