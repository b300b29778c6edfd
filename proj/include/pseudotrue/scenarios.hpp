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
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pseudotrue/error.hpp"
#include "pseudotrue/gaussian.hpp"
#include "pseudotrue/kernel.hpp"

namespace pseudotrue
{

/// How a basis matrix acts on the observation vector.
enum class TermKind
{
    kernel,    // Z M Z^T for a genotype-level matrix M
    genotype,  // Z Z^T (i.i.d. genotype effects)
    residual   // I_N
};

struct BasisTerm
{
    std::string name;
    TermKind kind = TermKind::kernel;
    Eigen::MatrixXd genotype_matrix;  // only for TermKind::kernel
};

/// Ordered basis V_1..V_k over a replicate design, with optional weights.
/// Realizes Sigma(theta) = sum_i theta_i V_i.
class CovarianceSpec
{
   public:
    CovarianceSpec(ReplicateDesign design, std::vector<BasisTerm> terms)
        : design_(design), terms_(std::move(terms))
    {
        if (terms_.empty())
        {
            throw Error("covariance spec needs at least one basis term");
        }
        for (const auto& t : terms_)
        {
            if (t.kind != TermKind::kernel)
            {
                continue;
            }
            if (t.genotype_matrix.rows() != design_.n_genotypes
                || t.genotype_matrix.cols() != design_.n_genotypes)
            {
                throw Error("basis term '" + t.name + "' does not match the design size");
            }
            if (!is_symmetric(t.genotype_matrix))
            {
                throw Error("basis term '" + t.name + "' is not symmetric");
            }
        }
    }

    /// Single dense term with weight 1 (an arbitrary N x N covariance).
    static CovarianceSpec dense(const Eigen::MatrixXd& matrix, std::string name = "covariance")
    {
        CovarianceSpec spec(
            ReplicateDesign{matrix.rows(), 1},
            {BasisTerm{std::move(name), TermKind::kernel, matrix}});
        spec.set_weights({1.0});
        return spec;
    }

    const ReplicateDesign& design() const { return design_; }
    Index dim() const { return design_.n_observations(); }
    std::size_t size() const { return terms_.size(); }
    const BasisTerm& term(std::size_t i) const { return terms_.at(i); }
    const std::vector<BasisTerm>& terms() const { return terms_; }

    std::vector<std::string> names() const
    {
        std::vector<std::string> out;
        for (const auto& t : terms_)
        {
            out.push_back(t.name);
        }
        return out;
    }

    bool simplex_constrained() const { return simplex_constrained_; }
    void set_simplex_constrained(bool on) { simplex_constrained_ = on; }

    const std::optional<std::vector<double>>& weights() const { return weights_; }

    void set_weights(std::vector<double> w)
    {
        check_weights(w);
        weights_ = std::move(w);
    }

    void check_weights(std::span<const double> w) const
    {
        if (w.size() != terms_.size())
        {
            throw Error("weight vector length does not match the basis");
        }
        double sum = 0.0;
        for (double v : w)
        {
            if (!(v >= 0.0) || !std::isfinite(v))
            {
                throw Error("weights must be finite and nonnegative");
            }
            sum += v;
        }
        if (simplex_constrained_ && std::abs(sum - 1.0) > 1e-12)
        {
            throw Error("weights must sum to one");
        }
    }

    /// Genotype-level part sum over kernel/genotype terms of w_i M_i.
    Eigen::MatrixXd genotype_part(std::span<const double> w) const
    {
        const Index n = design_.n_genotypes;
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t i = 0; i < terms_.size(); ++i)
        {
            if (terms_[i].kind == TermKind::kernel)
            {
                m += w[i] * terms_[i].genotype_matrix;
            }
            else if (terms_[i].kind == TermKind::genotype)
            {
                m.diagonal().array() += w[i];
            }
        }
        return m;
    }

    double residual_part(std::span<const double> w) const
    {
        double c = 0.0;
        for (std::size_t i = 0; i < terms_.size(); ++i)
        {
            if (terms_[i].kind == TermKind::residual)
            {
                c += w[i];
            }
        }
        return c;
    }

    Eigen::MatrixXd basis_matrix(std::size_t i) const
    {
        const auto& t = terms_.at(i);
        switch (t.kind)
        {
            case TermKind::kernel:
                return expand_replicates(t.genotype_matrix, design_);
            case TermKind::genotype:
                return expand_replicates(
                    Eigen::MatrixXd::Identity(design_.n_genotypes, design_.n_genotypes),
                    design_);
            case TermKind::residual:
                return Eigen::MatrixXd::Identity(dim(), dim());
        }
        return {};
    }

    /// Dense N x N Sigma(w).
    Eigen::MatrixXd realize(std::span<const double> w) const
    {
        Eigen::MatrixXd s = expand_replicates(genotype_part(w), design_);
        s.diagonal().array() += residual_part(w);
        return s;
    }

    Covariance covariance() const
    {
        if (!weights_)
        {
            throw Error("covariance spec has no weights set");
        }
        return {realize(*weights_), label_};
    }

    const std::string& label() const { return label_; }
    void set_label(std::string label) { label_ = std::move(label); }

   private:
    ReplicateDesign design_;
    std::vector<BasisTerm> terms_;
    std::optional<std::vector<double>> weights_;
    bool simplex_constrained_ = true;
    std::string label_;
};

/// The fitted families: 1 = sigma_A2 K + sigma_E2 I_n,
/// 2 = sigma_A2 ZKZ' + sigma_E2 I_N, 3 = model 2 + sigma_G2 ZZ'.
enum class Model
{
    additive = 1,
    replicated = 2,
    replicated_genotypic = 3
};

enum class Scenario
{
    A,
    B,
    C
};

inline Model model_from_int(int m)
{
    if (m < 1 || m > 3)
    {
        throw UsageError("model must be 1, 2 or 3");
    }
    return static_cast<Model>(m);
}

inline Scenario scenario_from_string(const std::string& s)
{
    if (s == "A" || s == "a")
    {
        return Scenario::A;
    }
    if (s == "B" || s == "b")
    {
        return Scenario::B;
    }
    if (s == "C" || s == "c")
    {
        return Scenario::C;
    }
    throw UsageError("scenario must be A, B or C (got '" + s + "')");
}

inline char to_char(Scenario s)
{
    return "ABC"[static_cast<int>(s)];
}

inline Model paired_model(Scenario s)
{
    switch (s)
    {
        case Scenario::A:
            return Model::additive;
        case Scenario::B:
            return Model::replicated;
        case Scenario::C:
            return Model::replicated_genotypic;
    }
    return Model::additive;
}

/// Enforces A-1, B-2, C-3 unless explicitly relaxed.
inline void check_pairing(Scenario s, Model m, bool allow_unpaired = false)
{
    if (!allow_unpaired && paired_model(s) != m)
    {
        throw UsageError(
            std::string("scenario ") + to_char(s) + " is paired with model "
            + std::to_string(static_cast<int>(paired_model(s)))
            + "; pass the unpaired override to experiment");
    }
}

/// Model 1 and scenario A live at genotype level, so they ignore replication.
inline ReplicateDesign effective_design(Model m, const ReplicateDesign& design)
{
    return m == Model::additive ? ReplicateDesign{design.n_genotypes, 1} : design;
}

inline ReplicateDesign effective_design(Scenario s, const ReplicateDesign& design)
{
    return s == Scenario::A ? ReplicateDesign{design.n_genotypes, 1} : design;
}

inline CovarianceSpec build_model(Model model, const Kernel& k, const ReplicateDesign& design)
{
    if (design.n_genotypes != k.size())
    {
        throw Error("design genotype count does not match the kernel");
    }
    const auto d = effective_design(model, design);
    std::vector<BasisTerm> terms;
    terms.push_back({"sigma_A2", TermKind::kernel, k.matrix});
    if (model == Model::replicated_genotypic)
    {
        if (d.n_replicates == 1)
        {
            throw Error("sigma_G2 and sigma_E2 non-identifiable");
        }
        terms.push_back({"sigma_G2", TermKind::genotype, {}});
    }
    terms.push_back({"sigma_E2", TermKind::residual, {}});
    CovarianceSpec spec(d, std::move(terms));
    spec.set_label("model " + std::to_string(static_cast<int>(model)));
    return spec;
}

struct TruthWeights
{
    double additive = 0.4;
    double non_additive = 0.2;
    double residual = 0.4;
};

/// True covariance of a scenario, as a weighted CovarianceSpec:
///   A: w_a K + w_na (K∘K) + w_e I_n
///   B: w_a ZKZ' + w_na ZZ' + w_e I_N
///   C: w_a ZKZ' + w_na Z(K∘K)Z' + w_e I_N
inline CovarianceSpec build_truth(
    Scenario scenario,
    const Kernel& k,
    const ReplicateDesign& design,
    TruthWeights w = {})
{
    if (design.n_genotypes != k.size())
    {
        throw Error("design genotype count does not match the kernel");
    }
    const auto d = effective_design(scenario, design);
    std::vector<BasisTerm> terms;
    terms.push_back({"additive", TermKind::kernel, k.matrix});
    if (scenario == Scenario::B)
    {
        terms.push_back({"non_additive", TermKind::genotype, {}});
    }
    else
    {
        terms.push_back({"non_additive", TermKind::kernel, k.matrix.cwiseProduct(k.matrix)});
    }
    terms.push_back({"residual", TermKind::residual, {}});
    CovarianceSpec spec(d, std::move(terms));
    spec.set_weights({w.additive, w.non_additive, w.residual});
    spec.set_label(std::string("scenario ") + to_char(scenario));
    return spec;
}

}  // namespace pseudotrue
