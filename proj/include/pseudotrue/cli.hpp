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

// Subcommands: gsm, simulate-markers, simulate-pheno, kl-scan, fit, fisher,
// mc-study, experiment. Exit codes: 0 success, 1 usage error, 2 computation
// error. Diagnostics go to `err`; data goes to files or `out`.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pseudotrue/experiment.hpp"
#include "pseudotrue/io.hpp"
#include "pseudotrue/kernel.hpp"
#include "pseudotrue/kl_minimize.hpp"
#include "pseudotrue/mlfit.hpp"
#include "pseudotrue/scenarios.hpp"
#include "pseudotrue/simulate.hpp"

namespace pseudotrue::cli
{

namespace detail
{

using nlohmann::json;

inline json rounded(const std::vector<double>& v)
{
    json out = json::array();
    for (double x : v)
    {
        out.push_back(io::round12(x));
    }
    return out;
}

inline json rounded(const Eigen::MatrixXd& m)
{
    json out = json::array();
    for (Index i = 0; i < m.rows(); ++i)
    {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j)
        {
            row.push_back(io::round12(m(i, j)));
        }
        out.push_back(row);
    }
    return out;
}

inline std::vector<double> parse_vector(const std::string& s)
{
    std::vector<double> out;
    for (const auto& item : ::pseudotrue::detail::split_list(s))
    {
        out.push_back(::pseudotrue::detail::to_double(item, "vector"));
    }
    return out;
}

inline Kernel load_kernel(const std::string& path)
{
    auto k = io::read_kernel(path);
    validate_kernel(k);
    return k;
}

inline json fit_to_json(const FitResult& fit)
{
    json j = {
        {"components", fit.names},
        {"theta_hat", rounded(fit.theta_hat)},
        {"loglik", io::round12(fit.loglik)},
        {"converged", fit.converged},
        {"on_boundary", fit.on_boundary},
        {"n_evaluations", fit.n_evaluations},
        {"notes", fit.notes}};
    j["standard_errors"] = fit.standard_errors ? rounded(*fit.standard_errors) : json(nullptr);
    return j;
}

struct Streams
{
    std::ostream& out;
    std::ostream& err;
};

}  // namespace detail

/// Runs one CLI invocation and returns its exit code.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    using detail::json;
    CLI::App app{"Pseudo-true variance components under misspecified mixed models", "pseudotrue"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // gsm
    std::string markers_path;
    std::string out_path;
    bool epistatic = false;
    bool clip = false;
    auto* gsm = app.add_subcommand("gsm", "Build the additive GSM from a marker CSV");
    gsm->add_option("--markers", markers_path, "Marker CSV")->required();
    gsm->add_option("--out", out_path, "Kernel TSV to write")->required();
    gsm->add_flag("--epistatic", epistatic, "Write K∘K instead of K");
    gsm->add_flag("--clip-psd", clip, "Clip negative eigenvalues to zero");

    // simulate-markers
    Index sim_n = 3000;
    Index sim_m = 20000;
    std::string structure = "unrelated";
    int subpops = 3;
    double fst = 0.1;
    std::string maf = "0.1,0.5";
    std::string ancestral = "0.05,0.95";
    std::uint64_t seed = 1;
    auto* simm = app.add_subcommand("simulate-markers", "Simulate a marker panel");
    simm->add_option("--n", sim_n, "Samples")->check(CLI::PositiveNumber);
    simm->add_option("--m", sim_m, "Markers")->check(CLI::PositiveNumber);
    simm->add_option("--structure", structure, "unrelated | bn")->check(CLI::IsMember({"unrelated", "bn"}));
    simm->add_option("--subpops", subpops, "Balding-Nichols subpopulations");
    simm->add_option("--fst", fst, "Balding-Nichols F_ST");
    simm->add_option("--maf", maf, "Allele frequency range lo,hi (unrelated)");
    simm->add_option("--ancestral-maf", ancestral, "Ancestral frequency range lo,hi (bn)");
    simm->add_option("--seed", seed, "Seed");
    simm->add_option("--out", out_path, "Marker CSV to write")->required();

    // simulate-pheno
    std::string scenario_str;
    std::string kernel_path;
    Index replicates = 1;
    Index reps = 1;
    std::string weights_str = "0.4,0.2,0.4";
    auto* simp = app.add_subcommand("simulate-pheno", "Simulate traits from a scenario truth");
    simp->add_option("--scenario", scenario_str, "A | B | C")->required();
    simp->add_option("--kernel", kernel_path, "Kernel TSV")->required();
    simp->add_option("--replicates", replicates, "Replicates per genotype")->check(CLI::PositiveNumber);
    simp->add_option("--reps", reps, "Number of traits")->check(CLI::PositiveNumber);
    simp->add_option("--seed", seed, "Seed");
    simp->add_option("--weights", weights_str, "Truth weights wA,wNA,wE");
    simp->add_option("--out", out_path, "Phenotype TSV to write")->required();

    // kl-scan
    std::string truth_cov;
    int model_id = 0;
    double step = 0.01;
    std::string curve_path;
    bool allow_unpaired = false;
    bool refine = false;
    auto* scan = app.add_subcommand("kl-scan", "Grid search for the KL-minimizing (pseudo-true) weights");
    scan->add_option("--truth-cov", truth_cov, "Covariance TSV, or scenario A | B | C")->required();
    scan->add_option("--model", model_id, "Fitted model 1 | 2 | 3")->required();
    scan->add_option("--kernel", kernel_path, "Kernel TSV")->required();
    scan->add_option("--replicates", replicates, "Replicates per genotype")->check(CLI::PositiveNumber);
    scan->add_option("--step", step, "Grid step (1/s)");
    scan->add_option("--curve", curve_path, "Write every grid point's KL to this TSV");
    scan->add_option("--weights", weights_str, "Truth weights wA,wNA,wE for scenario truths");
    scan->add_flag("--allow-unpaired", allow_unpaired, "Allow a scenario with a non-paired model");
    scan->add_flag("--refine", refine, "Also report a local refinement below grid resolution");

    // fit
    std::string pheno_path;
    bool free_scale = false;
    auto* fit = app.add_subcommand("fit", "ML variance components for each trait in a phenotype TSV");
    fit->add_option("--pheno", pheno_path, "Phenotype TSV")->required();
    fit->add_option("--model", model_id, "Fitted model 1 | 2 | 3")->required();
    fit->add_option("--kernel", kernel_path, "Kernel TSV")->required();
    fit->add_option("--replicates", replicates, "Replicates per genotype")->check(CLI::PositiveNumber);
    fit->add_flag("--free-scale", free_scale, "Estimate the total variance as well");

    // fisher
    std::string theta_str;
    auto* fisher = app.add_subcommand("fisher", "Fisher information and asymptotic standard errors");
    fisher->add_option("--model", model_id, "Fitted model 1 | 2 | 3")->required();
    fisher->add_option("--kernel", kernel_path, "Kernel TSV")->required();
    fisher->add_option("--replicates", replicates, "Replicates per genotype")->check(CLI::PositiveNumber);
    fisher->add_option("--theta", theta_str, "Weights, one per model component")->required();

    // mc-study
    std::string tsv_path;
    auto* mc = app.add_subcommand("mc-study", "Monte-Carlo ML fits against the pseudo-true point");
    mc->add_option("--scenario", scenario_str, "A | B | C")->required();
    mc->add_option("--kernel", kernel_path, "Kernel TSV")->required();
    mc->add_option("--replicates", replicates, "Replicates per genotype")->check(CLI::PositiveNumber);
    mc->add_option("--reps", reps, "Simulated traits")->check(CLI::PositiveNumber);
    mc->add_option("--seed", seed, "Seed");
    mc->add_option("--weights", weights_str, "Truth weights wA,wNA,wE");
    mc->add_option("--out-tsv", tsv_path, "Per-replicate estimates TSV");

    // experiment
    std::string config_path;
    std::optional<double> step_override;
    std::optional<std::string> weights_override;
    auto* exp = app.add_subcommand("experiment", "Panel x scenario table of pseudo-true sigma_A2");
    exp->add_option("--config", config_path, "Experiment config")->required();
    exp->add_option("--out", out_path, "Report TSV (overrides config)");
    exp->add_option("--step", step_override, "Grid step (overrides config)");
    exp->add_option("--weights", weights_override, "Truth weights (overrides config)");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp&)
    {
        out << app.help();
        return 0;
    }
    catch (const CLI::CallForVersion&)
    {
        out << kVersion << '\n';
        return 0;
    }
    catch (const CLI::ParseError& e)
    {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try
    {
        if (gsm->parsed())
        {
            const auto markers = io::read_markers(markers_path);
            std::vector<std::string> dropped;
            auto k = gsm_from_markers(markers, &dropped);
            if (!dropped.empty())
            {
                err << "dropped " << dropped.size() << " monomorphic marker(s)\n";
            }
            if (epistatic)
            {
                k = hadamard_square(k);
            }
            if (clip)
            {
                k.matrix = clip_to_psd(k.matrix);
            }
            io::write_kernel(out_path, k);
            return 0;
        }
        if (simm->parsed())
        {
            PopulationConfig config;
            config.n_samples = sim_n;
            config.n_markers = sim_m;
            config.seed = seed;
            config.maf_range = ::pseudotrue::detail::to_interval(maf, "--maf");
            if (structure == "bn")
            {
                config.structure = BaldingNichols{
                    subpops, fst, ::pseudotrue::detail::to_interval(ancestral, "--ancestral-maf")};
            }
            io::write_markers(out_path, simulate_markers(config));
            return 0;
        }
        if (simp->parsed())
        {
            const auto scenario = scenario_from_string(scenario_str);
            const auto k = detail::load_kernel(kernel_path);
            const auto design = effective_design(scenario, ReplicateDesign{k.size(), replicates});
            const auto truth = build_truth(scenario, k, design, parse_weights(weights_str));
            io::PhenotypeTable table{
                observation_ids(k.sample_ids, design.n_replicates),
                simulate_phenotypes(truth.covariance(), reps, seed)};
            io::write_phenotypes(out_path, table);
            return 0;
        }
        if (scan->parsed())
        {
            const auto model = model_from_int(model_id);
            const auto k = detail::load_kernel(kernel_path);
            const ReplicateDesign design{k.size(), replicates};
            const auto model_spec = build_model(model, k, design);
            std::optional<CovarianceSpec> truth;
            if (truth_cov == "A" || truth_cov == "B" || truth_cov == "C")
            {
                const auto scenario = scenario_from_string(truth_cov);
                check_pairing(scenario, model, allow_unpaired);
                truth = build_truth(scenario, k, design, parse_weights(weights_str));
            }
            else
            {
                const auto cov = io::read_kernel(truth_cov);
                truth = CovarianceSpec::dense(cov.matrix, "truth");
            }
            const KlObjective objective(*truth, model_spec);
            KlScanOptions options;
            options.keep_curve = !curve_path.empty();
            const auto grid = grid_from_step(step, static_cast<int>(model_spec.size()));
            const auto result = minimize_kl(objective, grid, options);
            json j = scan_to_json(result);
            j["model"] = model_id;
            if (refine)
            {
                const auto refined = refine_local(objective, result.theta_tilde);
                j["theta_refined"] = detail::rounded(refined);
                j["kl_refined"] = io::round12(objective(refined));
            }
            if (result.curve)
            {
                std::ofstream curve(curve_path);
                if (!curve)
                {
                    throw Error("cannot open '" + curve_path + "' for writing");
                }
                for (const auto& name : result.names)
                {
                    curve << name << '\t';
                }
                curve << "kl\n";
                for (const auto& p : *result.curve)
                {
                    for (int t : p.ticks)
                    {
                        curve << io::format_number(static_cast<double>(t) / grid.steps) << '\t';
                    }
                    curve << io::format_number(p.kl) << '\n';
                }
            }
            out << j.dump(2) << '\n';
            return 0;
        }
        if (fit->parsed())
        {
            const auto model = model_from_int(model_id);
            const auto k = detail::load_kernel(kernel_path);
            const auto model_spec = build_model(model, k, ReplicateDesign{k.size(), replicates});
            const auto table = io::read_phenotypes(pheno_path);
            if (table.observation_ids
                != observation_ids(k.sample_ids, model_spec.design().n_replicates))
            {
                throw Error("phenotype columns do not match kernel ids x replicates");
            }
            const LikelihoodModel prepared(model_spec);
            json fits = json::array();
            for (Index i = 0; i < table.values.rows(); ++i)
            {
                fits.push_back(detail::fit_to_json(fit_ml(
                    table.values.row(i).transpose(), prepared,
                    free_scale ? ScaleConstraint::free : ScaleConstraint::sum_to_one)));
            }
            out << json{{"model", model_id}, {"constraint", free_scale ? "free" : "sum-to-one"}, {"fits", fits}}
                       .dump(2)
                << '\n';
            return 0;
        }
        if (fisher->parsed())
        {
            const auto model = model_from_int(model_id);
            const auto k = detail::load_kernel(kernel_path);
            const auto model_spec = build_model(model, k, ReplicateDesign{k.size(), replicates});
            const auto theta = detail::parse_vector(theta_str);
            if (theta.size() != model_spec.size())
            {
                throw UsageError(
                    "--theta needs " + std::to_string(model_spec.size()) + " values for model "
                    + std::to_string(model_id));
            }
            const auto f = fisher_information(model_spec, theta);
            const auto se = standard_errors(f);
            json j = {
                {"components", model_spec.names()},
                {"theta", detail::rounded(theta)},
                {"information", detail::rounded(f)}};
            j["standard_errors"] = se ? detail::rounded(*se) : json(nullptr);
            out << j.dump(2) << '\n';
            return 0;
        }
        if (mc->parsed())
        {
            const auto scenario = scenario_from_string(scenario_str);
            const auto k = detail::load_kernel(kernel_path);
            McStudyOptions options;
            options.weights = parse_weights(weights_str);
            const auto result = mc_study(scenario, k, ReplicateDesign{k.size(), replicates}, reps, seed, options);
            json j = {
                {"scenario", std::string(1, to_char(scenario))},
                {"components", result.names},
                {"n_reps", reps},
                {"seed", seed},
                {"n_failed", result.n_failed},
                {"theta_tilde", detail::rounded(result.theta_tilde)},
                {"kl_min", io::round12(result.kl_min)},
                {"mean_estimate", detail::rounded(result.mean_estimate)},
                {"bias", detail::rounded(result.bias)}};
            if (!tsv_path.empty())
            {
                std::ofstream tsv(tsv_path);
                if (!tsv)
                {
                    throw Error("cannot open '" + tsv_path + "' for writing");
                }
                for (std::size_t c = 0; c < result.names.size(); ++c)
                {
                    tsv << (c == 0 ? "" : "\t") << result.names[c];
                }
                tsv << '\n';
                for (Index i = 0; i < result.estimates.rows(); ++i)
                {
                    for (Index c = 0; c < result.estimates.cols(); ++c)
                    {
                        tsv << (c == 0 ? "" : "\t") << io::format_number(result.estimates(i, c));
                    }
                    tsv << '\n';
                }
            }
            out << j.dump(2) << '\n';
            return 0;
        }
        if (exp->parsed())
        {
            auto config = read_experiment_config(config_path);
            if (!out_path.empty())
            {
                config.out = out_path;
            }
            if (step_override)
            {
                config.grid_steps = grid_from_step(*step_override, 2).steps;
            }
            if (weights_override)
            {
                config.weights = parse_weights(*weights_override);
            }
            const auto report = run_experiment(config);
            write_report(report, config.out);
            write_report_tsv(out, report);
            for (const auto& row : report.rows)
            {
                for (const auto& cell : row.cells)
                {
                    if (!cell.error.empty())
                    {
                        err << row.label << '/' << to_char(cell.scenario) << ": " << cell.error << '\n';
                    }
                }
            }
            return 0;
        }
    }
    catch (const UsageError& e)
    {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

}  // namespace pseudotrue::cli
