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

// Experiment config: flat `key = value` lines, `#` starts a comment.
//
//   seed       = 1              default panel seed
//   step       = 0.01           grid step for every scan
//   weights    = 0.4,0.2,0.4    truth weights (additive, non-additive, residual)
//   replicates = 2              default replicates for scenarios B and C
//   scenarios  = A,B,C          default scenario list
//   out        = report.tsv     report path (JSON metadata goes to <out>.json)
//   panel      = <label> key=value ...   (repeatable)
//
// Panel keys: structure=unrelated|bn, n, m, subpops, fst, maf=lo,hi,
// ancestral-maf=lo,hi, seed, markers=<csv>, kernel=<tsv>, replicates,
// scenarios. Relative file paths resolve against the config's directory.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pseudotrue/io.hpp"
#include "pseudotrue/kernel.hpp"
#include "pseudotrue/kl_minimize.hpp"
#include "pseudotrue/scenarios.hpp"
#include "pseudotrue/simulate.hpp"

namespace pseudotrue
{

inline constexpr const char* kVersion = "1.0.0";

struct PanelSpec
{
    std::string label;
    std::optional<PopulationConfig> population;
    std::string markers_path;
    std::string kernel_path;
    Index replicates = 2;
    std::vector<Scenario> scenarios;
};

struct ExperimentConfig
{
    std::vector<PanelSpec> panels;
    std::vector<Scenario> scenarios{Scenario::A, Scenario::B, Scenario::C};
    int grid_steps = 100;
    TruthWeights weights{};
    Index replicates = 2;
    std::uint64_t seed = 1;
    std::string out = "report.tsv";
};

namespace detail
{

inline std::string trimmed(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
    {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',')
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
    {
        item = trimmed(item);
        if (!item.empty())
        {
            out.push_back(item);
        }
    }
    return out;
}

inline double to_double(const std::string& s, const std::string& key)
{
    try
    {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size())
        {
            throw std::invalid_argument(s);
        }
        return v;
    }
    catch (const std::exception&)
    {
        throw UsageError("invalid number '" + s + "' for " + key);
    }
}

inline long long to_int(const std::string& s, const std::string& key)
{
    const double v = to_double(s, key);
    if (v != std::floor(v))
    {
        throw UsageError("expected an integer for " + key + ", got '" + s + "'");
    }
    return static_cast<long long>(v);
}

inline Interval to_interval(const std::string& s, const std::string& key)
{
    const auto parts = split_list(s);
    if (parts.size() != 2)
    {
        throw UsageError(key + " must be lo,hi");
    }
    return {to_double(parts[0], key), to_double(parts[1], key)};
}

}  // namespace detail

inline std::vector<Scenario> parse_scenarios(const std::string& s)
{
    std::vector<Scenario> out;
    for (const auto& item : detail::split_list(s))
    {
        out.push_back(scenario_from_string(item));
    }
    return out;
}

inline TruthWeights parse_weights(const std::string& s)
{
    const auto parts = detail::split_list(s);
    if (parts.size() != 3)
    {
        throw UsageError("weights must be wA,wNA,wE");
    }
    TruthWeights w{
        detail::to_double(parts[0], "weights"),
        detail::to_double(parts[1], "weights"),
        detail::to_double(parts[2], "weights")};
    if (w.additive < 0 || w.non_additive < 0 || w.residual < 0
        || std::abs(w.additive + w.non_additive + w.residual - 1.0) > 1e-9)
    {
        throw UsageError("weights must be nonnegative and sum to one");
    }
    // Remove representation error so the spec's 1e-12 sum check holds.
    w.residual = 1.0 - w.additive - w.non_additive;
    return w;
}

inline PanelSpec parse_panel(const std::string& value, const ExperimentConfig& defaults, const std::filesystem::path& base)
{
    const auto tokens = detail::split_list(value, ' ');
    if (tokens.empty())
    {
        throw UsageError("panel needs a label");
    }
    PanelSpec p;
    p.label = tokens[0];
    p.replicates = defaults.replicates;
    std::map<std::string, std::string> kv;
    for (std::size_t i = 1; i < tokens.size(); ++i)
    {
        const auto eq = tokens[i].find('=');
        if (eq == std::string::npos)
        {
            throw UsageError("panel '" + p.label + "': expected key=value, got '" + tokens[i] + "'");
        }
        kv[tokens[i].substr(0, eq)] = tokens[i].substr(eq + 1);
    }
    auto resolve = [&](const std::string& path)
    {
        const std::filesystem::path fp(path);
        return (fp.is_absolute() ? fp : base / fp).string();
    };

    PopulationConfig pop;
    pop.seed = defaults.seed;
    bool simulated = false;
    for (const auto& [key, v] : kv)
    {
        if (key == "structure")
        {
            simulated = true;
            if (v == "unrelated")
            {
                pop.structure = Unrelated{};
            }
            else if (v == "bn" || v == "balding_nichols")
            {
                if (!pop.structured())
                {
                    pop.structure = BaldingNichols{};
                }
            }
            else
            {
                throw UsageError("unknown structure '" + v + "'");
            }
        }
        else if (key == "n")
        {
            pop.n_samples = detail::to_int(v, key);
        }
        else if (key == "m")
        {
            pop.n_markers = detail::to_int(v, key);
        }
        else if (key == "seed")
        {
            pop.seed = static_cast<std::uint64_t>(detail::to_int(v, key));
        }
        else if (key == "maf")
        {
            pop.maf_range = detail::to_interval(v, key);
        }
        else if (key == "markers")
        {
            p.markers_path = resolve(v);
        }
        else if (key == "kernel")
        {
            p.kernel_path = resolve(v);
        }
        else if (key == "replicates")
        {
            p.replicates = detail::to_int(v, key);
        }
        else if (key == "scenarios")
        {
            p.scenarios = parse_scenarios(v);
        }
        else if (key != "subpops" && key != "fst" && key != "ancestral-maf")
        {
            throw UsageError("panel '" + p.label + "': unknown key '" + key + "'");
        }
    }
    if (pop.structured())
    {
        auto& bn = std::get<BaldingNichols>(pop.structure);
        if (kv.contains("subpops"))
        {
            bn.n_subpops = static_cast<int>(detail::to_int(kv["subpops"], "subpops"));
        }
        if (kv.contains("fst"))
        {
            bn.fst = detail::to_double(kv["fst"], "fst");
        }
        if (kv.contains("ancestral-maf"))
        {
            bn.ancestral_maf_range = detail::to_interval(kv["ancestral-maf"], "ancestral-maf");
        }
    }
    const int sources = static_cast<int>(simulated) + static_cast<int>(!p.markers_path.empty())
                        + static_cast<int>(!p.kernel_path.empty());
    if (sources != 1)
    {
        throw UsageError(
            "panel '" + p.label + "' needs exactly one of structure=, markers=, kernel=");
    }
    if (simulated)
    {
        p.population = pop;
    }
    if (p.scenarios.empty())
    {
        p.scenarios = defaults.scenarios;
    }
    if (p.replicates < 1)
    {
        throw UsageError("panel '" + p.label + "': replicates must be positive");
    }
    return p;
}

inline ExperimentConfig parse_experiment_config(
    std::istream& in,
    const std::filesystem::path& base = std::filesystem::current_path())
{
    ExperimentConfig c;
    std::vector<std::string> panel_values;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos)
        {
            line.erase(hash);
        }
        line = detail::trimmed(line);
        if (line.empty())
        {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
        {
            throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const auto key = detail::trimmed(line.substr(0, eq));
        const auto value = detail::trimmed(line.substr(eq + 1));
        if (key == "panel")
        {
            panel_values.push_back(value);
        }
        else if (key == "seed")
        {
            c.seed = static_cast<std::uint64_t>(detail::to_int(value, key));
        }
        else if (key == "step")
        {
            c.grid_steps = grid_from_step(detail::to_double(value, key), 2).steps;
        }
        else if (key == "weights")
        {
            c.weights = parse_weights(value);
        }
        else if (key == "replicates")
        {
            c.replicates = detail::to_int(value, key);
        }
        else if (key == "scenarios")
        {
            c.scenarios = parse_scenarios(value);
        }
        else if (key == "out")
        {
            const std::filesystem::path fp(value);
            c.out = (fp.is_absolute() ? fp : base / fp).string();
        }
        else
        {
            throw UsageError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    // Panels are parsed last so global defaults apply regardless of order.
    for (const auto& v : panel_values)
    {
        c.panels.push_back(parse_panel(v, c, base));
    }
    return c;
}

inline ExperimentConfig read_experiment_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw UsageError("cannot open config '" + path + "'");
    }
    return parse_experiment_config(in, std::filesystem::absolute(path).parent_path());
}

struct ExperimentCell
{
    Scenario scenario = Scenario::A;
    std::optional<KlScanResult> scan;
    std::string error;
    double runtime_seconds = 0.0;
};

struct ExperimentRow
{
    std::string label;
    std::string source;
    Index n = 0;
    Index replicates = 1;
    std::vector<ExperimentCell> cells;
    std::vector<std::string> dropped_markers;
    std::string error;
    double runtime_seconds = 0.0;
};

struct ExperimentReport
{
    std::vector<ExperimentRow> rows;
    ExperimentConfig config;
};

inline std::string panel_source(const PanelSpec& p)
{
    if (!p.markers_path.empty())
    {
        return "markers file";
    }
    if (!p.kernel_path.empty())
    {
        return "kernel file";
    }
    const auto& pop = *p.population;
    if (const auto* bn = std::get_if<BaldingNichols>(&pop.structure))
    {
        return "simulated stand-in (Balding-Nichols, " + std::to_string(bn->n_subpops)
               + " subpops, fst=" + io::format_number(bn->fst) + ")";
    }
    return "simulated stand-in (unrelated)";
}

/// Kernel for a panel spec: simulated, read from markers, or read directly.
inline Kernel panel_kernel(const PanelSpec& p, std::vector<std::string>* dropped = nullptr)
{
    if (p.population)
    {
        return gsm_from_markers(simulate_markers(*p.population), dropped);
    }
    if (!p.markers_path.empty())
    {
        return gsm_from_markers(io::read_markers(p.markers_path), dropped);
    }
    auto k = io::read_kernel(p.kernel_path);
    validate_kernel(k);
    return k;
}

/// Runs every panel x scenario scan. Cell failures are recorded, not thrown.
inline ExperimentReport run_experiment(const ExperimentConfig& config)
{
    std::size_t total_cells = 0;
    for (const auto& p : config.panels)
    {
        total_cells += p.scenarios.size();
    }
    if (total_cells == 0)
    {
        throw UsageError("nothing to run");
    }

    using Clock = std::chrono::steady_clock;
    ExperimentReport report;
    report.config = config;
    for (const auto& panel : config.panels)
    {
        const auto panel_start = Clock::now();
        ExperimentRow row;
        row.label = panel.label;
        row.source = panel_source(panel);
        row.replicates = panel.replicates;
        std::optional<Kernel> k;
        try
        {
            k = panel_kernel(panel, &row.dropped_markers);
            row.n = k->size();
        }
        catch (const Error& e)
        {
            row.error = e.what();
        }
        for (const auto scenario : panel.scenarios)
        {
            ExperimentCell cell;
            cell.scenario = scenario;
            if (k)
            {
                const auto start = Clock::now();
                try
                {
                    const ReplicateDesign design{k->size(), panel.replicates};
                    const auto truth = build_truth(scenario, *k, design, config.weights);
                    const auto model = build_model(paired_model(scenario), *k, design);
                    cell.scan = minimize_kl(
                        truth, model,
                        SimplexGrid{config.grid_steps, static_cast<int>(model.size())});
                }
                catch (const Error& e)
                {
                    cell.error = e.what();
                }
                cell.runtime_seconds = std::chrono::duration<double>(Clock::now() - start).count();
            }
            else
            {
                cell.error = row.error;
            }
            row.cells.push_back(std::move(cell));
        }
        row.runtime_seconds = std::chrono::duration<double>(Clock::now() - panel_start).count();
        report.rows.push_back(std::move(row));
    }
    return report;
}

/// Table-shaped report: panel, source, n, then one sigma_A2 column per
/// scenario (2 decimals; blank = not run, ERR = failed).
inline void write_report_tsv(std::ostream& out, const ExperimentReport& report)
{
    out << "panel\tsource\tn\tA\tB\tC\n";
    for (const auto& row : report.rows)
    {
        out << row.label << '\t' << row.source << '\t' << row.n;
        for (const auto s : {Scenario::A, Scenario::B, Scenario::C})
        {
            out << '\t';
            for (const auto& cell : row.cells)
            {
                if (cell.scenario != s)
                {
                    continue;
                }
                if (cell.scan)
                {
                    char buf[16];
                    std::snprintf(buf, sizeof buf, "%.2f", cell.scan->theta_tilde.front());
                    out << buf;
                }
                else
                {
                    out << "ERR";
                }
            }
        }
        out << '\n';
    }
}

inline nlohmann::json scan_to_json(const KlScanResult& scan)
{
    using nlohmann::json;
    json ties = json::array();
    for (const auto& t : scan.ties)
    {
        json w = json::array();
        for (int v : t)
        {
            w.push_back(io::round12(static_cast<double>(v) / scan.steps));
        }
        ties.push_back(w);
    }
    json theta = json::array();
    for (double v : scan.theta_tilde)
    {
        theta.push_back(io::round12(v));
    }
    return {
        {"components", scan.names},
        {"theta_tilde", theta},
        {"ticks", scan.ticks},
        {"kl_min", io::round12(scan.kl_min)},
        {"ties", ties},
        {"skipped_points", scan.skipped_points},
        {"evaluated_points", scan.evaluated_points},
        {"step", io::round12(1.0 / scan.steps)},
        {"path", to_string(scan.path)}};
}

/// Metadata sidecar; `timestamp` is the only non-reproducible field.
inline nlohmann::json report_metadata(const ExperimentReport& report)
{
    using nlohmann::json;
    const auto& c = report.config;
    json rows = json::array();
    for (const auto& row : report.rows)
    {
        json cells = json::object();
        for (const auto& cell : row.cells)
        {
            json jc = cell.scan ? scan_to_json(*cell.scan) : json::object();
            if (!cell.error.empty())
            {
                jc["error"] = cell.error;
            }
            jc["runtime_seconds"] = io::round12(cell.runtime_seconds);
            cells[std::string(1, to_char(cell.scenario))] = jc;
        }
        json jr = {
            {"panel", row.label},
            {"source", row.source},
            {"n", row.n},
            {"replicates", row.replicates},
            {"dropped_markers", row.dropped_markers.size()},
            {"cells", cells},
            {"runtime_seconds", io::round12(row.runtime_seconds)}};
        if (!row.error.empty())
        {
            jr["error"] = row.error;
        }
        rows.push_back(jr);
    }
    json panels = json::array();
    for (const auto& p : c.panels)
    {
        json jp = {{"label", p.label}, {"replicates", p.replicates}};
        if (p.population)
        {
            const auto& pop = *p.population;
            jp["n"] = pop.n_samples;
            jp["m"] = pop.n_markers;
            jp["seed"] = pop.seed;
            jp["maf_range"] = {pop.maf_range.lo, pop.maf_range.hi};
            if (const auto* bn = std::get_if<BaldingNichols>(&pop.structure))
            {
                jp["structure"] = "balding_nichols";
                jp["subpops"] = bn->n_subpops;
                jp["fst"] = bn->fst;
                jp["ancestral_maf_range"] = {bn->ancestral_maf_range.lo, bn->ancestral_maf_range.hi};
            }
            else
            {
                jp["structure"] = "unrelated";
            }
        }
        else
        {
            jp["file"] = p.markers_path.empty() ? p.kernel_path : p.markers_path;
        }
        panels.push_back(jp);
    }
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return {
        {"software", "pseudotrue"},
        {"version", kVersion},
        {"grid_step", io::round12(1.0 / c.grid_steps)},
        {"truth_weights", {c.weights.additive, c.weights.non_additive, c.weights.residual}},
        {"default_seed", c.seed},
        {"rng", "philox4x32-10; boost ziggurat normals"},
        {"panels", panels},
        {"rows", rows},
        {"note", "panels are simulated stand-ins unless sourced from files"},
        {"timestamp", stamp}};
}

inline void write_report(const ExperimentReport& report, const std::string& path)
{
    {
        std::ofstream out(path);
        if (!out)
        {
            throw Error("cannot open '" + path + "' for writing");
        }
        write_report_tsv(out, report);
    }
    std::ofstream meta(path + ".json");
    if (!meta)
    {
        throw Error("cannot open '" + path + ".json' for writing");
    }
    meta << report_metadata(report).dump(2) << '\n';
}

}  // namespace pseudotrue
