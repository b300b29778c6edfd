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

namespace pseudotrue
{

using Catch::Matchers::ContainsSubstring;

namespace
{

ExperimentConfig parse(const std::string& text)
{
    std::istringstream in(text);
    return parse_experiment_config(in, "/tmp/base");
}

std::string tsv(const ExperimentReport& r)
{
    std::ostringstream out;
    write_report_tsv(out, r);
    return out.str();
}

const char* kSmall = R"(
seed = 5
step = 0.05
replicates = 2
panel = tiny structure=bn n=40 m=300 subpops=4 fst=0.2
panel = flat structure=unrelated n=30 m=300 seed=9 scenarios=A,B
)";

}  // namespace

TEST_CASE("config keys and panel defaults", "[experiment]")
{
    const auto c = parse(kSmall);
    CHECK(c.grid_steps == 20);
    CHECK(c.seed == 5);
    REQUIRE(c.panels.size() == 2);
    const auto& tiny = c.panels[0];
    CHECK(tiny.label == "tiny");
    REQUIRE(tiny.population);
    CHECK(tiny.population->seed == 5);
    CHECK(tiny.population->n_samples == 40);
    const auto& bn = std::get<BaldingNichols>(tiny.population->structure);
    CHECK(bn.n_subpops == 4);
    CHECK(bn.fst == 0.2);
    CHECK(tiny.scenarios.size() == 3);
    CHECK(tiny.replicates == 2);
    CHECK(c.panels[1].population->seed == 9);
    CHECK(c.panels[1].scenarios == std::vector<Scenario>{Scenario::A, Scenario::B});
    CHECK(parse("out = r.tsv\n").out == "/tmp/base/r.tsv");
}

TEST_CASE("file panels resolve against the config directory", "[experiment]")
{
    const auto c = parse("panel = real kernel=k.tsv\npanel = raw markers=/abs/m.csv\n");
    CHECK(c.panels[0].kernel_path == "/tmp/base/k.tsv");
    CHECK(c.panels[1].markers_path == "/abs/m.csv");
    CHECK(panel_source(c.panels[0]) == "kernel file");
}

TEST_CASE("bad configs are usage errors", "[experiment]")
{
    CHECK_THROWS_AS(parse("colour = blue\n"), UsageError);
    CHECK_THROWS_AS(parse("step 0.01\n"), UsageError);
    CHECK_THROWS_AS(parse("step = 0.03\n"), UsageError);
    CHECK_THROWS_AS(parse("panel = p structure=bn kernel=k.tsv\n"), UsageError);
    CHECK_THROWS_AS(parse("panel = p\n"), UsageError);
    CHECK_THROWS_AS(parse("panel = p structure=tree\n"), UsageError);
    CHECK_THROWS_AS(parse("panel = p structure=unrelated colour=blue\n"), UsageError);
    CHECK_THROWS_AS(parse("scenarios = A,D\n"), UsageError);
    CHECK_THROWS_AS(parse("weights = 0.4,0.2\n"), UsageError);
}

TEST_CASE("an empty scenario list has nothing to run", "[experiment]")
{
    CHECK_THROWS_WITH(run_experiment(parse("seed = 1\n")), ContainsSubstring("nothing to run"));
}

TEST_CASE("report cells match direct scans", "[experiment]")
{
    const auto c = parse(kSmall);
    const auto report = run_experiment(c);
    REQUIRE(report.rows.size() == 2);
    const auto k = panel_kernel(c.panels[0]);
    for (const auto& cell : report.rows[0].cells)
    {
        REQUIRE(cell.scan);
        const ReplicateDesign d{k.size(), 2};
        const auto direct = minimize_kl(
            build_truth(cell.scenario, k, d), build_model(paired_model(cell.scenario), k, d),
            SimplexGrid{20, cell.scenario == Scenario::C ? 3 : 2});
        CHECK(cell.scan->ticks == direct.ticks);
    }
    CHECK(report.rows[1].cells.size() == 2);
}

TEST_CASE("identical configs give byte-identical reports", "[experiment]")
{
    const auto c = parse(kSmall);
    const auto a = tsv(run_experiment(c));
    const auto b = tsv(run_experiment(c));
    CHECK(a == b);
    CHECK(a.rfind("panel\tsource\tn\tA\tB\tC\n", 0) == 0);
    CHECK_THAT(a, ContainsSubstring("simulated stand-in"));
}

TEST_CASE("failed cells are recorded, not thrown", "[experiment]")
{
    const auto c = parse(
        "panel = single structure=unrelated n=20 m=200 replicates=1 scenarios=A,C\n"
        "panel = missing kernel=does-not-exist.tsv scenarios=A\n");
    const auto report = run_experiment(c);
    const auto& cells = report.rows[0].cells;
    CHECK(cells[0].scan.has_value());
    CHECK_FALSE(cells[1].scan.has_value());
    CHECK_THAT(cells[1].error, ContainsSubstring("non-identifiable"));
    CHECK_FALSE(report.rows[1].error.empty());
    const auto text = tsv(report);
    CHECK_THAT(text, ContainsSubstring("ERR"));
}

TEST_CASE("metadata carries what is needed to rerun", "[experiment]")
{
    const auto report = run_experiment(parse(kSmall));
    const auto meta = report_metadata(report);
    CHECK(meta.contains("version"));
    CHECK(meta.contains("grid_step"));
    CHECK(meta.contains("truth_weights"));
    CHECK(meta.contains("panels"));
}

}  // namespace pseudotrue
