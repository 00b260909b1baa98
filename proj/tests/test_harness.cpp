#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tdjunta/harness.hpp"

using namespace tdj;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("tdjunta_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ExperimentSpec smoke_in(const fs::path& dir) {
    ExperimentSpec spec = make_preset("smoke");
    spec.mlp.max_iters = 4000;
    spec.log_every = 500;
    spec.mlp.test_size = 128;
    spec.output_dir = dir.string();
    return spec;
}

RunRecord load(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return RunRecord::read_csv(in);
}

}  // namespace

TEST_CASE("function specs") {
    SUBCASE("parity") {
        const auto f = parse_function_spec(R"({"dim": 6, "parity_support": [2, 5]})");
        CHECK(f == make_parity(6, {2, 5}));
    }
    SUBCASE("junta table") {
        const auto f = parse_function_spec(R"({"dim": 4, "junta": {"support": [3], "table": [-1, 1]}})");
        CHECK(f.terms().at({3}) == doctest::Approx(1.0));
        CHECK(f.has_declared_support());
    }
    SUBCASE("fourier round trip") {
        const BooleanFunction f(7, {{{1, 2}, 0.25}, {{3}, -0.75}, {{}, 0.1}});
        const auto g = parse_function_spec(function_spec_json(f));
        CHECK(g == f);
        const std::vector<double> table = {1, 1, 1, 1};
        const auto c = make_junta_from_table(5, {2, 4}, table);
        CHECK(parse_function_spec(function_spec_json(c)) == c);
    }
    SUBCASE("malformed specs") {
        CHECK_THROWS_AS(parse_function_spec(R"({"dim": 6})"), SpecError);
        CHECK_THROWS_AS(parse_function_spec(R"({"dim": 6, "parity_support": [7]})"), SpecError);
        CHECK_THROWS_AS(parse_function_spec(R"({"dim": 6, "parity_support": [1], "extra": 1})"), SpecError);
        CHECK_THROWS_AS(parse_function_spec(R"({"dim": 4, "junta": {"support": [1, 2], "table": [1]}})"), SpecError);
        CHECK_THROWS_AS(parse_function_spec("not json"), SpecError);
        CHECK_THROWS_AS(load_function_spec("/nonexistent/f.json"), SpecError);
    }
}

TEST_CASE("experiment specs") {
    SUBCASE("every preset survives a round trip") {
        for (const auto& name : preset_names()) {
            const ExperimentSpec spec = make_preset(name);
            CHECK_NOTHROW(spec.validate());
            CHECK(!preset_description(name).empty());
            CHECK(parse_experiment_spec(experiment_spec_json(spec)) == spec);
        }
        CHECK_THROWS_AS(make_preset("nope"), SpecError);
    }
    SUBCASE("a never-stop run is written as null") {
        ExperimentSpec spec = make_preset("smoke");
        spec.mlp.stop_loss.reset();
        const std::string text = experiment_spec_json(spec);
        CHECK(text.find("\"stop_loss\": null") != std::string::npos);
        const auto back = parse_experiment_spec(text);
        CHECK(!back.mlp.stop_loss.has_value());
        CHECK(std::isinf(mlp_train_config(back, back.arms[0], 0).stop_loss));
    }
    SUBCASE("strictness") {
        const std::string good = experiment_spec_json(make_preset("smoke"));
        auto edit = [&](const std::string& from, const std::string& to) {
            std::string t = good;
            const auto pos = t.find(from);
            REQUIRE(pos != std::string::npos);
            return t.replace(pos, from.size(), to);
        };
        CHECK_THROWS_AS(parse_experiment_spec(edit("\"seeds\"", "\"unknown_key\": 1,\n  \"seeds\"")), SpecError);
        CHECK_THROWS_AS(parse_experiment_spec(edit("\"version\": 1", "\"version\": 2")), SpecError);
        CHECK_THROWS_AS(parse_experiment_spec(edit("\"seeds\": [", "\"seeds\": [], \"x\": [")), SpecError);
        ExperimentSpec spec = make_preset("smoke");
        spec.seeds.clear();
        CHECK_THROWS_AS(spec.validate(), SpecError);
        spec = make_preset("smoke");
        spec.seeds = {1, 1};
        CHECK_THROWS_AS(spec.validate(), SpecError);
        spec = make_preset("smoke");
        spec.arms[0].name = "../escape";
        CHECK_THROWS_AS(spec.validate(), SpecError);
        spec = make_preset("algorithm1-desk");
        spec.arms[0].data = DataKind::Iid;
        CHECK_THROWS_AS(spec.validate(), SpecError);
    }
    SUBCASE("targets resolve relative to the spec file") {
        const fs::path dir = scratch("target");
        std::ofstream(dir / "f.json") << R"({"dim": 10, "parity_support": [1, 2]})";
        ExperimentSpec spec = make_preset("smoke");
        spec.target = "f.json";
        spec.target_inline = false;
        CHECK(resolve_target(spec, dir) == make_parity(10, {1, 2}));
        spec.target = "missing.json";
        CHECK_THROWS_AS(resolve_target(spec, dir), SpecError);
    }
}

TEST_CASE("algorithm 1 configuration") {
    const ExperimentSpec spec = make_preset("algorithm1-desk");
    const auto f = resolve_target(spec, ".");
    const auto cfg = algorithm1_config(spec, spec.arms[0], f, 3);
    CHECK(cfg.phase1.batch_size == static_cast<std::size_t>(std::ceil(512.0 * f.dim())));
    CHECK(cfg.phase1.lr == doctest::Approx(theorem_phase1_lr(cfg.phase1.batch_size, f.dim(), 0.001, 3)));
    CHECK(cfg.walk.seed == 3);
    CHECK(cfg.walk.flip_prob == 0.5);
}

TEST_CASE("aggregates carry values forward on the union grid") {
    RunRecord a({"m"});
    a.append(10, {1.0});
    a.append(20, {3.0});
    RunRecord b({"m"});
    b.append(10, {2.0});
    b.append(15, {4.0});
    const RunRecord agg = aggregate_records({a, b});
    REQUIRE(agg.rows().size() == 3);
    CHECK(agg.columns() == std::vector<std::string>{"n", "m_mean", "m_std"});
    CHECK(agg.rows()[0].values == std::vector<double>{2.0, 1.5, std::sqrt(0.5)});
    CHECK(agg.rows()[1].samples == 15);
    CHECK(agg.rows()[1].values[1] == 2.5);
    CHECK(agg.rows()[2].values[1] == 3.5);
    CHECK(agg.rows()[2].values[2] == doctest::Approx(std::sqrt(0.5)));

    RunRecord late({"m"});
    late.append(12, {5.0});
    const RunRecord partial = aggregate_records({a, late});
    CHECK(partial.rows()[0].values == std::vector<double>{1.0, 1.0, 0.0});
    CHECK_THROWS_AS(aggregate_records({}), std::invalid_argument);
    CHECK_THROWS_AS(aggregate_records({a, RunRecord({"z"})}), std::invalid_argument);
}

TEST_CASE("worker pool runs every job and rethrows") {
    std::vector<int> hit(100, 0);
    parallel_for(hit.size(), 4, [&](std::size_t i) { hit[i] += 1; });
    for (int h : hit) CHECK(h == 1);
    CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                        if (i == 7) throw std::runtime_error("boom");
                    }),
                    std::runtime_error);
    CHECK(default_workers() >= 1);
}

TEST_CASE("smoke run is deterministic across worker counts") {
    const fs::path d1 = scratch("smoke1");
    const fs::path d2 = scratch("smoke2");
    RunOptions one;
    one.workers = 1;
    one.gnuplot_script = true;
    RunOptions four;
    four.workers = 4;
    const ExperimentSpec s1 = smoke_in(d1);
    const ExperimentSpec s2 = smoke_in(d2);
    const auto f = resolve_target(s1, ".");
    const RunSummary r1 = run_experiment(s1, f, one);
    const RunSummary r2 = run_experiment(s2, f, four);
    CHECK(r1.suspended == 0);
    REQUIRE(r1.run_csvs.size() == 4);
    REQUIRE(r2.run_csvs.size() == 4);
    for (std::size_t i = 0; i < r1.run_csvs.size(); ++i) {
        CHECK(fs::relative(r1.run_csvs[i], d1) == fs::relative(r2.run_csvs[i], d2));
        CHECK(slurp(r1.run_csvs[i]) == slurp(r2.run_csvs[i]));
    }
    for (std::size_t i = 0; i < r1.aggregate_csvs.size(); ++i) {
        CHECK(slurp(r1.aggregate_csvs[i]) == slurp(r2.aggregate_csvs[i]));
    }
    CHECK(fs::exists(d1 / "plot.gp"));
    CHECK(!fs::exists(d2 / "plot.gp"));

    SUBCASE("run CSVs record their configuration") {
        const RunRecord rec = load(d1 / "walk_td" / "seed_0.csv");
        REQUIRE(rec.comments.size() == 3);
        CHECK(rec.comments[0].rfind("config: ", 0) == 0);
        CHECK(rec.comments[1].rfind("arm: ", 0) == 0);
        CHECK(rec.comments[2] == "seed: 0");
        CHECK(rec.back().samples == 4000);
        CHECK(!fs::exists(d1 / "walk_td" / "seed_0.ckpt.json"));
    }

    SUBCASE("aggregates match a recomputation from the run CSVs") {
        for (const auto& arm : s1.arms) {
            std::vector<RunRecord> runs;
            for (auto seed : s1.seeds) runs.push_back(load(d1 / arm.name / ("seed_" + std::to_string(seed) + ".csv")));
            const RunRecord agg = load(d1 / (arm.name + "_aggregate.csv"));
            REQUIRE(agg.rows().size() == runs[0].rows().size());
            for (std::size_t r = 0; r < agg.rows().size(); ++r) {
                const auto& row = agg.rows()[r];
                CHECK(row.values[0] == 2.0);
                for (std::size_t c = 0; c < runs[0].columns().size(); ++c) {
                    const double x = runs[0].rows()[r].values[c];
                    const double y = runs[1].rows()[r].values[c];
                    if (std::isnan(x)) continue;
                    const double mean = 0.5 * (x + y);
                    const double sd = std::abs(x - y) / std::sqrt(2.0);
                    CHECK(std::abs(row.values[1 + 2 * c] - mean) <= 1e-12);
                    CHECK(std::abs(row.values[2 + 2 * c] - sd) <= 1e-12);
                }
            }
        }
    }
}

TEST_CASE("suspend and resume reproduce the uninterrupted run") {
    const fs::path full_dir = scratch("full");
    const fs::path part_dir = scratch("part");
    const ExperimentSpec full = smoke_in(full_dir);
    ExperimentSpec part = smoke_in(part_dir);
    const auto f = resolve_target(full, ".");
    run_experiment(full, f, RunOptions{});

    RunOptions suspend;
    suspend.suspend_after = 3;
    const RunSummary first = run_experiment(part, f, suspend);
    CHECK(first.suspended == 4);
    CHECK(first.run_csvs.empty());
    CHECK(fs::exists(part_dir / "walk_td" / "seed_1.ckpt.json"));

    SUBCASE("a changed configuration refuses the checkpoint") {
        ExperimentSpec other = part;
        other.mlp.lr *= 2.0;
        CHECK_THROWS_AS(run_experiment(other, f, RunOptions{}), SpecError);
        RunOptions fresh;
        fresh.fresh = true;
        CHECK(run_experiment(other, f, fresh).suspended == 0);
    }

    SUBCASE("resuming finishes with identical output") {
        std::vector<std::string> log;
        RunOptions resume;
        resume.workers = 2;
        resume.progress = [&](const std::string& m) { log.push_back(m); };
        const RunSummary second = run_experiment(part, f, resume);
        CHECK(second.suspended == 0);
        CHECK(std::count_if(log.begin(), log.end(), [](const std::string& m) { return m.rfind("resume", 0) == 0; }) == 4);
        for (const auto& arm : full.arms) {
            for (auto seed : full.seeds) {
                const fs::path rel = fs::path(arm.name) / ("seed_" + std::to_string(seed) + ".csv");
                CHECK(slurp(full_dir / rel) == slurp(part_dir / rel));
            }
            CHECK(slurp(full_dir / (arm.name + "_aggregate.csv")) == slurp(part_dir / (arm.name + "_aggregate.csv")));
        }
    }
}

TEST_CASE("analysis reports") {
    const fs::path dir = scratch("reports");
    SUBCASE("bound") {
        BoundParams p;
        const auto rep = analyze_bound(p);
        rep.write(dir);
        CHECK(fs::exists(dir / "bound.csv"));
        CHECK(slurp(dir / "bound.json").find("\"estimate\": 1.0134812794536") != std::string::npos);
        p.tau_noise = 0.0;
        CHECK_THROWS_AS(analyze_bound(p), SpecError);
    }
    SUBCASE("cp") {
        CpParams p;
        p.batches = {1, 8};
        p.n_outer = 200;
        p.mc_samples = 1000;
        const auto rep = analyze_cp(p);
        REQUIRE(rep.rows.size() == 4);
        CHECK(rep.rows[0][0] == "exact");
        CHECK(rep.rows[2][2] == "1");
        p.k = 9;
        CHECK_THROWS_AS(analyze_cp(p), SpecError);
    }
    SUBCASE("baseline") {
        BaselineParams p;
        p.runs = 5;
        const auto rep = analyze_baseline(make_parity(12, {4, 9}), p);
        CHECK(rep.rows.size() == 5);
        for (const auto& row : rep.rows) CHECK(row[1] == "4 9");
        CHECK(rep.summary_json.find("\"exact_recoveries\": 5") != std::string::npos);
    }
}
