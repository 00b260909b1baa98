// tdjunta: run experiments, verify acceptance criteria, produce analysis reports.
//
// Exit status: 0 ok, 1 failure, 2 usage or invalid configuration.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tdjunta/acceptance.hpp"
#include "tdjunta/harness.hpp"

namespace fs = std::filesystem;
using namespace tdj;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw SpecError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(part, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != part.size() || part.empty() || v == 0) throw SpecError("bad batch list '" + text + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

BooleanFunction target_or_parity(const std::string& path, int k) {
    if (!path.empty()) return load_function_spec(path);
    Subset s;
    for (int i = 1; i <= k; ++i) s.push_back(i);
    return make_parity(k, s);
}

void emit(const AnalysisReport& rep, const std::string& out_dir) {
    rep.write(out_dir);
    std::cout << rep.csv() << "wrote " << (fs::path(out_dir) / (rep.kind + ".csv")).string() << " and "
              << (fs::path(out_dir) / (rep.kind + ".json")).string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learning juntas from random-walk data with temporal-difference SGD"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run every arm and seed of an experiment spec");
    std::string spec_path;
    std::size_t workers = 0;
    bool fresh = false;
    bool gnuplot = false;
    std::string out_override;
    run->add_option("spec", spec_path, "Experiment spec (JSON)")->required();
    run->add_option("--workers", workers, "Worker threads (default: TDJ_WORKERS or all cores)");
    run->add_flag("--fresh", fresh, "Ignore existing checkpoints");
    run->add_flag("--gnuplot-script", gnuplot, "Also write plot.gp next to the aggregates");
    run->add_option("--output-dir", out_override, "Override the spec's output_dir");

    // verify
    auto* verify = app.add_subcommand("verify", "Run the acceptance criteria and print a pass/fail table");
    std::string criteria = "1-12";
    verify->add_option("--criteria", criteria, "Subset such as 1-5,8")->capture_default_str();
    verify->add_option("--workers", workers, "Worker threads");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Cross-predictability, bound, CLT and baseline reports");
    analyze->require_subcommand(1);
    std::string out_dir = ".";

    auto* cp = analyze->add_subcommand("cp", "Exact, Monte-Carlo and random-walk batch CP of the parity orbit");
    CpParams cpp;
    std::string batches = "4,16,64,256";
    cp->add_option("--d", cpp.dim)->capture_default_str();
    cp->add_option("--k", cpp.k)->capture_default_str();
    cp->add_option("--p", cpp.flip_prob)->capture_default_str();
    cp->add_option("--B", batches, "Comma-separated batch sizes")->capture_default_str();
    cp->add_option("--n-outer", cpp.n_outer)->capture_default_str();
    cp->add_option("--mc-samples", cpp.mc_samples)->capture_default_str();
    cp->add_option("--seed", cpp.seed)->capture_default_str();
    cp->add_option("--out", out_dir)->capture_default_str();

    auto* bound = analyze->add_subcommand("bound", "Right-hand side of the noisy-SGD lower bound");
    BoundParams bp;
    double cp_value = std::nan("");
    bound->add_option("--T", bp.steps)->capture_default_str();
    bound->add_option("--M", bp.model_size)->capture_default_str();
    bound->add_option("--A", bp.grad_range)->capture_default_str();
    bound->add_option("--tau", bp.tau_noise)->capture_default_str();
    bound->add_option("--cp", cp_value, "Cross-predictability (default 1/C(d,k))");
    bound->add_option("--d", bp.dim)->capture_default_str();
    bound->add_option("--k", bp.k)->capture_default_str();
    bound->add_option("--p", bp.flip_prob)->capture_default_str();
    bound->add_option("--B", bp.batch)->capture_default_str();
    bound->add_option("--out", out_dir)->capture_default_str();

    auto* clt = analyze->add_subcommand("clt", "KS distance of the standardized edge-chain functional");
    CltParams cl;
    std::string clt_target;
    int clt_k = 2;
    clt->add_option("--target", clt_target, "Function spec (default: parity on k coordinates)");
    clt->add_option("--k", clt_k, "Parity size when no target is given")->capture_default_str();
    clt->add_option("--s", cl.s, "Support pattern s of v = s - r")->capture_default_str();
    clt->add_option("--r", cl.r, "Support pattern r of v = s - r")->capture_default_str();
    clt->add_option("--p", cl.flip_prob)->capture_default_str();
    clt->add_option("--T", cl.config.steps)->capture_default_str();
    clt->add_option("--replicas", cl.config.replicas)->capture_default_str();
    clt->add_option("--sigma-steps", cl.config.sigma_steps)->capture_default_str();
    clt->add_option("--ceiling", cl.config.ceiling)->capture_default_str();
    clt->add_option("--scale", cl.config.scale)->capture_default_str();
    clt->add_option("--seed", cl.seed)->capture_default_str();
    clt->add_option("--out", out_dir)->capture_default_str();

    auto* base = analyze->add_subcommand("baseline", "Coupon-collector support recovery over many walks");
    BaselineParams bl;
    std::string base_target;
    base->add_option("--target", base_target, "Function spec")->required();
    base->add_option("--p", bl.flip_prob)->capture_default_str();
    base->add_option("--runs", bl.runs)->capture_default_str();
    base->add_option("--seed", bl.seed)->capture_default_str();
    base->add_option("--patience", bl.config.patience, "0 selects ceil(10 (d/p) ln d)")->capture_default_str();
    base->add_option("--cap", bl.config.step_cap)->capture_default_str();
    base->add_option("--out", out_dir)->capture_default_str();

    // presets
    auto* presets = app.add_subcommand("presets", "List presets or write one as a spec file");
    std::string preset_name;
    std::string preset_out;
    presets->add_option("name", preset_name, "Preset to print");
    presets->add_option("--write", preset_out, "Write the preset spec to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*run) {
            ExperimentSpec spec = parse_experiment_spec(read_text(spec_path));
            if (!out_override.empty()) spec.output_dir = out_override;
            const BooleanFunction f = resolve_target(spec, fs::path(spec_path).parent_path());
            RunOptions opts;
            opts.workers = workers ? workers : default_workers();
            opts.fresh = fresh;
            opts.gnuplot_script = gnuplot;
            opts.progress = [](const std::string& m) { std::cerr << m << "\n"; };
            const RunSummary s = run_experiment(spec, f, opts);
            std::cout << s.run_csvs.size() << " run CSVs, " << s.aggregate_csvs.size() << " aggregates in "
                      << spec.output_dir << "\n";
            return s.suspended ? kFailure : kOk;
        }
        if (*verify) {
            std::vector<int> ids;
            try {
                ids = parse_criteria_list(criteria);
            } catch (const std::invalid_argument& e) {
                throw SpecError(e.what());
            }
            CriterionOptions opts;
            opts.workers = workers ? workers : default_workers();
            int failed = 0;
            for (int id : ids) {
                const CriterionResult r = run_criterion(id, opts);
                std::cout << format_criterion_line(r) << std::endl;
                failed += !r.pass;
            }
            std::cout << (ids.size() - failed) << "/" << ids.size() << " criteria passed\n";
            return failed ? kFailure : kOk;
        }
        if (*analyze) {
            if (*cp) {
                cpp.batches = parse_sizes(batches);
                emit(analyze_cp(cpp), out_dir);
            } else if (*bound) {
                if (!std::isnan(cp_value)) bp.cp = cp_value;
                emit(analyze_bound(bp), out_dir);
            } else if (*clt) {
                emit(analyze_clt(target_or_parity(clt_target, clt_k), cl), out_dir);
            } else if (*base) {
                emit(analyze_baseline(load_function_spec(base_target), bl), out_dir);
            }
            return kOk;
        }
        if (*presets) {
            if (preset_name.empty()) {
                for (const auto& n : preset_names()) std::cout << n << "\t" << preset_description(n) << "\n";
                return kOk;
            }
            const std::string text = experiment_spec_json(make_preset(preset_name));
            if (preset_out.empty()) {
                std::cout << text;
            } else {
                std::ofstream(preset_out, std::ios::binary) << text;
                std::cout << "wrote " << preset_out << "\n";
            }
            return kOk;
        }
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}
