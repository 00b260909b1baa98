#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tdjunta/format.hpp"
#include "tdjunta/harness.hpp"

namespace tdj {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) { return format_double(v); }

// JSON has no NaN or infinity; those become null.
json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

Estimate mean_estimate(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sd = xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return {mean, sd / std::sqrt(n), xs.size()};
}

}  // namespace

std::string AnalysisReport::csv() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
    }
    return out.str();
}

void AnalysisReport::write(const fs::path& dir) const {
    fs::create_directories(dir);
    std::ofstream(dir / (kind + ".csv"), std::ios::binary) << csv();
    std::ofstream(dir / (kind + ".json"), std::ios::binary) << summary_json;
}

AnalysisReport analyze_cp(const CpParams& p) {
    if (p.k < 1 || p.k > p.dim) throw SpecError("cp: need 1 <= k <= d");
    if (p.batches.empty()) throw SpecError("cp: at least one batch size is required");
    AnalysisReport rep;
    rep.kind = "cp";
    rep.columns = {"method", "B", "estimate", "std_error", "n", "bound", "within_bound"};
    const double cp = cp_exact_parity_orbit(p.dim, p.k);
    rep.rows.push_back({"exact", "", num(cp), "0", "0", "", ""});
    const CpEstimate mc = cp_mc(p.dim, p.k, p.mc_samples, p.seed);
    rep.rows.push_back({"mc", "", num(mc.value), num(mc.std_error), std::to_string(mc.n), "", ""});
    json rows = json::array();
    bool all_within = true;
    for (std::size_t i = 0; i < p.batches.size(); ++i) {
        const std::size_t b = p.batches[i];
        if (b == 0) throw SpecError("cp: batch sizes must be positive");
        const CpEstimate est = cp_rw_batch(p.dim, p.k, p.flip_prob, b, p.n_outer, derive_seed(p.seed, i + 1));
        const double bound = cp + p.dim / (p.flip_prob * static_cast<double>(b));
        const bool within = est.value <= bound + 3.0 * est.std_error;
        all_within = all_within && within;
        rep.rows.push_back({"rw_batch", std::to_string(b), num(est.value), num(est.std_error), std::to_string(est.n),
                            num(bound), within ? "1" : "0"});
        rows.push_back({{"B", b}, {"estimate", est.value}, {"std_error", est.std_error}, {"bound", bound},
                        {"within_bound", within}});
    }
    const json summary = {
        {"estimate", cp},
        {"std_error", 0.0},
        {"n", 0},
        {"seed", p.seed},
        {"config",
         {{"d", p.dim}, {"k", p.k}, {"p", p.flip_prob}, {"B", p.batches}, {"n_outer", p.n_outer},
          {"mc_samples", p.mc_samples}}},
        {"mc", {{"estimate", mc.value}, {"std_error", mc.std_error}, {"n", mc.n}}},
        {"rw_batch", rows},
        {"all_within_bound", all_within}};
    rep.summary_json = summary.dump(2) + "\n";
    return rep;
}

AnalysisReport analyze_bound(const BoundParams& p) {
    const double cp = p.cp.value_or(cp_exact_parity_orbit(p.dim, p.k));
    double value = 0.0;
    try {
        value = lower_bound_rhs(p.steps, p.model_size, p.grad_range, p.tau_noise, cp, p.dim, p.flip_prob, p.batch);
    } catch (const std::invalid_argument& e) {
        throw SpecError(std::string("bound: ") + e.what());
    }
    AnalysisReport rep;
    rep.kind = "bound";
    rep.columns = {"T", "M", "A", "tau", "cp", "d", "p", "B", "rhs"};
    rep.rows.push_back({num(p.steps), num(p.model_size), num(p.grad_range), num(p.tau_noise), num(cp),
                        std::to_string(p.dim), num(p.flip_prob), num(p.batch), num(value)});
    const json summary = {{"estimate", value},
                          {"std_error", 0.0},
                          {"n", 0},
                          {"seed", nullptr},
                          {"config",
                           {{"T", p.steps}, {"M", p.model_size}, {"A", p.grad_range}, {"tau", p.tau_noise},
                            {"cp", cp}, {"d", p.dim}, {"k", p.k}, {"p", p.flip_prob}, {"B", p.batch}}}};
    rep.summary_json = summary.dump(2) + "\n";
    return rep;
}

AnalysisReport analyze_clt(const BooleanFunction& f, const CltParams& p) {
    const PhiObservable phi = [&] {
        try {
            return PhiObservable::from_patterns(f, p.s, p.r);
        } catch (const std::invalid_argument& e) {
            throw SpecError(std::string("clt: ") + e.what());
        }
    }();
    const CltReport r = clt_check(phi, p.flip_prob, p.config, p.seed);
    const double nan = std::nan("");
    AnalysisReport rep;
    rep.kind = "clt";
    rep.columns = {"T", "ks_mc", "ks_exact"};
    rep.rows.push_back({std::to_string(p.config.steps), num(r.ks_mc), num(r.ks_exact.value_or(nan))});
    rep.rows.push_back({std::to_string(p.config.steps * p.config.scale), num(r.ks_mc_scaled),
                        num(r.ks_exact_scaled.value_or(nan))});
    const json summary = {{"estimate", r.ks_mc},
                          {"std_error", nullptr},
                          {"n", p.config.replicas},
                          {"seed", p.seed},
                          {"config",
                           {{"target", json::parse(function_spec_json(f))},
                            {"v", phi.direction()},
                            {"p", p.flip_prob},
                            {"T", p.config.steps},
                            {"replicas", p.config.replicas},
                            {"sigma_steps", p.config.sigma_steps},
                            {"ceiling", p.config.ceiling},
                            {"scale", p.config.scale}}},
                          {"sigma2_batch", r.sigma2_batch},
                          {"mean", r.mean},
                          {"ks_mc_scaled", r.ks_mc_scaled},
                          {"ks_exact", jnum(r.ks_exact.value_or(nan))},
                          {"ks_exact_scaled", jnum(r.ks_exact_scaled.value_or(nan))},
                          {"ratio", jnum(r.ratio())},
                          {"pass", r.pass}};
    rep.summary_json = summary.dump(2) + "\n";
    return rep;
}

AnalysisReport analyze_baseline(const BooleanFunction& f, const BaselineParams& p) {
    if (p.runs == 0) throw SpecError("baseline: runs must be positive");
    AnalysisReport rep;
    rep.kind = "baseline";
    rep.columns = {"seed", "support", "discovery_step", "steps_used", "capped", "exact"};
    std::vector<double> steps;
    std::size_t exact = 0;
    std::size_t false_positives = 0;
    const Subset& truth = f.support();
    for (std::size_t i = 0; i < p.runs; ++i) {
        const std::uint64_t seed = p.seed + i;
        const BaselineResult r = baseline_support_recovery(f, WalkConfig{f.dim(), p.flip_prob, seed}, p.config);
        std::string support;
        for (std::size_t j = 0; j < r.support.size(); ++j) support += (j ? " " : "") + std::to_string(r.support[j]);
        for (int c : r.support) {
            if (!std::binary_search(truth.begin(), truth.end(), c)) ++false_positives;
        }
        const bool hit = r.support == truth;
        exact += hit;
        steps.push_back(static_cast<double>(r.discovery_step));
        rep.rows.push_back({std::to_string(seed), support, std::to_string(r.discovery_step),
                            std::to_string(r.steps_used), r.capped ? "1" : "0", hit ? "1" : "0"});
    }
    const Estimate m = mean_estimate(steps);
    const json summary = {{"estimate", m.value},
                          {"std_error", m.std_error},
                          {"n", m.n},
                          {"seed", p.seed},
                          {"config",
                           {{"target", json::parse(function_spec_json(f))},
                            {"p", p.flip_prob},
                            {"runs", p.runs},
                            {"patience", p.config.patience},
                            {"step_cap", p.config.step_cap}}},
                          {"exact_recoveries", exact},
                          {"false_positives", false_positives}};
    rep.summary_json = summary.dump(2) + "\n";
    return rep;
}

}  // namespace tdj
