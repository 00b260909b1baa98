#include "tdjunta/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "tdjunta/format.hpp"

namespace tdj {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw SpecError(where + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known) throw SpecError(where + ": unknown key '" + key + "'");
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SpecError(where + "." + key + ": " + e.what());
    }
}

template <class T>
T get_req(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw SpecError(where + ": missing '" + std::string(key) + "'");
    return get_or<T>(j, key, T{}, where);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& text) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

json parse_json(const std::string& text, const std::string& where) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw SpecError(where + ": " + e.what());
    }
}

bool safe_name(const std::string& s) {
    if (s.empty() || s == "." || s == "..") return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
}

const char* to_cstr(DataKind d) { return d == DataKind::Walk ? "walk" : "iid"; }
const char* to_cstr(LossKind l) { return l == LossKind::Td ? "td" : "square"; }
const char* to_cstr(Learner l) { return l == Learner::Mlp ? "mlp" : "algorithm1"; }

}  // namespace

// ---------------------------------------------------------------------------
// Function specs

BooleanFunction parse_function_spec(const std::string& json_text) {
    const json j = parse_json(json_text, "function spec");
    const std::string where = "function spec";
    check_keys(j, {"dim", "parity_support", "junta", "fourier", "declared_support"}, where);
    const int dim = get_req<int>(j, "dim", where);
    const int forms = static_cast<int>(j.contains("parity_support")) + static_cast<int>(j.contains("junta")) +
                      static_cast<int>(j.contains("fourier"));
    if (forms != 1) throw SpecError(where + ": exactly one of parity_support, junta, fourier is required");
    if (j.contains("declared_support") && !j.contains("fourier")) {
        throw SpecError(where + ": declared_support only accompanies the fourier form");
    }
    try {
        if (j.contains("parity_support")) return make_parity(dim, get_req<Subset>(j, "parity_support", where));
        if (j.contains("junta")) {
            const json& jt = j.at("junta");
            check_keys(jt, {"support", "table"}, where + ".junta");
            const auto support = get_req<Subset>(jt, "support", where + ".junta");
            const auto table = get_req<std::vector<double>>(jt, "table", where + ".junta");
            return make_junta_from_table(dim, support, table);
        }
        BooleanFunction::Terms terms;
        const json& jf = j.at("fourier");
        if (!jf.is_array()) throw SpecError(where + ".fourier: expected an array");
        for (const auto& term : jf) {
            check_keys(term, {"subset", "coeff"}, where + ".fourier[]");
            auto subset = get_req<Subset>(term, "subset", where + ".fourier[]");
            std::sort(subset.begin(), subset.end());
            if (terms.count(subset)) throw SpecError(where + ".fourier: repeated subset");
            terms[subset] = get_req<double>(term, "coeff", where + ".fourier[]");
        }
        std::optional<Subset> declared;
        if (j.contains("declared_support")) declared = get_req<Subset>(j, "declared_support", where);
        return BooleanFunction(dim, std::move(terms), std::move(declared));
    } catch (const std::invalid_argument& e) {
        throw SpecError(where + ": " + e.what());
    }
}

BooleanFunction load_function_spec(const fs::path& path) { return parse_function_spec(read_file(path)); }

std::string function_spec_json(const BooleanFunction& f) {
    json j;
    j["dim"] = f.dim();
    json terms = json::array();
    for (const auto& [subset, coeff] : f.terms()) terms.push_back({{"subset", subset}, {"coeff", coeff}});
    j["fourier"] = terms;
    if (f.has_declared_support()) j["declared_support"] = f.support();
    return j.dump();
}

// ---------------------------------------------------------------------------
// Experiment specs

void ExperimentSpec::validate() const {
    if (version != kSpecVersion) throw SpecError("spec: unsupported version " + std::to_string(version));
    if (target.empty()) throw SpecError("spec: target is required");
    if (seeds.empty()) throw SpecError("spec: seeds must be nonempty");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw SpecError("spec: repeated seed");
    }
    if (arms.empty()) throw SpecError("spec: arms must be nonempty");
    std::set<std::string> names;
    for (const auto& arm : arms) {
        if (!safe_name(arm.name)) throw SpecError("spec: arm name '" + arm.name + "' is not a safe file name");
        if (!names.insert(arm.name).second) throw SpecError("spec: repeated arm name '" + arm.name + "'");
        if (!(arm.alpha >= 0.0 && arm.alpha <= 1.0)) throw SpecError("spec: arm alpha outside [0, 1]");
        if (!(arm.flip_prob > 0.0 && arm.flip_prob < 1.0)) throw SpecError("spec: arm flip_prob outside (0, 1)");
        if (learner == Learner::Algorithm1 && arm.data != DataKind::Walk) {
            throw SpecError("spec: algorithm1 arms require walk data");
        }
    }
    if (output_dir.empty()) throw SpecError("spec: output_dir is required");
    if (learner == Learner::Mlp) {
        if (mlp.hidden.empty()) throw SpecError("spec: mlp.hidden must be nonempty");
        for (int h : mlp.hidden) {
            if (h < 1) throw SpecError("spec: mlp.hidden entries must be positive");
        }
        if (!(mlp.lr > 0.0)) throw SpecError("spec: mlp.lr must be positive");
        if (mlp.max_iters == 0) throw SpecError("spec: mlp.max_iters must be positive");
        if (mlp.test_size == 0) throw SpecError("spec: mlp.test_size must be positive");
        if (mlp.stop_loss && !(*mlp.stop_loss > 0.0)) throw SpecError("spec: mlp.stop_loss must be positive");
        std::set<std::string> tags;
        for (const auto& [tag, subset] : mlp.tracked) {
            if (!safe_name(tag) || !tags.insert(tag).second) throw SpecError("spec: bad tracked tag '" + tag + "'");
        }
    } else {
        const auto& a = algorithm1;
        if (a.n_hidden < 1) throw SpecError("spec: algorithm1.n_hidden must be positive");
        if (!(a.epsilon > 0.0)) throw SpecError("spec: algorithm1.epsilon must be positive");
        if (!(a.kappa > 0.0)) throw SpecError("spec: algorithm1.kappa must be positive");
        if (a.phase1_steps < 1) throw SpecError("spec: algorithm1.phase1_steps must be positive");
        if (a.phase2_steps == 0) throw SpecError("spec: algorithm1.phase2_steps must be positive");
        if (a.theorem_delta && !(*a.theorem_delta > 0.0)) throw SpecError("spec: algorithm1.theorem_delta must be positive");
        if (a.phase2_lr && !(*a.phase2_lr > 0.0)) throw SpecError("spec: algorithm1.phase2_lr must be positive");
        if (!(a.ridge >= 0.0)) throw SpecError("spec: algorithm1.ridge must be nonnegative");
    }
}

ExperimentSpec parse_experiment_spec(const std::string& json_text) {
    const json j = parse_json(json_text, "spec");
    const std::string w = "spec";
    check_keys(j, {"version", "target", "learner", "mlp", "algorithm1", "arms", "log_every", "eval_every",
                   "checkpoint_every", "seeds", "output_dir"},
               w);
    ExperimentSpec s;
    s.version = get_req<int>(j, "version", w);
    if (!j.contains("target")) throw SpecError("spec: missing 'target'");
    if (j.at("target").is_string()) {
        s.target = j.at("target").get<std::string>();
    } else if (j.at("target").is_object()) {
        s.target = j.at("target").dump();
        s.target_inline = true;
    } else {
        throw SpecError("spec.target: expected a path or an inline function spec");
    }
    const auto learner = get_or<std::string>(j, "learner", "mlp", w);
    if (learner == "mlp") {
        s.learner = Learner::Mlp;
    } else if (learner == "algorithm1") {
        s.learner = Learner::Algorithm1;
    } else {
        throw SpecError("spec.learner: expected mlp or algorithm1");
    }
    if (j.contains("mlp")) {
        const json& m = j.at("mlp");
        const std::string wm = "spec.mlp";
        check_keys(m, {"hidden", "lr", "max_iters", "stop_loss", "test_size", "tracked"}, wm);
        s.mlp.hidden = get_or(m, "hidden", s.mlp.hidden, wm);
        s.mlp.lr = get_or(m, "lr", s.mlp.lr, wm);
        s.mlp.max_iters = get_or(m, "max_iters", s.mlp.max_iters, wm);
        if (m.contains("stop_loss")) {
            s.mlp.stop_loss = m.at("stop_loss").is_null() ? std::nullopt
                                                          : std::optional<double>(get_req<double>(m, "stop_loss", wm));
        }
        s.mlp.test_size = get_or(m, "test_size", s.mlp.test_size, wm);
        if (m.contains("tracked")) {
            if (!m.at("tracked").is_array()) throw SpecError(wm + ".tracked: expected an array");
            for (const auto& t : m.at("tracked")) {
                check_keys(t, {"tag", "subset"}, wm + ".tracked[]");
                s.mlp.tracked.emplace_back(get_req<std::string>(t, "tag", wm + ".tracked[]"),
                                           get_req<Subset>(t, "subset", wm + ".tracked[]"));
            }
        }
    }
    if (j.contains("algorithm1")) {
        const json& a = j.at("algorithm1");
        const std::string wa = "spec.algorithm1";
        check_keys(a, {"n_hidden", "batch_size", "epsilon", "kappa", "phase1_steps", "phase2_steps", "theorem_delta",
                       "phase2_lr", "ridge"},
                   wa);
        auto& c = s.algorithm1;
        c.n_hidden = get_or(a, "n_hidden", c.n_hidden, wa);
        c.batch_size = get_or(a, "batch_size", c.batch_size, wa);
        c.epsilon = get_or(a, "epsilon", c.epsilon, wa);
        c.kappa = get_or(a, "kappa", c.kappa, wa);
        c.phase1_steps = get_or(a, "phase1_steps", c.phase1_steps, wa);
        c.phase2_steps = get_or(a, "phase2_steps", c.phase2_steps, wa);
        if (a.contains("theorem_delta")) {
            c.theorem_delta = a.at("theorem_delta").is_null()
                                  ? std::nullopt
                                  : std::optional<double>(get_req<double>(a, "theorem_delta", wa));
        }
        if (a.contains("phase2_lr") && !a.at("phase2_lr").is_null()) c.phase2_lr = get_req<double>(a, "phase2_lr", wa);
        c.ridge = get_or(a, "ridge", c.ridge, wa);
    }
    if (j.contains("arms")) {
        if (!j.at("arms").is_array()) throw SpecError("spec.arms: expected an array");
        for (const auto& a : j.at("arms")) {
            const std::string wa = "spec.arms[]";
            check_keys(a, {"name", "data", "loss", "alpha", "flip_prob"}, wa);
            ArmSpec arm;
            arm.name = get_req<std::string>(a, "name", wa);
            const auto data = get_or<std::string>(a, "data", "walk", wa);
            if (data != "walk" && data != "iid") throw SpecError(wa + ".data: expected walk or iid");
            arm.data = data == "walk" ? DataKind::Walk : DataKind::Iid;
            const auto loss = get_or<std::string>(a, "loss", "td", wa);
            if (loss != "td" && loss != "square") throw SpecError(wa + ".loss: expected td or square");
            arm.loss = loss == "td" ? LossKind::Td : LossKind::Square;
            arm.alpha = get_or(a, "alpha", arm.alpha, wa);
            arm.flip_prob = get_or(a, "flip_prob", arm.flip_prob, wa);
            s.arms.push_back(arm);
        }
    }
    s.log_every = get_or(j, "log_every", s.log_every, w);
    s.eval_every = get_or(j, "eval_every", s.eval_every, w);
    s.checkpoint_every = get_or(j, "checkpoint_every", s.checkpoint_every, w);
    s.seeds = get_req<std::vector<std::uint64_t>>(j, "seeds", w);
    s.output_dir = get_or(j, "output_dir", s.output_dir, w);
    s.validate();
    return s;
}

namespace {

json arm_json(const ArmSpec& a) {
    return {{"name", a.name}, {"data", to_cstr(a.data)}, {"loss", to_cstr(a.loss)}, {"alpha", a.alpha},
            {"flip_prob", a.flip_prob}};
}

json spec_to_json(const ExperimentSpec& s) {
    json j;
    j["version"] = s.version;
    j["target"] = s.target_inline ? json::parse(s.target) : json(s.target);
    j["learner"] = to_cstr(s.learner);
    json tracked = json::array();
    for (const auto& [tag, subset] : s.mlp.tracked) tracked.push_back({{"tag", tag}, {"subset", subset}});
    j["mlp"] = {{"hidden", s.mlp.hidden},
                {"lr", s.mlp.lr},
                {"max_iters", s.mlp.max_iters},
                {"stop_loss", s.mlp.stop_loss ? json(*s.mlp.stop_loss) : json(nullptr)},
                {"test_size", s.mlp.test_size},
                {"tracked", tracked}};
    const auto& a = s.algorithm1;
    j["algorithm1"] = {{"n_hidden", a.n_hidden},
                       {"batch_size", a.batch_size},
                       {"epsilon", a.epsilon},
                       {"kappa", a.kappa},
                       {"phase1_steps", a.phase1_steps},
                       {"phase2_steps", a.phase2_steps},
                       {"theorem_delta", a.theorem_delta ? json(*a.theorem_delta) : json(nullptr)},
                       {"phase2_lr", a.phase2_lr ? json(*a.phase2_lr) : json(nullptr)},
                       {"ridge", a.ridge}};
    json arms = json::array();
    for (const auto& arm : s.arms) arms.push_back(arm_json(arm));
    j["arms"] = arms;
    j["log_every"] = s.log_every;
    j["eval_every"] = s.eval_every;
    j["checkpoint_every"] = s.checkpoint_every;
    j["seeds"] = s.seeds;
    j["output_dir"] = s.output_dir;
    return j;
}

}  // namespace

std::string experiment_spec_json(const ExperimentSpec& spec) { return spec_to_json(spec).dump(2) + "\n"; }

BooleanFunction resolve_target(const ExperimentSpec& spec, const fs::path& base_dir) {
    if (spec.target_inline) return parse_function_spec(spec.target);
    fs::path p(spec.target);
    if (p.is_relative()) p = base_dir / p;
    if (!fs::exists(p)) throw SpecError("spec: target file " + p.string() + " does not exist");
    return load_function_spec(p);
}

TrainConfig mlp_train_config(const ExperimentSpec& spec, const ArmSpec& arm, std::uint64_t seed) {
    TrainConfig c;
    c.loss = arm.loss;
    c.alpha = arm.alpha;
    c.data = arm.data;
    c.flip_prob = arm.flip_prob;
    c.hidden = spec.mlp.hidden;
    c.lr = spec.mlp.lr;
    c.max_iters = spec.mlp.max_iters;
    c.stop_loss = spec.mlp.stop_loss.value_or(std::numeric_limits<double>::infinity());
    c.seed = seed;
    c.log_every = spec.log_every;
    c.eval_every = spec.eval_every;
    c.test_size = spec.mlp.test_size;
    c.tracked = spec.mlp.tracked;
    return c;
}

Algorithm1Config algorithm1_config(const ExperimentSpec& spec, const ArmSpec& arm, const BooleanFunction& f,
                                   std::uint64_t seed) {
    const auto& a = spec.algorithm1;
    const int d = f.dim();
    Algorithm1Config c;
    c.walk = WalkConfig{d, arm.flip_prob, seed};
    c.n_hidden = a.n_hidden;
    c.phase1.batch_size =
        a.batch_size ? a.batch_size : static_cast<std::size_t>(std::ceil(512.0 * d / (a.epsilon * a.epsilon)));
    c.phase1.init_scale = a.kappa;
    c.phase1.steps = a.phase1_steps;
    c.phase1.lr = theorem_phase1_lr(c.phase1.batch_size, d, a.kappa, std::max(1, f.support_size()));
    c.phase2.steps = a.phase2_steps;
    c.phase2.lr = a.phase2_lr;
    c.phase2.ridge = a.ridge;
    c.theorem_delta = a.theorem_delta;
    c.margin_epsilon = a.epsilon;
    c.log_every = spec.log_every;
    return c;
}

// ---------------------------------------------------------------------------
// Execution

std::size_t default_workers() {
    if (const char* env = std::getenv("TDJ_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) throw SpecError("TDJ_WORKERS must be a positive integer");
        return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job) {
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
    std::atomic<std::size_t> next{0};
    std::exception_ptr first;
    std::mutex mu;
    auto body = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                job(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!first) first = std::current_exception();
                next = n;
            }
        }
    };
    if (workers == 1) {
        body();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    }
    if (first) std::rethrow_exception(first);
}

RunRecord aggregate_records(const std::vector<RunRecord>& records) {
    if (records.empty()) throw std::invalid_argument("aggregate_records: no records");
    const auto& cols = records.front().columns();
    for (const auto& r : records) {
        if (r.columns() != cols) throw std::invalid_argument("aggregate_records: column sets differ");
    }
    std::set<std::uint64_t> grid;
    for (const auto& r : records) {
        for (const auto& row : r.rows()) grid.insert(row.samples);
    }
    std::vector<std::string> out_cols = {"n"};
    for (const auto& c : cols) {
        out_cols.push_back(c + "_mean");
        out_cols.push_back(c + "_std");
    }
    RunRecord out(out_cols);
    std::vector<std::size_t> cursor(records.size(), 0);
    for (const std::uint64_t s : grid) {
        std::vector<const std::vector<double>*> present;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& rows = records[i].rows();
            while (cursor[i] < rows.size() && rows[cursor[i]].samples <= s) ++cursor[i];
            if (cursor[i] > 0) present.push_back(&rows[cursor[i] - 1].values);
        }
        const double n = static_cast<double>(present.size());
        std::vector<double> values = {n};
        for (std::size_t c = 0; c < cols.size(); ++c) {
            double mean = 0.0;
            for (const auto* v : present) mean += (*v)[c];
            mean /= n;
            double ss = 0.0;
            for (const auto* v : present) ss += ((*v)[c] - mean) * ((*v)[c] - mean);
            values.push_back(mean);
            values.push_back(present.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0);
        }
        out.append(s, std::move(values));
    }
    return out;
}

namespace {

std::string record_csv(const RunRecord& r) {
    std::ostringstream out;
    r.write_csv(out);
    return out.str();
}

struct Job {
    const ArmSpec* arm;
    std::uint64_t seed;
    fs::path csv;
    fs::path checkpoint;
};

std::vector<std::string> run_comments(const ExperimentSpec& spec, const ArmSpec& arm, const BooleanFunction& f,
                                      std::uint64_t seed) {
    json cfg = spec_to_json(spec);
    cfg.erase("seeds");
    cfg.erase("arms");
    cfg.erase("output_dir");
    cfg.erase("checkpoint_every");
    cfg.erase(spec.learner == Learner::Mlp ? "algorithm1" : "mlp");
    cfg["target"] = json::parse(function_spec_json(f));
    return {"config: " + cfg.dump(), "arm: " + arm_json(arm).dump(), "seed: " + std::to_string(seed)};
}

void write_gnuplot(const ExperimentSpec& spec, const fs::path& dir, const std::vector<std::string>& columns) {
    const std::string metric = spec.learner == Learner::Mlp ? "test_acc" : "test_mse";
    std::size_t col = 0;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == metric) col = i;
    }
    // Aggregate layout: samples, n, then (mean, std) per column; gnuplot is 1-based.
    const std::size_t mean_col = 3 + 2 * col;
    std::ostringstream gp;
    gp << "set datafile separator ','\n"
       << "set xlabel 'fresh samples'\n"
       << "set ylabel '" << metric << "'\n"
       << "set key bottom right\n"
       << "set terminal pngcairo size 900,600\n"
       << "set output '" << metric << ".png'\n"
       << "plot ";
    for (std::size_t i = 0; i < spec.arms.size(); ++i) {
        const auto& name = spec.arms[i].name;
        if (i) gp << ", \\\n     ";
        gp << "'" << name << "_aggregate.csv' every ::1 using 1:" << mean_col << ":" << mean_col + 1
           << " with yerrorlines title '" << name << "'";
    }
    gp << "\n";
    write_file_atomic(dir / "plot.gp", gp.str());
}

}  // namespace

RunSummary run_experiment(const ExperimentSpec& spec, const BooleanFunction& f, const RunOptions& opts) {
    spec.validate();
    const fs::path out_dir(spec.output_dir);
    std::vector<Job> jobs;
    for (const auto& arm : spec.arms) {
        fs::create_directories(out_dir / arm.name);
        for (const auto seed : spec.seeds) {
            const fs::path base = out_dir / arm.name / ("seed_" + std::to_string(seed));
            jobs.push_back({&arm, seed, fs::path(base.string() + ".csv"), fs::path(base.string() + ".ckpt.json")});
        }
    }

    std::vector<RunRecord> records(jobs.size());
    std::vector<char> complete(jobs.size(), 0);
    std::mutex progress_mu;
    auto report = [&](const std::string& msg) {
        if (!opts.progress) return;
        std::lock_guard lock(progress_mu);
        opts.progress(msg);
    };

    parallel_for(jobs.size(), opts.workers, [&](std::size_t i) {
        const Job& job = jobs[i];
        const std::string label = job.arm->name + "/seed_" + std::to_string(job.seed);
        RunRecord record;
        if (spec.learner == Learner::Algorithm1) {
            auto result = run_algorithm1(f, algorithm1_config(spec, *job.arm, f, job.seed), job.seed);
            record = std::move(result.record);
        } else {
            const TrainConfig cfg = mlp_train_config(spec, *job.arm, job.seed);
            std::string fingerprint;
            for (const auto& line : run_comments(spec, *job.arm, f, job.seed)) fingerprint += line + "\n";
            TrainState state;
            bool resumed = false;
            if (!opts.fresh && fs::exists(job.checkpoint)) {
                const json ck = json::parse(read_file(job.checkpoint));
                if (ck.at("fingerprint").get<std::string>() != fingerprint) {
                    throw SpecError("checkpoint " + job.checkpoint.string() +
                                    " belongs to a different configuration; rerun with --fresh");
                }
                state = load_train_state(ck.at("state").get<std::string>());
                resumed = true;
            } else {
                state = train_init(f, cfg);
            }
            report((resumed ? "resume " : "start ") + label + " at " + std::to_string(state.iteration));
            std::uint64_t events = 0;
            bool suspended = false;
            TrainHooks hooks;
            hooks.on_log = [&](const TrainState& s) {
                ++events;
                const bool suspend = opts.suspend_after && events >= *opts.suspend_after && !s.finished;
                if (!s.finished && spec.checkpoint_every && (events % spec.checkpoint_every == 0 || suspend)) {
                    json ck = {{"fingerprint", fingerprint}, {"state", save_train_state(s)}};
                    write_file_atomic(job.checkpoint, ck.dump());
                }
                if (suspend) suspended = true;
                return !suspend;
            };
            train_continue(f, cfg, state, hooks);
            if (suspended) {
                report("suspend " + label + " at " + std::to_string(state.iteration));
                return;
            }
            record = std::move(state.record);
        }
        record.comments = run_comments(spec, *job.arm, f, job.seed);
        write_file_atomic(job.csv, record_csv(record));
        if (fs::exists(job.checkpoint)) fs::remove(job.checkpoint);
        records[i] = std::move(record);
        complete[i] = 1;
        report("done " + label);
    });

    RunSummary summary;
    std::vector<std::string> columns;
    for (std::size_t a = 0; a < spec.arms.size(); ++a) {
        std::vector<RunRecord> arm_records;
        bool all = true;
        for (std::size_t s = 0; s < spec.seeds.size(); ++s) {
            const std::size_t i = a * spec.seeds.size() + s;
            if (complete[i]) {
                summary.run_csvs.push_back(jobs[i].csv);
                arm_records.push_back(records[i]);
            } else {
                all = false;
                ++summary.suspended;
            }
        }
        if (!all) continue;
        columns = arm_records.front().columns();
        RunRecord agg = aggregate_records(arm_records);
        agg.comments = {"aggregate of " + std::to_string(arm_records.size()) + " seeds",
                        "arm: " + arm_json(spec.arms[a]).dump()};
        const fs::path path = out_dir / (spec.arms[a].name + "_aggregate.csv");
        write_file_atomic(path, record_csv(agg));
        summary.aggregate_csvs.push_back(path);
    }
    if (opts.gnuplot_script && summary.suspended == 0) write_gnuplot(spec, out_dir, columns);
    return summary;
}

// ---------------------------------------------------------------------------
// Presets

namespace {

struct Preset {
    const char* name;
    const char* description;
    ExperimentSpec (*make)();
};

std::string parity_target(int dim, Subset support) { return json{{"dim", dim}, {"parity_support", support}}.dump(); }

std::string junta7_target(int dim) {
    // 1/2 x1..x5 (1 + x6 + x7 - x6 x7)
    json terms = json::array();
    terms.push_back({{"subset", {1, 2, 3, 4, 5}}, {"coeff", 0.5}});
    terms.push_back({{"subset", {1, 2, 3, 4, 5, 6}}, {"coeff", 0.5}});
    terms.push_back({{"subset", {1, 2, 3, 4, 5, 7}}, {"coeff", 0.5}});
    terms.push_back({{"subset", {1, 2, 3, 4, 5, 6, 7}}, {"coeff", -0.5}});
    return json{{"dim", dim}, {"fourier", terms}}.dump();
}

ExperimentSpec mlp_base(std::string target, std::vector<int> hidden, std::uint64_t max_iters, std::string out) {
    ExperimentSpec s;
    s.target = std::move(target);
    s.target_inline = true;
    s.learner = Learner::Mlp;
    s.mlp.hidden = std::move(hidden);
    s.mlp.max_iters = max_iters;
    s.mlp.tracked = {{"x1", {1}}, {"x6", {6}}, {"x1_5", {1, 2, 3, 4, 5}}};
    s.seeds = {0, 1, 2, 3, 4};
    s.output_dir = std::move(out);
    return s;
}

std::vector<ArmSpec> fig1_arms() {
    return {{"walk_td", DataKind::Walk, LossKind::Td, 0.9, 0.9},
            {"iid_td", DataKind::Iid, LossKind::Td, 0.9, 0.9},
            {"iid_square", DataKind::Iid, LossKind::Square, 0.0, 0.9}};
}

std::vector<ArmSpec> fig3_arms() {
    return {{"walk_square", DataKind::Walk, LossKind::Square, 0.0, 0.9},
            {"walk_td", DataKind::Walk, LossKind::Td, 0.9, 0.9},
            {"iid_square", DataKind::Iid, LossKind::Square, 0.0, 0.9}};
}

const Preset kPresets[] = {
    {"fig1-desk", "d=30 5-parity, 64-64-32, walk+TD vs iid+TD vs iid+square, 5e5 samples, 5 seeds",
     [] {
         auto s = mlp_base(parity_target(30, {1, 2, 3, 4, 5}), mlp_preset("desk"), 500'000, "out/fig1-desk");
         s.mlp.stop_loss = std::nullopt;
         s.arms = fig1_arms();
         return s;
     }},
    {"fig3-desk", "d=30 5-parity, 64-64-32, walk+square vs walk+TD vs iid+square, 5e5 samples, 5 seeds",
     [] {
         auto s = mlp_base(parity_target(30, {1, 2, 3, 4, 5}), mlp_preset("desk"), 500'000, "out/fig3-desk");
         s.mlp.stop_loss = std::nullopt;
         s.arms = fig3_arms();
         return s;
     }},
    {"junta7-desk", "d=30 7-junta, 64-64-32, fig1 arms, 1e6 samples, 5 seeds",
     [] {
         auto s = mlp_base(junta7_target(30), mlp_preset("desk"), 1'000'000, "out/junta7-desk");
         s.arms = fig1_arms();
         return s;
     }},
    {"fig1-paper", "d=50 5-parity, 512-512-64, fig1 arms, 1e6 samples, stop at loss 0.01",
     [] {
         auto s = mlp_base(parity_target(50, {1, 2, 3, 4, 5}), mlp_preset("paper"), 1'000'000, "out/fig1-paper");
         s.arms = fig1_arms();
         return s;
     }},
    {"fig1-paper-main", "as fig1-paper with 512-1024-64 hidden layers",
     [] {
         auto s = mlp_base(parity_target(50, {1, 2, 3, 4, 5}), mlp_preset("paper-main"), 1'000'000,
                           "out/fig1-paper-main");
         s.arms = fig1_arms();
         return s;
     }},
    {"junta7-paper", "d=50 7-junta, 512-512-64, fig1 arms, 1e6 samples",
     [] {
         auto s = mlp_base(junta7_target(50), mlp_preset("paper"), 1'000'000, "out/junta7-paper");
         s.arms = fig1_arms();
         return s;
     }},
    {"algorithm1-desk", "d=30 3-parity, layerwise SGD with N=400, epsilon=1, p=0.5, T2=1e6, 5 seeds",
     [] {
         ExperimentSpec s;
         s.target = parity_target(30, {1, 2, 3});
         s.target_inline = true;
         s.learner = Learner::Algorithm1;
         s.arms = {{"walk", DataKind::Walk, LossKind::Td, 1.0, 0.5}};
         s.seeds = {0, 1, 2, 3, 4};
         s.output_dir = "out/algorithm1-desk";
         return s;
     }},
    {"smoke", "d=10 2-parity, 16-16-8, walk+TD vs iid+square, 2e4 samples, 2 seeds",
     [] {
         auto s = mlp_base(parity_target(10, {1, 2}), {16, 16, 8}, 20'000, "out/smoke");
         s.mlp.tracked = {{"x1", {1}}, {"x1_2", {1, 2}}};
         s.mlp.test_size = 1024;
         s.mlp.stop_loss = std::nullopt;
         s.arms = {{"walk_td", DataKind::Walk, LossKind::Td, 0.9, 0.9},
                   {"iid_square", DataKind::Iid, LossKind::Square, 0.0, 0.9}};
         s.seeds = {0, 1};
         s.log_every = 1000;
         s.checkpoint_every = 2;
         return s;
     }},
};

const Preset& find_preset(const std::string& name) {
    for (const auto& p : kPresets) {
        if (name == p.name) return p;
    }
    throw SpecError("unknown preset '" + name + "'");
}

}  // namespace

std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const auto& p : kPresets) out.emplace_back(p.name);
    return out;
}

std::string preset_description(const std::string& name) { return find_preset(name).description; }

ExperimentSpec make_preset(const std::string& name) {
    ExperimentSpec s = find_preset(name).make();
    s.validate();
    return s;
}

}  // namespace tdj
