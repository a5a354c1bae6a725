#include "peda/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "peda/datagen.hpp"
#include "peda/eval.hpp"
#include "peda/pareto.hpp"
#include "peda/policies.hpp"
#include "peda/prefs.hpp"

namespace peda::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Vec parse_list(const std::string& text, const char* flag) {
    Vec out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(cell, &used));
            if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw UsageError(std::string(flag) + ": '" + text + "' is not a comma-separated list of numbers");
        }
    }
    return out;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::string utc_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::size_t resolve_threads(std::size_t flag) {
    if (flag > 0) return flag;
    if (const char* env = std::getenv("PEDA_THREADS")) {
        try {
            long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// JSON scalar or array -> the string CLI11 would have received on the command line.
std::string config_value(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
        std::string out;
        for (const auto& e : v) {
            if (!out.empty()) out += ',';
            out += config_value(e);
        }
        return out;
    }
    if (v.is_object()) return v.dump();
    return v.dump();
}

// Config-file keys fill only options not given on the command line.
void apply_config(CLI::App* sub, const std::string& path) {
    if (path.empty()) return;
    json cfg;
    try {
        cfg = json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw UsageError("--config " + path + ": " + e.what());
    }
    if (!cfg.is_object()) throw UsageError("--config " + path + ": expected a JSON object");
    for (const auto& [key, value] : cfg.items()) {
        std::string flag = "--" + key;
        std::replace(flag.begin() + 2, flag.end(), '_', '-');
        CLI::Option* opt = sub->get_option_no_throw(flag);
        if (opt == nullptr) throw UsageError("--config " + path + ": unknown key '" + key + "'");
        if (opt->count() > 0) continue;
        opt->add_result(config_value(value));
        opt->run_callback();
    }
}

void require(CLI::App* sub, const std::string& flag) {
    if (sub->get_option(flag)->count() == 0) throw CLI::RequiredError(flag);
}

json resolved_options(CLI::App* sub) {
    json out = json::object();
    for (const CLI::Option* opt : sub->get_options()) {
        std::string name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
        if (name == "help" || name == "config" || name.empty()) continue;
        if (opt->count() > 0) {
            auto r = opt->results();
            out[name] = r.size() == 1 ? json(r.front()) : json(r);
        } else {
            out[name] = opt->get_default_str();
        }
    }
    return out;
}

fs::path manifest_beside(const fs::path& file) {
    fs::path dir = file.has_parent_path() ? file.parent_path() : fs::path(".");
    return dir / (file.stem().string() + ".manifest.json");
}

struct Manifest {
    std::string command;
    json config;
    json resolved = json::object();
    json inputs = json::array();
    json outputs = json::array();
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void input(const fs::path& p) { inputs.push_back({{"path", p.string()}, {"fnv1a", content_hash(p)}}); }
    void output(const fs::path& p) { outputs.push_back(p.string()); }

    void write(const fs::path& where) const {
        double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        json m{{"command", command},     {"tool_version", kToolVersion}, {"config", config},
               {"resolved", resolved},   {"inputs", inputs},            {"outputs", outputs},
               {"wall_clock_seconds", wall}, {"timestamp", utc_now()}};
        write_text(where, m.dump(2) + "\n");
    }
};

Environment make_env(const std::string& id, std::size_t horizon, const std::string& params) {
    Environment env = Environment::from_id(id, horizon);
    return params.empty() ? env : env.with_params_json(params);
}

} // namespace

std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << h;
    return ss.str();
}

std::string content_hash(const fs::path& path) {
    if (!fs::is_directory(path)) return fnv1a_hex(read_text(path));
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(path)) {
        if (!e.is_regular_file()) continue;
        std::string name = e.path().filename().string();
        if (name == "manifest.json" || name.ends_with(".manifest.json")) continue;
        files.push_back(fs::relative(e.path(), path));
    }
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) {
        all += f.generic_string();
        all += '\0';
        all += fnv1a_hex(read_text(path / f));
    }
    return fnv1a_hex(all);
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Preference-conditioned offline multi-objective RL toolkit", "peda"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);
    app.option_defaults()->always_capture_default();

    std::string config_path;
    std::size_t threads = 0;
    std::uint64_t seed = 0;
    auto common = [&](CLI::App* sub) {
        sub->option_defaults()->always_capture_default();
        sub->add_option("--config", config_path, "JSON file of option values (command line wins)");
        sub->add_option("--threads", threads, "Worker threads (default: PEDA_THREADS or all cores)");
        sub->add_option("--seed", seed, "Master seed");
    };

    // ---------------------------------------------------------------- generate
    struct {
        std::string env = "allocate2", env_params, quality = "expert", pref_dist = "high", amateur_mode = "scale";
        std::string pref_min, pref_max, out;
        std::size_t horizon = 50, n_traj = 1000, ensemble = 0, probe_reps = 3;
        double perturb_prob = 0.65, scale_low = 0.35, scale_high = 1.65;
    } gen;
    CLI::App* g = app.add_subcommand("generate", "Collect an offline dataset from the behavioral ensemble");
    common(g);
    g->add_option("--env", gen.env, "allocate2 | allocate3 | goal2d")
        ->check(CLI::IsMember({"allocate2", "allocate3", "goal2d"}));
    g->add_option("--env-params", gen.env_params, "Environment parameters as a JSON object");
    g->add_option("--horizon", gen.horizon, "Episode length T")->check(CLI::PositiveNumber);
    g->add_option("--quality", gen.quality)->check(CLI::IsMember({"expert", "amateur"}));
    g->add_option("--pref-dist", gen.pref_dist)->check(CLI::IsMember({"high", "med", "low"}));
    g->add_option("--n-traj", gen.n_traj)->check(CLI::PositiveNumber);
    g->add_option("--ensemble", gen.ensemble, "Ensemble size B (0: 101 for two objectives, 66 for three)");
    g->add_option("--probe-reps", gen.probe_reps)->check(CLI::PositiveNumber);
    g->add_option("--perturb-prob", gen.perturb_prob)->check(CLI::Range(0.0, 1.0));
    g->add_option("--scale-low", gen.scale_low);
    g->add_option("--scale-high", gen.scale_high);
    g->add_option("--amateur-mode", gen.amateur_mode)->check(CLI::IsMember({"scale", "mixed-uniform"}));
    g->add_option("--pref-min", gen.pref_min, "Lower preference bounds w1,w2[,w3]");
    g->add_option("--pref-max", gen.pref_max, "Upper preference bounds w1,w2[,w3]");
    g->add_option("--out", gen.out, "Output dataset directory");

    // ---------------------------------------------------------------- train
    struct {
        std::string algo, data, rtg_mode = "vector", out;
        std::optional<std::size_t> steps, context, warmup;
        std::size_t hidden = 512, layers = 3, heads = 1, batch = 64, log_every = 1000;
        double dropout = 0.1, lr = 1e-4, wd = 1e-3, quantile = 0.1;
        bool emit_target = false;
    } tr;
    CLI::App* t = app.add_subcommand("train", "Train a policy on a dataset");
    common(t);
    t->add_option("--algo", tr.algo)->check(CLI::IsMember({"morvs-p", "morvs", "bc-p", "bc", "modt-p", "modt"}));
    t->add_option("--data", tr.data, "Dataset directory or file");
    t->add_option("--steps", tr.steps, "Optimizer steps (default 20000, MODT 50000)");
    t->add_option("--rtg-mode", tr.rtg_mode)->check(CLI::IsMember({"vector", "scalar"}));
    t->add_option("--hidden", tr.hidden)->check(CLI::PositiveNumber);
    t->add_option("--layers", tr.layers)->check(CLI::PositiveNumber);
    t->add_option("--heads", tr.heads)->check(CLI::PositiveNumber);
    t->add_option("--context", tr.context, "Context length K (default 1 MORvS, 20 otherwise)");
    t->add_option("--batch", tr.batch)->check(CLI::PositiveNumber);
    t->add_option("--dropout", tr.dropout);
    t->add_option("--lr", tr.lr);
    t->add_option("--wd", tr.wd);
    t->add_option("--warmup", tr.warmup, "Warm-up steps (default 0 MORvS, 4000 BC, 10000 MODT)");
    t->add_option("--quantile", tr.quantile, "Top fraction per preference cell for the return target");
    t->add_option("--log-every", tr.log_every);
    t->add_flag("--emit-target", tr.emit_target, "Also write target.json");
    t->add_option("--out", tr.out, "Output model directory");

    // ---------------------------------------------------------------- eval
    struct {
        std::string model, agent = "policy", env, env_params, ref, out;
        std::optional<std::size_t> horizon;
        std::size_t grid = 0, reps = 5, seeds = 3, ensemble = 0;
        double tolerance = 0.05, beta = 1.0;
    } ev;
    CLI::App* e = app.add_subcommand("eval", "Evaluate a model or reference agent over a preference grid");
    common(e);
    e->add_option("--model", ev.model, "Model directory");
    e->add_option("--agent", ev.agent, "policy | expert | behavioral")
        ->check(CLI::IsMember({"policy", "expert", "behavioral"}));
    e->add_option("--env", ev.env)->check(CLI::IsMember({"allocate2", "allocate3", "goal2d"}));
    e->add_option("--env-params", ev.env_params);
    e->add_option("--horizon", ev.horizon, "Episode length (default: the model's)");
    e->add_option("--grid", ev.grid, "Grid points (0: 501 for two objectives, 325 for three)");
    e->add_option("--reps", ev.reps)->check(CLI::PositiveNumber);
    e->add_option("--seeds", ev.seeds)->check(CLI::PositiveNumber);
    e->add_option("--ref", ev.ref, "Reference point v1,v2[,v3] (default origin)");
    e->add_option("--tolerance", ev.tolerance)->check(CLI::Range(0.0, 0.08));
    e->add_option("--beta", ev.beta, "Scale applied to the fitted return target");
    e->add_option("--ensemble", ev.ensemble, "Ensemble size for --agent behavioral");
    e->add_option("--out", ev.out, "Report JSON path");

    // ---------------------------------------------------------------- metrics
    struct {
        std::string front, ref, out;
    } me;
    CLI::App* m = app.add_subcommand("metrics", "Hypervolume and sparsity of a front CSV");
    common(m);
    m->add_option("--front", me.front, "CSV with one solution per line");
    m->add_option("--ref", me.ref, "Reference point (default origin)");
    m->add_option("--out", me.out, "Also write the metrics JSON here");

    // ---------------------------------------------------------------- front
    struct {
        std::string report, csv, svg;
    } fr;
    CLI::App* f = app.add_subcommand("front", "Export a report's front as CSV and/or SVG");
    common(f);
    f->add_option("--report", fr.report);
    f->add_option("--csv", fr.csv);
    f->add_option("--svg", fr.svg);

    // ---------------------------------------------------------------- inspect
    std::string inspect_path;
    CLI::App* in = app.add_subcommand("inspect", "Print dataset or model header fields and statistics");
    common(in);
    in->add_option("path", inspect_path, "Dataset or model directory");

    CLI::App* active = nullptr;
    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
        for (CLI::App* s : {g, t, e, m, f, in})
            if (s->parsed()) active = s;
        apply_config(active, config_path);
        threads = resolve_threads(threads);

        if (active == g) {
            require(g, "--out");
            Manifest man{"generate", resolved_options(g)};
            GenConfig c;
            c.env = make_env(gen.env, gen.horizon, gen.env_params);
            c.quality = parse_quality(gen.quality);
            c.amateur.perturb_prob = gen.perturb_prob;
            c.amateur.scale_low = gen.scale_low;
            c.amateur.scale_high = gen.scale_high;
            c.amateur.mode = gen.amateur_mode == "scale" ? AmateurConfig::Mode::Scale : AmateurConfig::Mode::MixedUniform;
            c.pref_dist = PrefDist::parse(gen.pref_dist);
            if (!gen.pref_min.empty()) c.constraint.min = parse_list(gen.pref_min, "--pref-min");
            if (!gen.pref_max.empty()) c.constraint.max = parse_list(gen.pref_max, "--pref-max");
            c.n_traj = gen.n_traj;
            c.seed = seed;
            c.ensemble_size = gen.ensemble;
            c.probe_reps = gen.probe_reps;
            c.threads = static_cast<unsigned>(threads);
            Dataset ds = collect(c);
            fs::path dir = gen.out;
            fs::create_directories(dir);
            write_dataset(ds, dir);
            man.resolved = {{"env", c.env.id()}, {"env_params", json::parse(c.env.params_json())},
                            {"ensemble", ds.meta.ensemble_size}, {"threads", threads}};
            man.output(dataset_binary_path(dir));
            man.output(dataset_sidecar_path(dir));
            man.write(dir / "manifest.json");
            out << "wrote " << ds.trajectories.size() << " trajectories to " << dir.string() << "\n";
        } else if (active == t) {
            require(t, "--algo");
            require(t, "--data");
            require(t, "--out");
            Manifest man{"train", resolved_options(t)};
            Dataset ds = read_dataset(tr.data);
            man.input(tr.data);
            PolicyKind kind = PolicyKind::parse(tr.algo, parse_rtg_mode(tr.rtg_mode));
            PolicyConfig c = PolicyConfig::defaults_for(kind.algo);
            if (tr.steps) c.training_steps = *tr.steps;
            if (tr.context) c.context = *tr.context;
            if (tr.warmup) c.warmup_steps = *tr.warmup;
            c.hidden_size = tr.hidden;
            c.n_layer = tr.layers;
            c.n_head = tr.heads;
            c.batch_size = tr.batch;
            c.dropout = tr.dropout;
            c.learning_rate = tr.lr;
            c.weight_decay = tr.wd;
            c.target_quantile = tr.quantile;
            c.seed = seed;
            c.validate(kind.algo);
            TrainOptions opts;
            opts.progress_every = tr.log_every;
            opts.progress = [&](std::size_t step, double loss) {
                out << "step " << step << " loss " << loss << "\n" << std::flush;
            };
            TrainResult res = train(ds, kind, c, opts);
            fs::path dir = tr.out;
            save_model(res.model, dir);
            std::ostringstream log;
            log << std::setprecision(17) << "step,loss\n";
            for (std::size_t i = 0; i < res.loss_log.size(); ++i) log << i + 1 << ',' << res.loss_log[i] << '\n';
            write_text(dir / "loss.csv", log.str());
            man.output(dir / "model.json");
            man.output(dir / "params.bin");
            man.output(dir / "loss.csv");
            if (tr.emit_target) {
                if (!res.model.target) throw std::runtime_error("--emit-target: " + kind.name() + " has no return target");
                write_text(dir / "target.json", target_to_json(*res.model.target) + "\n");
                man.output(dir / "target.json");
            }
            man.resolved = {{"kind", kind.name()},           {"rtg_mode", to_string(kind.rtg_mode)},
                            {"context", c.context},          {"warmup_steps", c.warmup_steps},
                            {"training_steps", c.training_steps}, {"hidden_size", c.hidden_size},
                            {"n_layer", c.n_layer},          {"n_head", c.n_head},
                            {"seed", c.seed}};
            man.write(dir / "manifest.json");
            out << "trained " << kind.name() << " for " << res.loss_log.size() << " steps, final loss "
                << (res.loss_log.empty() ? 0.0 : res.loss_log.back()) << "\n";
        } else if (active == e) {
            require(e, "--env");
            require(e, "--out");
            if (ev.agent == "policy" && ev.model.empty()) throw UsageError("eval: --model is required for --agent policy");
            Manifest man{"eval", resolved_options(e)};
            std::shared_ptr<const PolicyModel> model;
            if (ev.agent == "policy") {
                model = std::make_shared<const PolicyModel>(load_model(ev.model));
                man.input(ev.model);
            }
            std::size_t horizon = ev.horizon ? *ev.horizon : (model ? model->dims().horizon : 50);
            Environment env = make_env(ev.env, horizon, ev.env_params);
            EvalConfig c;
            c.grid_count = ev.grid;
            c.reps = ev.reps;
            c.seeds = ev.seeds;
            if (!ev.ref.empty()) c.reference = parse_list(ev.ref, "--ref");
            c.tolerance = ev.tolerance;
            c.master_seed = seed;
            c.threads = threads;
            std::unique_ptr<Agent> agent;
            if (ev.agent == "expert") {
                agent = std::make_unique<ExpertAgent>(env);
            } else if (ev.agent == "behavioral") {
                std::size_t b = ev.ensemble ? ev.ensemble : default_ensemble_size(env.n_objectives());
                agent = std::make_unique<BehavioralAgent>(env, build_ensemble(env, b, 3, seed));
            } else {
                agent = std::make_unique<PolicyAgent>(model, env, ev.beta);
            }
            EvalReport report = evaluate(*agent, env, c);
            fs::path path = ev.out;
            write_text(path, report_to_json(report) + "\n");
            man.output(path);
            man.resolved = {{"env", env.id()}, {"horizon", horizon}, {"grid_count", report.grid.size()},
                            {"reference", report.config.reference}, {"threads", threads}};
            man.write(manifest_beside(path));
            out << std::setprecision(10) << "hypervolume " << report.hypervolume << " (per-seed mean "
                << report.hypervolume_seeds.mean << " +/- " << report.hypervolume_seeds.std_error << "), sparsity "
                << report.sparsity << ", " << report.pareto.size() << "/" << report.grid.size() << " undominated\n";
        } else if (active == m) {
            require(m, "--front");
            std::vector<Vec> points = read_front_csv(me.front);
            if (points.empty()) throw std::runtime_error(me.front + ": no solutions");
            Vec ref = me.ref.empty() ? Vec(points[0].size(), 0.0) : parse_list(me.ref, "--ref");
            if (ref.size() != points[0].size())
                throw UsageError("--ref has " + std::to_string(ref.size()) + " values, front has " +
                                 std::to_string(points[0].size()) + " objectives");
            ParetoSet set = ParetoSet::from_points(points, ref);
            json res{{"hypervolume", hypervolume_exact(set)},
                     {"sparsity", sparsity(set)},
                     {"n_solutions", set.solutions.size()}};
            out << res.dump() << "\n";
            if (!me.out.empty()) {
                Manifest man{"metrics", resolved_options(m)};
                man.input(me.front);
                write_text(me.out, res.dump(2) + "\n");
                man.output(me.out);
                man.write(manifest_beside(me.out));
            }
        } else if (active == f) {
            require(f, "--report");
            if (fr.csv.empty() && fr.svg.empty()) throw UsageError("front: give --csv and/or --svg");
            Manifest man{"front", resolved_options(f)};
            EvalReport report = report_from_json(read_text(fr.report));
            man.input(fr.report);
            if (!fr.csv.empty()) {
                export_front(report, fr.csv, FrontFormat::Csv);
                man.output(fr.csv);
            }
            if (!fr.svg.empty()) {
                export_front(report, fr.svg, FrontFormat::Svg);
                man.output(fr.svg);
            }
            man.write(manifest_beside(fr.csv.empty() ? fr.svg : fr.csv));
            out << "exported " << report.medians.size() << " points\n";
        } else if (active == in) {
            if (inspect_path.empty()) throw CLI::RequiredError("path");
            fs::path p = inspect_path;
            if (fs::exists(p / "model.json")) {
                PolicyModel model = load_model(p);
                const auto& d = model.dims();
                out << "model " << model.kind().name() << " (rtg " << to_string(model.kind().rtg_mode) << ")\n"
                    << "  hidden " << model.config().hidden_size << ", layers " << model.config().n_layer
                    << ", heads " << model.config().n_head << ", context " << model.config().context << "\n"
                    << "  objectives " << d.n_obj << ", state " << d.state_dim << ", action " << d.action_dim
                    << ", horizon " << d.horizon << "\n"
                    << "  parameters " << model.params().total_size() << "\n"
                    << "  return target " << (model.target ? "fitted" : "none") << "\n";
            } else {
                Dataset ds = read_dataset(p);
                std::size_t steps = 0;
                for (const auto& tr_ : ds.trajectories) steps += tr_.steps.size();
                double avg = ds.trajectories.empty() ? 0.0 : double(steps) / double(ds.trajectories.size());
                out << "format      D4M1 v" << kDatasetVersion << "\n"
                    << "env         " << ds.meta.env_id << " " << ds.meta.env_params_json << "\n"
                    << "quality     " << ds.meta.quality << "\n"
                    << "pref_dist   " << ds.meta.pref_dist << "\n"
                    << "seed        " << ds.meta.seed << "\n"
                    << "ensemble    " << ds.meta.ensemble_size << "\n"
                    << "horizon     " << ds.meta.horizon << "\n"
                    << "dims        n_obj " << ds.n_obj << ", state " << ds.state_dim << ", action " << ds.action_dim
                    << "\n"
                    << "created     " << ds.meta.created << "\n"
                    << "trajectories " << ds.trajectories.size() << "\n"
                    << "avg length  " << std::fixed << std::setprecision(2) << avg << "\n"
                    << std::defaultfloat << std::setprecision(8);
                for (std::size_t i = 0; i < ds.n_obj; ++i)
                    out << "return " << i + 1 << "    [" << ds.stats.min[i] << ", " << ds.stats.max[i] << "]\n";
            }
        }
    } catch (const CLI::CallForHelp&) {
        out << (active ? active->help() : app.help());
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& ex) {
        CLI::App* shown = active;
        if (!shown)
            for (CLI::App* s : {g, t, e, m, f, in})
                if (s->parsed()) shown = s;
        if (ex.get_exit_code() == 0) {
            out << (shown ? shown->help() : app.help());
            return 0;
        }
        err << "error: " << ex.what() << "\n\n" << (shown ? shown->help() : app.help());
        return 1;
    } catch (const UsageError& ex) {
        err << "error: " << ex.what() << "\n\n" << (active ? active->help() : app.help());
        return 1;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
        return 2;
    }
    return 0;
}

int dispatch(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(args, std::cout, std::cerr);
}

} // namespace peda::cli
