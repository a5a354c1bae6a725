#include "peda/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "peda/pareto.hpp"
#include "peda/prefs.hpp"
#include "peda/target.hpp"

namespace peda {

namespace {

using json = nlohmann::json;

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

MeanStderr mean_stderr(const std::vector<double>& xs) {
    MeanStderr out;
    if (xs.empty()) return out;
    double sum = 0.0;
    for (double x : xs) sum += x;
    out.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - out.mean) * (x - out.mean);
        double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
        out.std_error = sd / std::sqrt(static_cast<double>(xs.size()));
    }
    return out;
}

std::size_t resolve_threads(std::size_t requested) {
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

void check_compatible(const EnvDims& model, const Environment& env) {
    EnvDims e = EnvDims::of(env);
    if (model.n_obj != e.n_obj || model.state_dim != e.state_dim || model.action_dim != e.action_dim)
        throw DimensionError("model expects (objectives, state, action) = (" + std::to_string(model.n_obj) + ", " +
                             std::to_string(model.state_dim) + ", " + std::to_string(model.action_dim) +
                             ") but environment " + env.id() + " has (" + std::to_string(e.n_obj) + ", " +
                             std::to_string(e.state_dim) + ", " + std::to_string(e.action_dim) + ")");
}

} // namespace

BehavioralAgent::BehavioralAgent(Environment env, BehavioralEnsemble ensemble)
    : env_(std::move(env)), ensemble_(std::make_shared<const BehavioralEnsemble>(std::move(ensemble))) {
    if (ensemble_->size() == 0) throw std::invalid_argument("behavioral ensemble is empty");
}

void BehavioralAgent::reset(const Preference& pref) { member_ = closest_agent(*ensemble_, pref); }

Vec BehavioralAgent::act(const EnvState& state) {
    return env_.expert_action(state, ensemble_->members[member_].target);
}

PolicyAgent::PolicyAgent(std::shared_ptr<const PolicyModel> model, const Environment& env, double beta)
    : model_(std::move(model)), beta_(beta) {
    if (!model_) throw std::invalid_argument("PolicyAgent needs a model");
    check_compatible(model_->dims(), env);
    if (!std::isfinite(beta_)) throw std::invalid_argument("target scale must be finite");
}

void PolicyAgent::reset(const Preference& pref) {
    if (pref.size() != model_->dims().n_obj) throw DimensionError("preference size does not match the model");
    pref_ = pref;
    states_.clear();
    actions_.clear();
    rtgs_.clear();
    rtg_.assign(pref.size(), 0.0);
    if (!model_->kind().uses_returns()) return;
    if (override_) {
        if (override_->size() != pref.size()) throw DimensionError("target override size does not match the model");
        rtg_ = *override_;
    } else {
        if (!model_->target) throw std::invalid_argument("model has no fitted return target");
        rtg_ = predict_target(*model_->target, pref);
    }
    for (double& v : rtg_) v *= beta_;
}

Vec PolicyAgent::act(const EnvState& state) {
    states_.push_back(state.observation);
    rtgs_.push_back(rtg_);
    WindowView w;
    w.pref = &pref_;
    w.states = states_;
    w.actions = actions_;
    if (model_->kind().uses_returns()) w.rtgs = rtgs_;
    return model_->predict_action(w);
}

void PolicyAgent::observe(std::span<const double> action, std::span<const double> reward) {
    actions_.emplace_back(action.begin(), action.end());
    for (std::size_t i = 0; i < rtg_.size() && i < reward.size(); ++i) rtg_[i] -= reward[i];
}

std::vector<Preference> preference_grid(std::size_t n_obj, std::size_t count) {
    if (count < 2) throw std::invalid_argument("preference grid needs at least 2 points");
    if (n_obj < 2 || n_obj > 3) throw UnsupportedDimension("preference grids support 2 or 3 objectives");
    return simplex_grid(n_obj, count);
}

Vec rollout(Agent& agent, const Environment& env, const Preference& pref, std::uint64_t eval_seed) {
    if (pref.size() != env.n_objectives()) throw DimensionError("preference size does not match the environment");
    agent.reset(pref);
    EnvState st = env.reset(eval_seed);
    while (!st.done) {
        Vec a = agent.act(st);
        StepResult r = env.step(st, a);
        agent.observe(a, r.reward);
        st = std::move(r.state);
    }
    return st.cumulative;
}

Vec rollout(const PolicyModel& model, const Environment& env, const Preference& pref, std::uint64_t eval_seed,
            double beta) {
    // Non-owning alias; the agent does not outlive this call.
    PolicyAgent agent(std::shared_ptr<const PolicyModel>(&model, [](const PolicyModel*) {}), env, beta);
    return rollout(agent, env, pref, eval_seed);
}

std::size_t EvalConfig::default_grid(std::size_t n_obj) { return n_obj == 3 ? 325 : 501; }

void EvalConfig::validate() const {
    if (grid_count != 0 && grid_count < 2) throw std::invalid_argument("grid count must be >= 2");
    if (reps < 1) throw std::invalid_argument("reps must be >= 1");
    if (seeds < 1) throw std::invalid_argument("seeds must be >= 1");
    if (!(tolerance >= 0.0 && tolerance <= 0.08)) throw std::invalid_argument("tolerance must be in [0, 0.08]");
}

std::size_t EvalReport::dominated_count() const {
    return static_cast<std::size_t>(std::count(tolerant.begin(), tolerant.end(), std::uint8_t{0}));
}

void compute_metrics(std::span<const Vec> points, const Vec& reference, std::vector<std::size_t>& pareto,
                     double& hypervolume, double& sparsity_out) {
    pareto = pareto_indices(points);
    ParetoSet set = ParetoSet::from_points(points, reference);
    hypervolume = hypervolume_exact(set);
    sparsity_out = sparsity(set);
}

std::vector<std::uint8_t> tolerant_labels(std::span<const Vec> points, double tolerance) {
    std::vector<std::uint8_t> out(points.size(), 1);
    for (std::size_t i = 0; i < points.size(); ++i) {
        Vec q = points[i];
        for (double& v : q) v += tolerance * std::abs(v);
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (j != i && dominates(points[j], q)) {
                out[i] = 0;
                break;
            }
        }
    }
    return out;
}

EvalReport evaluate(const Agent& agent, const Environment& env, const EvalConfig& config) {
    config.validate();
    std::size_t n = env.n_objectives();
    EvalReport report;
    report.env_id = env.id();
    report.agent = agent.name();
    report.config = config;
    if (report.config.reference.empty()) report.config.reference.assign(n, 0.0);
    if (report.config.reference.size() != n) throw DimensionError("reference point size does not match objectives");
    std::size_t count = config.grid_count == 0 ? EvalConfig::default_grid(n) : config.grid_count;
    report.config.grid_count = count;
    report.grid = preference_grid(n, count);

    const std::size_t G = report.grid.size();
    const std::size_t S = config.seeds;
    std::vector<std::vector<Vec>> medians(S, std::vector<Vec>(G));
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(resolve_threads(config.threads));

    auto worker = [&](std::size_t tid) {
        try {
            std::unique_ptr<Agent> local = agent.clone();
            for (std::size_t task = next++; task < S * G; task = next++) {
                std::size_t s = task / G, g = task % G;
                std::vector<Vec> reps;
                for (std::size_t r = 0; r < config.reps; ++r)
                    reps.push_back(rollout(*local, env, report.grid[g], mix_seed(config.master_seed, s, g, r)));
                Vec med(n);
                for (std::size_t i = 0; i < n; ++i) {
                    std::vector<double> col;
                    for (const auto& v : reps) col.push_back(v[i]);
                    med[i] = median(std::move(col));
                }
                medians[s][g] = std::move(med);
            }
        } catch (...) {
            errors[tid] = std::current_exception();
            next = S * G;
        }
    };
    if (errors.size() == 1) {
        worker(0);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < errors.size(); ++t) pool.emplace_back(worker, t);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<double> hvs, sps;
    for (std::size_t s = 0; s < S; ++s) {
        SeedResult r;
        r.medians = std::move(medians[s]);
        compute_metrics(r.medians, report.config.reference, r.pareto, r.hypervolume, r.sparsity);
        hvs.push_back(r.hypervolume);
        sps.push_back(r.sparsity);
        report.per_seed.push_back(std::move(r));
    }
    report.hypervolume_seeds = mean_stderr(hvs);
    report.sparsity_seeds = mean_stderr(sps);

    report.medians.assign(G, Vec(n, 0.0));
    for (std::size_t g = 0; g < G; ++g) {
        for (std::size_t i = 0; i < n; ++i) {
            double sum = 0.0;
            for (std::size_t s = 0; s < S; ++s) sum += report.per_seed[s].medians[g][i];
            report.medians[g][i] = sum / static_cast<double>(S);
        }
    }
    compute_metrics(report.medians, report.config.reference, report.pareto, report.hypervolume, report.sparsity);
    report.tolerant = tolerant_labels(report.medians, config.tolerance);
    return report;
}

EvalReport evaluate(const PolicyModel& model, const Environment& env, const EvalConfig& config, double beta) {
    PolicyAgent agent(std::shared_ptr<const PolicyModel>(&model, [](const PolicyModel*) {}), env, beta);
    return evaluate(agent, env, config);
}

std::string report_to_json(const EvalReport& r) {
    json grid = json::array();
    for (const auto& p : r.grid) grid.push_back(p.weights());
    json seeds = json::array();
    for (const auto& s : r.per_seed)
        seeds.push_back({{"medians", s.medians}, {"pareto", s.pareto}, {"hypervolume", s.hypervolume},
                         {"sparsity", s.sparsity}});
    json j{
        {"env", r.env_id},
        {"agent", r.agent},
        {"config", {{"grid_count", r.config.grid_count}, {"reps", r.config.reps}, {"seeds", r.config.seeds},
                    {"reference", r.config.reference}, {"tolerance", r.config.tolerance},
                    {"master_seed", r.config.master_seed}}},
        {"grid", grid},
        {"medians", r.medians},
        {"pareto", r.pareto},
        {"hypervolume", r.hypervolume},
        {"sparsity", r.sparsity},
        {"tolerant", r.tolerant},
        {"dominated_count", r.dominated_count()},
        {"hypervolume_seeds", {{"mean", r.hypervolume_seeds.mean}, {"std_error", r.hypervolume_seeds.std_error}}},
        {"sparsity_seeds", {{"mean", r.sparsity_seeds.mean}, {"std_error", r.sparsity_seeds.std_error}}},
        {"per_seed", seeds},
    };
    return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
    EvalReport r;
    try {
        json j = json::parse(text);
        r.env_id = j.at("env");
        r.agent = j.at("agent");
        const json& c = j.at("config");
        r.config.grid_count = c.at("grid_count");
        r.config.reps = c.at("reps");
        r.config.seeds = c.at("seeds");
        r.config.reference = c.at("reference").get<Vec>();
        r.config.tolerance = c.at("tolerance");
        r.config.master_seed = c.at("master_seed");
        for (const auto& w : j.at("grid")) r.grid.emplace_back(w.get<Vec>());
        r.medians = j.at("medians").get<std::vector<Vec>>();
        r.pareto = j.at("pareto").get<std::vector<std::size_t>>();
        r.hypervolume = j.at("hypervolume");
        r.sparsity = j.at("sparsity");
        r.tolerant = j.at("tolerant").get<std::vector<std::uint8_t>>();
        r.hypervolume_seeds = {j.at("hypervolume_seeds").at("mean"), j.at("hypervolume_seeds").at("std_error")};
        r.sparsity_seeds = {j.at("sparsity_seeds").at("mean"), j.at("sparsity_seeds").at("std_error")};
        for (const auto& s : j.at("per_seed")) {
            SeedResult sr;
            sr.medians = s.at("medians").get<std::vector<Vec>>();
            sr.pareto = s.at("pareto").get<std::vector<std::size_t>>();
            sr.hypervolume = s.at("hypervolume");
            sr.sparsity = s.at("sparsity");
            r.per_seed.push_back(std::move(sr));
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed report: ") + e.what());
    }
    if (r.grid.size() != r.medians.size() || r.tolerant.size() != r.medians.size())
        throw std::invalid_argument("malformed report: grid, medians and labels differ in length");
    return r;
}

void export_front(const EvalReport& report, const std::filesystem::path& path, FrontFormat format) {
    std::size_t n = report.medians.empty() ? 0 : report.medians[0].size();
    std::vector<std::uint8_t> on_front(report.medians.size(), 0);
    for (auto i : report.pareto) on_front.at(i) = 1;

    std::ostringstream out;
    if (format == FrontFormat::Csv) {
        out << std::setprecision(17) << "index";
        for (std::size_t i = 1; i <= n; ++i) out << ",w" << i;
        for (std::size_t i = 1; i <= n; ++i) out << ",G" << i;
        out << ",pareto,tolerant\n";
        for (std::size_t g = 0; g < report.medians.size(); ++g) {
            out << g;
            for (double w : report.grid[g].weights()) out << ',' << w;
            for (double v : report.medians[g]) out << ',' << v;
            out << ',' << int(on_front[g]) << ',' << int(report.tolerant[g]) << '\n';
        }
    } else {
        if (n != 2)
            throw ExportError("SVG export supports two objectives only; use CSV for " + std::to_string(n) +
                              "-objective fronts");
        const double size = 480.0, margin = 40.0;
        double xmax = 0.0, ymax = 0.0;
        for (const auto& p : report.medians) {
            xmax = std::max(xmax, p[0]);
            ymax = std::max(ymax, p[1]);
        }
        if (xmax <= 0.0) xmax = 1.0;
        if (ymax <= 0.0) ymax = 1.0;
        auto sx = [&](double v) { return margin + (size - 2 * margin) * std::max(0.0, v) / xmax; };
        auto sy = [&](double v) { return size - margin - (size - 2 * margin) * std::max(0.0, v) / ymax; };
        out << std::setprecision(6);
        out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
            << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
            << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n"
            << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
            << "  <line x1=\"" << margin << "\" y1=\"" << size - margin << "\" x2=\"" << size - margin << "\" y2=\""
            << size - margin << "\" stroke=\"black\"/>\n"
            << "  <line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
            << size - margin << "\" stroke=\"black\"/>\n"
            << "  <text x=\"" << size / 2 << "\" y=\"" << size - 8 << "\" text-anchor=\"middle\">G1</text>\n"
            << "  <text x=\"12\" y=\"" << size / 2 << "\" text-anchor=\"middle\">G2</text>\n";
        for (std::size_t g = 0; g < report.medians.size(); ++g) {
            const auto& p = report.medians[g];
            bool keep = on_front[g] != 0;
            out << "  <circle class=\"" << (keep ? "undominated" : "dominated") << "\" cx=\"" << sx(p[0])
                << "\" cy=\"" << sy(p[1]) << "\" r=\"3\" fill=\"" << (keep ? "#d62728" : "#7f7f7f") << "\"/>\n";
        }
        out << "</svg>\n";
    }
    std::ofstream f(path);
    f << out.str();
    if (!f) throw ExportError("cannot write " + path.string());
}

std::vector<Vec> read_front_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            auto b = cell.find_first_not_of(" \t\r");
            auto e = cell.find_last_not_of(" \t\r");
            cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
        }
        return cells;
    };
    auto parse = [](const std::string& s, double& v) {
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        return ec == std::errc() && p == s.data() + s.size() && !s.empty();
    };

    std::vector<Vec> points;
    std::vector<std::size_t> columns;
    bool first = true;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        auto cells = split(line);
        if (first) {
            first = false;
            double tmp;
            if (!std::all_of(cells.begin(), cells.end(), [&](const std::string& c) { return parse(c, tmp); })) {
                for (std::size_t c = 0; c < cells.size(); ++c)
                    if (cells[c].size() > 1 && cells[c][0] == 'G') columns.push_back(c);
                if (columns.empty()) throw std::invalid_argument(path.string() + ": header has no G columns");
                continue;
            }
        }
        Vec p;
        if (columns.empty()) {
            for (const auto& c : cells) {
                double v;
                if (!parse(c, v))
                    throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": bad number '" + c + "'");
                p.push_back(v);
            }
        } else {
            for (auto c : columns) {
                double v;
                if (c >= cells.size() || !parse(cells[c], v))
                    throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": bad row");
                p.push_back(v);
            }
        }
        if (!points.empty() && p.size() != points[0].size())
            throw DimensionError(path.string() + ":" + std::to_string(lineno) + ": inconsistent column count");
        points.push_back(std::move(p));
    }
    return points;
}

} // namespace peda
