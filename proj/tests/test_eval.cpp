#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "peda/eval.hpp"
#include "peda/pareto.hpp"

using namespace peda;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_of(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("peda_eval_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::shared_ptr<PolicyModel> small_policy(const char* env_id = "allocate2", std::size_t T = 10) {
    GenConfig g;
    g.env = Environment::from_id(env_id, T);
    g.n_traj = 200;
    g.seed = 1;
    g.ensemble_size = 21;
    Dataset ds = collect(g);
    PolicyConfig cfg = PolicyConfig::defaults_for(Algo::MORvS);
    cfg.hidden_size = 24;
    cfg.n_layer = 2;
    cfg.batch_size = 16;
    cfg.learning_rate = 1e-3;
    cfg.training_steps = 300;
    return std::make_shared<PolicyModel>(train(ds, PolicyKind::parse("morvs-p"), cfg).model);
}

EvalConfig small_config(std::size_t grid, std::size_t reps = 2, std::size_t seeds = 2) {
    EvalConfig c;
    c.grid_count = grid;
    c.reps = reps;
    c.seeds = seeds;
    c.master_seed = 42;
    return c;
}

} // namespace

TEST_CASE("preference grids") {
    auto three = preference_grid(2, 3);
    REQUIRE(three.size() == 3);
    CHECK(three[0].weights() == Vec{0, 1});
    CHECK(three[1].weights() == Vec{0.5, 0.5});
    CHECK(three[2].weights() == Vec{1, 0});
    auto fine = preference_grid(2, 501);
    for (std::size_t k = 1; k < fine.size(); ++k) CHECK(fine[k][0] - fine[k - 1][0] == doctest::Approx(0.002).epsilon(1e-9));
    CHECK(preference_grid(3, 325).size() == 325);
    CHECK(preference_grid(3, 330).size() == 325);
    CHECK_THROWS(preference_grid(4, 100));
    CHECK_THROWS(preference_grid(2, 1));
    CHECK(EvalConfig::default_grid(2) == 501);
    CHECK(EvalConfig::default_grid(3) == 325);
}

TEST_CASE("config validation") {
    EvalConfig c;
    CHECK_NOTHROW(c.validate());
    c.tolerance = 0.09;
    CHECK_THROWS(c.validate());
    c.tolerance = 0.05;
    c.reps = 0;
    CHECK_THROWS(c.validate());
    c.reps = 5;
    c.grid_count = 1;
    CHECK_THROWS(c.validate());
}

TEST_CASE("scripted expert rollouts") {
    for (std::size_t T : {10u, 30u}) {
        Environment env = Environment::from_id("allocate2", T);
        ExpertAgent expert(env);
        Vec g = rollout(expert, env, Preference({0.5, 0.5}), 3);
        double expected = 10.0 * std::sqrt(0.5) * double(T) / 10.0;
        CHECK(std::abs(g[0] - expected) < 1e-6);
        CHECK(std::abs(g[1] - expected) < 1e-6);
    }
    Environment goal = Environment::from_id("goal2d", 20);
    ExpertAgent ge(goal);
    CHECK(rollout(ge, goal, Preference({0.3, 0.7}), 5) == rollout(ge, goal, Preference({0.3, 0.7}), 5));
    CHECK(rollout(ge, goal, Preference({0.3, 0.7}), 5) != rollout(ge, goal, Preference({0.3, 0.7}), 6));
}

TEST_CASE("expert evaluation matches the analytic front hypervolume") {
    Environment env = Environment::from_id("allocate2", 10);
    EvalReport r = evaluate(ExpertAgent(env), env, small_config(101, 1, 1));
    std::vector<Vec> analytic;
    for (const auto& w : preference_grid(2, 101)) {
        double norm = std::hypot(w[0], w[1]);
        analytic.push_back({10.0 * w[0] / norm, 10.0 * w[1] / norm});
    }
    double hv_true = hypervolume_exact(ParetoSet::from_points(analytic));
    CHECK(std::abs(r.hypervolume - hv_true) <= 0.01 * hv_true);
    CHECK(r.hypervolume <= hv_true + 1e-9);
    CHECK(r.pareto.size() == 101);
    CHECK(r.agent == "expert");
}

TEST_CASE("replicates on a deterministic environment give identical medians") {
    Environment env = Environment::from_id("allocate2", 10);
    auto model = small_policy();
    EvalReport one = evaluate(*model, env, small_config(21, 1, 1));
    EvalReport five = evaluate(*model, env, small_config(21, 5, 1));
    CHECK(one.medians == five.medians);
}

TEST_CASE("strict metrics, tolerance labels and the analytic upper bound") {
    Environment env = Environment::from_id("allocate2", 10);
    auto model = small_policy();
    EvalConfig cfg = small_config(41);
    EvalReport r = evaluate(*model, env, cfg);
    CHECK(r.medians.size() == 41);
    CHECK(r.hypervolume == doctest::Approx(hypervolume_exact(ParetoSet::from_points(r.medians))).epsilon(1e-12));
    CHECK(r.sparsity == doctest::Approx(sparsity(ParetoSet::from_points(r.medians))).epsilon(1e-12));
    CHECK(r.pareto == pareto_indices(r.medians));
    CHECK(r.per_seed.size() == 2);

    std::vector<Vec> front;
    for (const auto& w : preference_grid(2, 2001)) {
        double norm = std::hypot(w[0], w[1]);
        front.push_back({10.0 * w[0] / norm, 10.0 * w[1] / norm});
    }
    // The continuous front's hypervolume is pi*100/4; the fine grid is a lower bound.
    CHECK(r.hypervolume <= 25.0 * M_PI + 1e-9);
    CHECK(hypervolume_exact(ParetoSet::from_points(front)) <= 25.0 * M_PI);

    auto lo = tolerant_labels(r.medians, 0.03), hi = tolerant_labels(r.medians, 0.08);
    std::size_t dom_lo = 0, dom_hi = 0;
    for (std::size_t i = 0; i < lo.size(); ++i) {
        dom_lo += lo[i] == 0;
        dom_hi += hi[i] == 0;
        if (lo[i]) CHECK(hi[i]);
    }
    CHECK(dom_hi <= dom_lo);
    CHECK(r.dominated_count() == std::size_t(std::count(r.tolerant.begin(), r.tolerant.end(), 0)));

    std::vector<Vec> pts{{1, 1}, {2, 2}, {3, 0.5}};
    CHECK(tolerant_labels(pts, 0.0) == std::vector<std::uint8_t>{0, 1, 1});
    CHECK(tolerant_labels(std::vector<Vec>{{1.9, 1.9}, {2, 2}}, 0.06) == std::vector<std::uint8_t>{1, 1});
}

TEST_CASE("per-seed aggregation") {
    Environment env = Environment::from_id("goal2d", 15);
    BehavioralEnsemble ens = build_ensemble(env, 11);
    EvalReport r = evaluate(BehavioralAgent(env, ens), env, small_config(11, 3, 3));
    REQUIRE(r.per_seed.size() == 3);
    double mean = 0.0;
    for (const auto& s : r.per_seed) mean += s.hypervolume / 3.0;
    CHECK(r.hypervolume_seeds.mean == doctest::Approx(mean).epsilon(1e-12));
    double var = 0.0;
    for (const auto& s : r.per_seed) var += (s.hypervolume - mean) * (s.hypervolume - mean) / 2.0;
    CHECK(r.hypervolume_seeds.std_error == doctest::Approx(std::sqrt(var / 3.0)).epsilon(1e-9));
    for (std::size_t k = 0; k < r.medians.size(); ++k) {
        double m0 = 0.0;
        for (const auto& s : r.per_seed) m0 += s.medians[k][0] / 3.0;
        CHECK(r.medians[k][0] == doctest::Approx(m0).epsilon(1e-12));
    }
}

TEST_CASE("evaluation is deterministic and thread-count independent") {
    Environment env = Environment::from_id("goal2d", 12);
    auto model = small_policy("goal2d", 12);
    EvalConfig cfg = small_config(15);
    EvalReport a = evaluate(*model, env, cfg);
    cfg.threads = 3;
    EvalReport b = evaluate(*model, env, cfg);
    CHECK(report_to_json(a) == report_to_json(b));
    cfg.master_seed = 43;
    CHECK(report_to_json(evaluate(*model, env, cfg)) != report_to_json(a));

    EvalReport back = report_from_json(report_to_json(a));
    CHECK(back.medians == a.medians);
    CHECK(back.hypervolume == a.hypervolume);
    CHECK(back.tolerant == a.tolerant);
    CHECK(report_to_json(back) == report_to_json(a));
}

TEST_CASE("policy agent return-to-go bookkeeping and dimension checks") {
    Environment env = Environment::from_id("allocate2", 10);
    auto model = small_policy();
    PolicyAgent agent(model, env, 0.8);
    Preference w({0.3, 0.7});
    agent.reset(w);
    Vec target = predict_target(*model->target, w);
    CHECK(agent.current_rtg()[0] == doctest::Approx(0.8 * target[0]).epsilon(1e-15));
    EnvState s = env.reset(0);
    Vec a = agent.act(s);
    auto step = env.step(s, a);
    agent.observe(a, step.reward);
    CHECK(agent.current_rtg()[1] == doctest::Approx(0.8 * target[1] - step.reward[1]).epsilon(1e-12));

    agent.set_target_override(Vec{100.0, 100.0});
    agent.reset(w);
    CHECK(agent.current_rtg() == Vec{80.0, 80.0});

    CHECK_THROWS_AS(PolicyAgent(model, Environment::from_id("allocate3", 10)), DimensionError);
    CHECK_THROWS_AS(PolicyAgent(model, Environment::from_id("goal2d", 10)), DimensionError);
    CHECK_THROWS_AS(evaluate(*model, Environment::from_id("allocate3", 10), small_config(10)), DimensionError);
    CHECK(rollout(*model, env, w, 9) == rollout(*model, env, w, 9));
}

TEST_CASE("front export") {
    Environment env = Environment::from_id("allocate2", 10);
    auto model = small_policy();
    EvalReport r = evaluate(*model, env, small_config(31));
    fs::path dir = scratch("export");

    export_front(r, dir / "front.csv", FrontFormat::Csv);
    std::string csv = slurp(dir / "front.csv");
    CHECK(count_of(csv, "\n") == 31 + 1);
    CHECK(csv.rfind("index,w1,w2,G1,G2,pareto,tolerant", 0) == 0);
    auto pts = read_front_csv(dir / "front.csv");
    REQUIRE(pts.size() == 31);
    std::vector<std::size_t> pareto;
    double hv = 0.0, sp = 0.0;
    compute_metrics(pts, Vec{0, 0}, pareto, hv, sp);
    CHECK(std::abs(hv - r.hypervolume) <= 1e-9);
    CHECK(std::abs(sp - r.sparsity) <= 1e-9);
    CHECK(pareto == r.pareto);

    export_front(r, dir / "front.svg", FrontFormat::Svg);
    std::string svg = slurp(dir / "front.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(count_of(svg, "<circle") == 31);
    CHECK(count_of(svg, "class=\"undominated\"") == r.pareto.size());
    CHECK(count_of(svg, "<") == count_of(svg, ">"));

    Environment a3 = Environment::from_id("allocate3", 5);
    EvalReport r3 = evaluate(ExpertAgent(a3), a3, small_config(15, 1, 1));
    CHECK_THROWS_AS(export_front(r3, dir / "front3.svg", FrontFormat::Svg), ExportError);
    CHECK_NOTHROW(export_front(r3, dir / "front3.csv", FrontFormat::Csv));
    CHECK(read_front_csv(dir / "front3.csv").front().size() == 3);

    std::ofstream(dir / "plain.csv") << "3,1\n2,2\n1,3\n";
    auto plain = read_front_csv(dir / "plain.csv");
    REQUIRE(plain.size() == 3);
    CHECK(plain[1] == Vec{2, 2});
}
