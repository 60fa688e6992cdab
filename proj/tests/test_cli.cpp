#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "plast/experiment.hpp"

using namespace plast;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("plast_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string str() const { return path.string(); }
};

ExperimentConfig tiny_config(ExperimentKind kind) {
    ExperimentConfig cfg;
    cfg.name = "tiny";
    cfg.kind = kind;
    cfg.activations = {{.kind = ActKind::ReLU},
                       {.kind = ActKind::LeakyReLU, .alpha = 0.7}};
    cfg.widths = {12, 16, 16, 5};
    cfg.stream.kind = StreamKind::PermutedInput;
    cfg.stream.tasks = 3;
    cfg.stream.subset = 100;
    cfg.stream.batch_size = 16;
    cfg.schedule = {};
    cfg.epochs = 20;
    cfg.seeds = {1, 2};
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("experiment kind names round trip") {
    for (ExperimentKind k :
         {ExperimentKind::GoldilocksSweep, ExperimentKind::ShockStudy,
          ExperimentKind::ContinualBenchmark, ExperimentKind::RlMetrics,
          ExperimentKind::PropertyGrid})
        CHECK(experiment_kind_from_name(experiment_kind_name(k)) == k);
    CHECK_THROWS_AS(experiment_kind_from_name("bogus"), std::runtime_error);
}

TEST_CASE("config round trips losslessly") {
    ExperimentConfig cfg = tiny_config(ExperimentKind::GoldilocksSweep);
    cfg.activations.push_back({.kind = ActKind::SmoothLeaky,
                               .alpha = 1.0 / 3.0,
                               .c = 5,
                               .p = 3});
    cfg.lr = 0.0003;
    nlohmann::json j = cfg;
    ExperimentConfig back = j.get<ExperimentConfig>();
    CHECK(nlohmann::json(back) == j);
    CHECK(back.activations[2].alpha == cfg.activations[2].alpha);  // bit-exact
    CHECK(config_hash(back) == config_hash(cfg));

    ExperimentConfig other = cfg;
    other.lr = 0.001;
    CHECK(config_hash(other) != config_hash(cfg));
}

TEST_CASE("config file errors carry context") {
    TempDir d;
    std::string p = d.str() + "/bad.json";
    {
        std::ofstream out(p);
        out << R"({"kind": "goldilocks_sweep"})";
    }
    CHECK_THROWS_WITH_AS(load_config(p), doctest::Contains("name"),
                         std::runtime_error);
    {
        std::ofstream out(p);
        out << "{not json";
    }
    CHECK_THROWS_WITH_AS(load_config(p), doctest::Contains("parse"),
                         std::runtime_error);
    CHECK_THROWS_AS(load_config(d.str() + "/missing.json"), std::runtime_error);

    ExperimentConfig cfg = tiny_config(ExperimentKind::ShockStudy);
    std::string good = d.str() + "/good.json";
    save_config(cfg, good);
    CHECK(config_hash(load_config(good)) == config_hash(cfg));
}

TEST_CASE("checkpoints round trip bit-exactly") {
    NetworkSpec spec;
    spec.widths = {6, 8, 8, 4};
    spec.activations = {{.kind = ActKind::PReLU, .scope = PreluScope::Neuron},
                        {.kind = ActKind::Rational, .deg_p = 3, .deg_q = 2}};
    NetworkParams p = init_network(spec, 99);
    TempDir d;
    std::string path = d.str() + "/ckpt.json";
    save_params(spec, p, path);
    NetworkParams q = load_params(spec, path);
    for (size_t l = 0; l < p.W.size(); ++l) {
        CHECK((p.W[l] - q.W[l]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((p.b[l] - q.b[l]).cwiseAbs().maxCoeff() == 0.0);
    }
    for (size_t l = 0; l < p.act.size(); ++l) {
        CHECK(p.act[l].alpha == q.act[l].alpha);
        CHECK(p.act[l].num_coeffs == q.act[l].num_coeffs);
        CHECK(p.act[l].den_coeffs == q.act[l].den_coeffs);
    }

    NetworkSpec other = spec;
    other.widths[1] = 10;
    CHECK_THROWS_WITH_AS(load_params(other, path), doctest::Contains("widths"),
                         std::runtime_error);
}

TEST_CASE("activation labels distinguish sweep cells") {
    CHECK(act_label({.kind = ActKind::ReLU}) == "relu");
    CHECK(act_label({.kind = ActKind::LeakyReLU, .alpha = 0.7}) ==
          "leaky_relu[alpha=0.7]");
    CHECK(act_label({.kind = ActKind::RReLU, .lower = 0.1, .upper = 0.3}) ==
          "rrelu[0.1;0.3]");
    CHECK(act_label({.kind = ActKind::PReLU, .scope = PreluScope::Layer}) ==
          "prelu[scope=layer]");
    CHECK(act_label({.kind = ActKind::SmoothLeaky, .alpha = 0.1, .c = 5, .p = 3}) ==
          "smooth_leaky[alpha=0.1;c=5;p=3]");
}

TEST_CASE("property grid experiment writes the full table") {
    ExperimentConfig cfg;
    cfg.name = "props";
    cfg.kind = ExperimentKind::PropertyGrid;
    TempDir d;
    RunOutcome o = run_experiment(cfg, d.str());
    CHECK(o.rows.size() == 34);  // sbar + dbw for all 17 rows
    std::string props = slurp(d.str() + "/props.csv");
    CHECK(std::count(props.begin(), props.end(), '\n') == 18);  // header + rows
    CHECK(fs::exists(d.str() + "/manifest.json"));
    CHECK(fs::exists(d.str() + "/times.json"));
}

TEST_CASE("goldilocks sweep runs deterministically across job counts") {
    ExperimentConfig cfg = tiny_config(ExperimentKind::GoldilocksSweep);
    TempDir a, b;
    RunOutcome oa = run_experiment(cfg, a.str(), false, 1);
    RunOutcome ob = run_experiment(cfg, b.str(), false, 4);
    CHECK(oa.rows.size() == 2 * 2 * 6);  // acts x seeds x metrics
    for (const auto& c : oa.cells) CHECK(c.status == "ok");
    CHECK(slurp(a.str() + "/results.csv") == slurp(b.str() + "/results.csv"));

    // rerun refuses without the overwrite flag, succeeds with it
    CHECK_THROWS_WITH_AS(run_experiment(cfg, a.str()),
                         doctest::Contains("overwrite"), std::runtime_error);
    RunOutcome oc = run_experiment(cfg, a.str(), true, 1);
    CHECK(oc.rows.size() == oa.rows.size());
}

TEST_CASE("continual benchmark emits accuracy-matrix metrics") {
    ExperimentConfig cfg = tiny_config(ExperimentKind::ContinualBenchmark);
    cfg.activations.resize(1);
    cfg.seeds = {7};
    TempDir d;
    RunOutcome o = run_experiment(cfg, d.str());
    REQUIRE(o.cells.size() == 1);
    CHECK(o.cells[0].status == "ok");
    std::vector<std::string> metrics;
    for (const auto& r : o.rows) metrics.push_back(r.metric);
    for (const char* m : {"acc_T", "bwt", "taoa", "aoa_last"})
        CHECK(std::find(metrics.begin(), metrics.end(), m) != metrics.end());
}

TEST_CASE("shock study emits traces and recovery metrics") {
    ExperimentConfig cfg = tiny_config(ExperimentKind::ShockStudy);
    cfg.activations = {{.kind = ActKind::ReLU}};
    cfg.seeds = {3};
    cfg.epochs = 22;
    TempDir d;
    RunOutcome o = run_experiment(cfg, d.str());
    REQUIRE(o.cells.size() == 1);
    CHECK(o.cells[0].status == "ok");
    int traces = 0;
    for (const auto& e : fs::directory_iterator(d.str()))
        if (e.path().filename().string().rfind("trace_", 0) == 0) ++traces;
    CHECK(traces == 1);
    std::vector<std::string> metrics;
    for (const auto& r : o.rows) metrics.push_back(r.metric);
    for (const char* m : {"ausc_mean", "peak_sf_mean", "sf_nonrecovery_rate",
                          "dbw", "sbar", "final_accuracy"})
        CHECK(std::find(metrics.begin(), metrics.end(), m) != metrics.end());
}

TEST_CASE("cell failures are isolated in the manifest") {
    ExperimentConfig cfg = tiny_config(ExperimentKind::GoldilocksSweep);
    cfg.stream.per_class = 5;    // base of 25 samples
    cfg.stream.subset = 1000;    // every task requests far more
    TempDir d;
    RunOutcome o = run_experiment(cfg, d.str());
    CHECK(o.rows.empty());
    for (const auto& c : o.cells) CHECK(c.status != "ok");
    // the manifest records each failure; results.csv still parses
    CHECK(read_results(d.str()).empty());
    nlohmann::json m;
    std::ifstream(d.str() + "/manifest.json") >> m;
    CHECK(m["cells"].size() == o.cells.size());
}

TEST_CASE("empty sweep warns and writes an empty results table") {
    ExperimentConfig cfg = tiny_config(ExperimentKind::GoldilocksSweep);
    cfg.activations.clear();
    TempDir d;
    RunOutcome o = run_experiment(cfg, d.str());
    CHECK(o.rows.empty());
    REQUIRE(o.warnings.size() == 1);
    CHECK(o.warnings[0].find("empty sweep") != std::string::npos);
}

TEST_CASE("rl metrics experiment matches the direct computations") {
    TempDir d;
    std::string csv = d.str() + "/returns.csv";
    {
        std::ofstream out(csv);
        out << "run,environment,cycle,phase,episode_index,return\n";
        for (const char* env : {"cheetah", "hopper"})
            for (int cyc : {1, 3})
                for (int ep = 0; ep < 10; ++ep) {
                    out << "relu," << env << ',' << cyc << ",train," << ep << ','
                        << 10.0 * cyc + ep << "\n";
                    out << "relu," << env << ',' << cyc << ",test," << ep << ','
                        << 8.0 * cyc << "\n";
                }
    }
    ExperimentConfig cfg;
    cfg.name = "rl";
    cfg.kind = ExperimentKind::RlMetrics;
    cfg.returns_csv = csv;
    RunOutcome o = run_experiment(cfg, d.str() + "/out");
    ReturnLog log = ReturnLog::from_csv(csv);
    REQUIRE(o.rows.size() == 3);
    CHECK(o.rows[0].metric == "plasticity_score");
    CHECK(o.rows[0].value == doctest::Approx(plasticity_score(log, "relu")));
    CHECK(o.rows[1].value == doctest::Approx(gap_summary(log, "relu").median));
}

TEST_CASE("summary report aggregates across seeds") {
    ExperimentConfig cfg = tiny_config(ExperimentKind::GoldilocksSweep);
    TempDir d;
    run_experiment(cfg, d.str());
    auto paths = write_report(d.str(), "summary");
    REQUIRE(paths.size() == 1);
    std::string rep = slurp(paths[0]);
    CHECK(rep.find("activation,metric,n,mean") == 0);
    CHECK(rep.find(",2,") != std::string::npos);  // two seeds aggregated
    // both seeds present -> no degenerate rows
    CHECK(rep.find(",1\n") == std::string::npos);

    cfg.seeds = {1};
    run_experiment(cfg, d.str(), true);
    rep = slurp(write_report(d.str(), "summary")[0]);
    CHECK(rep.find(",1\n") != std::string::npos);  // single seed flagged

    CHECK_THROWS_AS(write_report(d.str(), "bogus"), std::runtime_error);
}

TEST_CASE("floor-class report groups the paper families") {
    TempDir d;
    {
        std::ofstream out(d.str() + "/results.csv");
        out << "experiment,config_hash,activation,seed,metric,value,units\n";
        out << "e,h,relu,1,ausc_mean,4,sf*epochs\n";
        out << "e,h,tanh,1,ausc_mean,6,sf*epochs\n";
        out << "e,h,leaky_relu[alpha=0.7],1,ausc_mean,1,sf*epochs\n";
        out << "e,h,rrelu[0.1;0.3],1,ausc_mean,2,sf*epochs\n";
        out << "e,h,selu[alpha=1.673],1,ausc_mean,9,sf*epochs\n";
    }
    std::string rep = slurp(write_report(d.str(), "floor_class")[0]);
    CHECK(rep.find("zero_floor,ausc_mean,2,5") != std::string::npos);
    CHECK(rep.find("non_zero_floor,ausc_mean,2,1.5") != std::string::npos);
    CHECK(rep.find("other,ausc_mean,1,9") != std::string::npos);
}

TEST_CASE("correlation report reproduces a direct pearson call") {
    TempDir d;
    std::vector<double> dbw = {0.5, 0.01, 0.2, 0.4};
    std::vector<double> ausc = {4.0, 0.5, 1.5, 3.2};
    {
        std::ofstream out(d.str() + "/results.csv");
        out << "experiment,config_hash,activation,seed,metric,value,units\n";
        for (int i = 0; i < 4; ++i) {
            out << "e,h,a" << i << ",1,dbw," << dbw[i] << ",width_fraction\n";
            out << "e,h,a" << i << ",1,ausc_mean," << ausc[i] << ",sf*epochs\n";
        }
    }
    std::string rep = slurp(write_report(d.str(), "correlation")[0]);
    auto direct = pearson_r(dbw, ausc);
    std::ostringstream want;
    want << "dbw,ausc_mean,4,";
    CHECK(rep.find(want.str()) != std::string::npos);
    // extract the r field and compare numerically
    size_t pos = rep.find(want.str()) + want.str().size();
    double r = std::stod(rep.substr(pos));
    CHECK(r == doctest::Approx(direct.r).epsilon(1e-12));
}
