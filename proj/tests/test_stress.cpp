#include <cmath>

#include "doctest.h"
#include "plast/stress.hpp"

using namespace plast;

namespace {

NetworkSpec one_hidden(ActivationSpec act, int in = 2, int h = 4, int out = 2) {
    NetworkSpec s;
    s.widths = {in, h, out};
    s.activations = {act};
    return s;
}

StressConfig desk_config(ActivationSpec act, std::uint64_t seed = 1) {
    StressConfig cfg;
    cfg.net = one_hidden(act, 6, 8, 3);
    cfg.stream = {.kind = StreamKind::PermutedInput, .tasks = 1, .epochs = 1,
                  .batch_size = 16, .seed = seed};
    cfg.epochs = 25;
    cfg.lr = 0.01;
    cfg.eval_samples = 64;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("shock schedule") {
    ShockSchedule s;  // defaults: [1.5, 0.5, 0.25, 2.0], cycle 10
    CHECK(s.gamma_at(0) == 1.0);
    CHECK(s.gamma_at(7) == 1.0);
    CHECK(s.gamma_at(10) == 1.5);
    CHECK(s.gamma_at(20) == 0.5);
    CHECK(s.gamma_at(30) == 0.25);
    CHECK(s.gamma_at(40) == 2.0);
    CHECK(s.gamma_at(50) == 1.5);  // cycles back
    CHECK(s.gamma_at(11) == 1.0);

    ShockSchedule single{.gammas = {2.0}, .cycle = 10};
    for (int t : {10, 20, 70}) CHECK(single.gamma_at(t) == 2.0);

    ShockSchedule bad{.gammas = {0.0}, .cycle = 10};
    CHECK_THROWS_AS(bad.gamma_at(1), std::invalid_argument);
    ShockSchedule bad2{.gammas = {1.0}, .cycle = 1};
    CHECK_THROWS_AS(bad2.gamma_at(1), std::invalid_argument);
}

TEST_CASE("saturation fraction on hand-built tapes") {
    NetworkSpec leaky = one_hidden({.kind = ActKind::LeakyReLU, .alpha = 0.7});
    NetworkParams lp = init_network(leaky, 1);
    ForwardTape tape;
    Eigen::MatrixXd z(3, 4);
    z << -50, -8, 0.1, 9, -7.5, 2, -100, 4, 1, -1, 2, -2;
    tape.z.push_back(z);
    CHECK(saturation_fraction(leaky, lp, tape)[0] == 0.0);

    NetworkSpec sg = one_hidden({.kind = ActKind::Sigmoid});
    NetworkParams sp = init_network(sg, 1);
    ForwardTape t2;
    t2.z.push_back(Eigen::MatrixXd::Constant(5, 4, -7.1));  // sigma'(7.1) < 1e-3
    CHECK(saturation_fraction(sg, sp, t2)[0] == 1.0);

    // 3 of 4 units beyond the dead band in every sample
    ForwardTape t3;
    Eigen::MatrixXd z3(2, 4);
    z3 << -8, 9, 10, 0.0, 7.5, -9, -12, 0.5;
    t3.z.push_back(z3);
    CHECK(saturation_fraction(sg, sp, t3)[0] == 0.75);

    // network SF is unit-weighted
    NetworkSpec two;
    two.widths = {2, 2, 6, 2};
    two.activations = {{.kind = ActKind::Sigmoid}, {.kind = ActKind::Sigmoid}};
    CHECK(network_sf(two, {1.0, 0.0}) == doctest::Approx(2.0 / 8.0));
}

TEST_CASE("relu under a gamma=2 shock saturates at least as much") {
    NetworkSpec spec = one_hidden({.kind = ActKind::ReLU});
    NetworkParams p = init_network(spec, 5);
    p.b[0].setConstant(-0.3);  // negative-mean pre-activations
    Eigen::MatrixXd batch = Eigen::MatrixXd::Random(64, 2).cwiseAbs() * 0.5;
    auto sf = [&](double gamma) {
        auto [logits, tape] = forward(spec, p, batch, gamma, Mode::Eval);
        return saturation_fraction(spec, p, tape)[0];
    };
    CHECK(sf(2.0) >= sf(1.0));
}

TEST_CASE("stress run: determinism and shock isolation") {
    Dataset base = synthetic_blobs(60, 3, 6, 21);
    StressConfig cfg = desk_config({.kind = ActKind::Sigmoid});
    SaturationTrace a = run_stress_experiment(cfg, base);
    SaturationTrace b = run_stress_experiment(cfg, base);
    REQUIRE(a.records.size() == 25);
    for (size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].sf_network == b.records[i].sf_network);
        CHECK(a.records[i].accuracy == b.records[i].accuracy);
        // shocks exactly at positive multiples of the cycle
        const auto& r = a.records[i];
        if (r.epoch > 0 && r.epoch % 10 == 0) {
            CHECK(r.shock);
            CHECK(r.gamma != doctest::Approx(0.0));
        } else {
            CHECK_FALSE(r.shock);
            CHECK(r.gamma == 1.0);
        }
        CHECK(r.sf_network >= 0.0);
        CHECK(r.sf_network <= 1.0);
    }
}

TEST_CASE("stress run: gamma=1 schedule equals a shock-free run") {
    Dataset base = synthetic_blobs(60, 3, 6, 22);
    StressConfig cfg = desk_config({.kind = ActKind::Tanh}, 3);
    cfg.schedule.gammas = {1.0};
    SaturationTrace with = run_stress_experiment(cfg, base);
    StressConfig off = cfg;
    off.schedule.cycle = 1000;  // no shock epoch inside the run
    SaturationTrace without = run_stress_experiment(off, base);
    REQUIRE(with.records.size() == without.records.size());
    for (size_t i = 0; i < with.records.size(); ++i) {
        CHECK(with.records[i].sf_network == without.records[i].sf_network);
        CHECK(with.records[i].accuracy == without.records[i].accuracy);
        CHECK(with.records[i].gamma == 1.0);
    }
}

TEST_CASE("strict-floor activation never saturates") {
    Dataset base = synthetic_blobs(60, 3, 6, 23);
    StressConfig cfg = desk_config({.kind = ActKind::LeakyReLU, .alpha = 0.7}, 4);
    SaturationTrace t = run_stress_experiment(cfg, base);
    for (const auto& r : t.records) CHECK(r.sf_network == 0.0);
}

TEST_CASE("trace csv schema") {
    Dataset base = synthetic_blobs(40, 2, 6, 24);
    StressConfig cfg = desk_config({.kind = ActKind::ReLU}, 5);
    cfg.epochs = 3;
    SaturationTrace t = run_stress_experiment(cfg, base);
    std::string csv = t.to_csv();
    CHECK(csv.rfind("# stress-trace v1\n", 0) == 0);
    CHECK(csv.find("epoch,gamma,sf_network,sf_layer_0,accuracy,shock_flag\n") !=
          std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2 + 3);
}
