#include "plast/stress.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "plast/rng.hpp"

namespace plast {

void ShockSchedule::validate() const {
    if (gammas.empty()) throw std::invalid_argument("shock schedule needs gammas");
    for (double g : gammas)
        if (!(g > 0)) throw std::invalid_argument("shock gammas must be > 0");
    if (cycle < 2) throw std::invalid_argument("shock cycle must be >= 2");
}

bool ShockSchedule::is_shock(int epoch) const {
    return epoch > 0 && epoch % cycle == 0;
}

double ShockSchedule::gamma_at(int epoch) const {
    validate();
    if (epoch < 0) throw std::invalid_argument("epoch must be >= 0");
    if (!is_shock(epoch)) return 1.0;
    int k = epoch / cycle - 1;  // first shock uses gammas[0]
    return gammas[k % static_cast<int>(gammas.size())];
}

std::vector<double> saturation_fraction(const NetworkSpec& spec,
                                        const NetworkParams& params,
                                        const ForwardTape& tape, double eps) {
    std::vector<double> out;
    for (int l = 0; l < spec.hidden_layers(); ++l) {
        ActivationState st = params.act[l];
        st.mode = Mode::Eval;
        const Eigen::MatrixXd& z = tape.z[l];
        long dead = 0;
        for (Eigen::Index i = 0; i < z.rows(); ++i)
            for (Eigen::Index j = 0; j < z.cols(); ++j)
                if (act_deriv_mag(spec.activations[l], st, z(i, j),
                                  static_cast<int>(j)) < eps)
                    ++dead;
        out.push_back(z.size() == 0 ? 0.0
                                    : static_cast<double>(dead) /
                                          static_cast<double>(z.size()));
    }
    return out;
}

double network_sf(const NetworkSpec& spec, const std::vector<double>& per_layer) {
    double num = 0.0, den = 0.0;
    for (int l = 0; l < spec.hidden_layers(); ++l) {
        double units = spec.producer_width(l);
        num += per_layer[l] * units;
        den += units;
    }
    return den == 0.0 ? 0.0 : num / den;
}

std::string SaturationTrace::to_csv() const {
    std::ostringstream out;
    out << "# stress-trace v1\n";
    int layers = records.empty() ? 0
                                 : static_cast<int>(records[0].sf_layers.size());
    out << "epoch,gamma,sf_network";
    for (int l = 0; l < layers; ++l) out << ",sf_layer_" << l;
    out << ",accuracy,shock_flag\n";
    out.precision(17);
    for (const auto& r : records) {
        out << r.epoch << ',' << r.gamma << ',' << r.sf_network;
        for (double s : r.sf_layers) out << ',' << s;
        out << ',' << r.accuracy << ',' << (r.shock ? 1 : 0) << '\n';
    }
    return out.str();
}

SaturationTrace run_stress_experiment(const StressConfig& cfg,
                                      const Dataset& base) {
    cfg.net.validate();
    cfg.schedule.validate();
    if (cfg.epochs < 1) throw std::invalid_argument("stress needs epochs >= 1");

    Task task = make_task(cfg.stream, base, 0);
    int n = task.data.n();
    int eval_n = std::min(cfg.eval_samples, n / 2);
    if (eval_n < 1) throw std::invalid_argument("task too small for a held-out batch");

    // Fixed held-out measurement batch: the task's last eval_n samples;
    // training uses the rest.
    Eigen::MatrixXd eval_X = task.data.X.bottomRows(eval_n);
    std::vector<int> eval_y(task.data.y.end() - eval_n, task.data.y.end());
    Dataset train;
    train.X = task.data.X.topRows(n - eval_n);
    train.y.assign(task.data.y.begin(), task.data.y.end() - eval_n);
    train.classes = task.data.classes;

    NetworkParams params = init_network(cfg.net, cfg.seed);
    OptimizerState opt = OptimizerState::init(cfg.opt, cfg.lr, params);
    auto train_rng = make_rng(cfg.seed, 0x57E55);

    SaturationTrace trace;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double gamma = cfg.schedule.gamma_at(epoch);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.gamma = gamma;
        rec.shock = cfg.schedule.is_shock(epoch);
        try {
            // one training pass, shock applied through the forward hook
            Task sub;
            sub.index = epoch;  // reshuffle per epoch
            sub.data = train;
            StreamConfig one = cfg.stream;
            one.epochs = 1;
            one.step_budget = 0;
            for (const auto& b : task_batches(one, sub)) {
                auto [logits, tape] =
                    forward(cfg.net, params, b.X, gamma, Mode::Train, &train_rng);
                auto [loss, dlogits] = softmax_xent(logits, b.y);
                NetGrads g = backward(cfg.net, params, tape, dlogits);
                step(opt, cfg.net, params, g);
            }
            // measurement on the fixed held-out batch, same gamma
            auto [logits, tape] =
                forward(cfg.net, params, eval_X, gamma, Mode::Eval);
            rec.sf_layers = saturation_fraction(cfg.net, params, tape);
            rec.sf_network = network_sf(cfg.net, rec.sf_layers);
            int correct = 0;
            for (Eigen::Index i = 0; i < logits.rows(); ++i) {
                Eigen::Index arg;
                logits.row(i).maxCoeff(&arg);
                if (static_cast<int>(arg) == eval_y[i]) ++correct;
            }
            rec.accuracy = static_cast<double>(correct) /
                           static_cast<double>(logits.rows());
        } catch (const std::runtime_error&) {
            rec.aborted = true;
            trace.aborted = true;
            trace.records.push_back(rec);
            break;
        }
        trace.records.push_back(rec);
    }
    return trace;
}

}  // namespace plast
