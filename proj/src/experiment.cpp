#include "plast/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include "plast/analytic.hpp"
#include "plast/rng.hpp"

namespace fs = std::filesystem;

namespace plast {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int argmax_row(const Eigen::MatrixXd& logits, int row) {
    int best = 0;
    for (int j = 1; j < logits.cols(); ++j)
        if (logits(row, j) > logits(row, best)) best = j;
    return best;
}

double batch_accuracy(const Eigen::MatrixXd& logits, const std::vector<int>& y) {
    int hit = 0;
    for (size_t i = 0; i < y.size(); ++i)
        if (argmax_row(logits, static_cast<int>(i)) == y[i]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(y.size());
}

// Source classes the base dataset must provide for the configured stream.
int base_classes(const ExperimentConfig& cfg) {
    const StreamConfig& s = cfg.stream;
    switch (s.kind) {
        case StreamKind::PermutedInput:
        case StreamKind::RandomLabel:
            return cfg.widths.back();
        case StreamKind::SplitClassAlternating:
            return (s.tasks + 1) / 2 * s.hard_classes + s.tasks / 2 * s.easy_classes;
        case StreamKind::BinaryPair:
            return 2 * s.tasks;
    }
    throw std::logic_error("bad stream kind");
}

Dataset base_dataset(const ExperimentConfig& cfg) {
    int classes = base_classes(cfg);
    int per_class = cfg.stream.per_class;
    if (per_class <= 0) {
        // large enough for the configured subset, floor of 50 per class
        int need = cfg.stream.subset > 0 ? (cfg.stream.subset + classes - 1) / classes
                                         : 0;
        per_class = std::max(50, need);
    }
    // low-dimensional multi-cluster blobs: linear decision boundaries are
    // insufficient, so the nonlinearity does real work
    return synthetic_blobs(per_class, classes, cfg.widths[0], cfg.stream.seed,
                           4, 0.12);
}

// CReLU has no scalar form; its two-branch derivative magnitude is 1 on x<0.
double sbar_of(const ActivationSpec& spec, const ActivationState& state) {
    if (spec.kind == ActKind::CReLU) return 1.0;
    return effective_negative_slope(
        spec, state, SlopeDistribution::TruncatedStandardNormalNegative);
}

struct CellRun {
    NetworkSpec net;
    NetworkParams params;
    OnlineAccuracyLog log;
    AccuracyMatrix A;
    std::vector<Eigen::MatrixXd> probes;  // last-task batches for diagnostics
    Eigen::MatrixXd probe_x;
    std::vector<int> probe_y;
};

// Sequential task training shared by the sweep and benchmark experiments.
CellRun continual_run(const ExperimentConfig& cfg, const ActivationSpec& act,
                      std::uint64_t seed, bool with_replay) {
    CellRun run;
    run.net = cfg.net_for(act);
    run.params = init_network(run.net, seed);
    OptimizerState opt = OptimizerState::init(cfg.opt, cfg.lr, run.params);
    auto rng = make_rng(seed, 0x7121);

    StreamConfig scfg = cfg.stream;
    scfg.seed = seed;
    Dataset base = base_dataset(cfg);

    int cap = std::max(1, 10000 / cfg.scale);
    int per_task = std::max(1, 500 / cfg.scale);
    ReplayBuffer buffer(cap, per_task, derive_seed(seed, 0xEB));

    run.A.A = Eigen::MatrixXd::Zero(scfg.tasks, scfg.tasks);
    std::vector<Batch> evals;
    for (int t = 0; t < scfg.tasks; ++t) {
        Task task = make_task(scfg, base, t);
        // hold out a fixed tail of each task for the accuracy matrix
        int n = task.data.n();
        int n_eval = std::max(1, n / 5);
        Batch ev{task.data.X.bottomRows(n_eval),
                 std::vector<int>(task.data.y.end() - n_eval, task.data.y.end())};
        task.data.X = Eigen::MatrixXd(task.data.X.topRows(n - n_eval));
        task.data.y.resize(n - n_eval);
        evals.push_back(std::move(ev));

        std::vector<double> accs;
        auto batches = task_batches(scfg, task);
        for (auto& b : batches) {
            Eigen::MatrixXd X = b.X;
            std::vector<int> y = b.y;
            if (with_replay && buffer.size() > 0) {
                Batch r = buffer.sample(std::min(buffer.size(), scfg.batch_size));
                Eigen::MatrixXd Xm(X.rows() + r.X.rows(), X.cols());
                Xm << X, r.X;
                X = std::move(Xm);
                y.insert(y.end(), r.y.begin(), r.y.end());
            }
            auto [logits, tape] = forward(run.net, run.params, X, 1.0,
                                          Mode::Train, &rng);
            // online accuracy from the pre-update pass, task samples only
            int nb = static_cast<int>(b.y.size());
            accs.push_back(batch_accuracy(logits.topRows(nb), b.y));
            auto [loss, dlogits] = softmax_xent(logits, y);
            step(opt, run.net, run.params, backward(run.net, run.params, tape, dlogits));
        }
        run.log.batches.push_back(std::move(accs));
        if (with_replay) buffer.insert(task.data.X, task.data.y, t);

        for (int i = 0; i <= t; ++i) {
            auto [logits, tape] =
                forward(run.net, run.params, evals[i].X, 1.0, Mode::Eval);
            run.A.A(t, i) = batch_accuracy(logits, evals[i].y);
        }

        if (t == scfg.tasks - 1) {
            for (size_t k = 0; k < batches.size() && k < 4; ++k)
                run.probes.push_back(batches[k].X);
            int m = std::min<int>(64, task.data.n());
            run.probe_x = task.data.X.topRows(m);
            run.probe_y.assign(task.data.y.begin(), task.data.y.begin() + m);
        }
    }
    return run;
}

using Emit = std::function<void(const std::string&, double, const std::string&)>;

void goldilocks_cell(const ExperimentConfig& cfg, const ActivationSpec& act,
                     std::uint64_t seed, const Emit& emit) {
    CellRun run = continual_run(cfg, act, seed, false);
    int T = cfg.stream.tasks - 1;
    emit("taoa", taoa(run.log, T), "fraction");
    emit("aoa_last", aoa(run.log, T), "fraction");
    emit("dead_fraction", dead_unit_fraction(run.net, run.params, run.probes),
         "fraction");
    ActivationState st = ActivationState::init(act, 1, cfg.alpha_init);
    emit("sbar", sbar_of(act, st), "slope");
    int layer = std::min(1, run.net.num_layers() - 1);
    Eigen::MatrixXd G = per_sample_gradients(run.net, run.params, run.probe_x,
                                             run.probe_y, layer);
    emit("erank", effective_rank(G), "count");
    LinOp hvp = make_loss_hvp(run.net, run.params, run.probe_x, run.probe_y);
    auto lam = lambda_max(hvp, weight_dim(run.net), 60, 1e-5, derive_seed(seed, 0x11));
    emit("lambda_max", lam.lambda, "curvature");
}

void continual_cell(const ExperimentConfig& cfg, const ActivationSpec& act,
                    std::uint64_t seed, const Emit& emit) {
    CellRun run = continual_run(cfg, act, seed, true);
    int T = cfg.stream.tasks - 1;
    emit("acc_T", acc_T(run.A, T), "fraction");
    if (T >= 1) emit("bwt", bwt_T(run.A, T), "fraction");
    emit("taoa", taoa(run.log, T), "fraction");
    emit("aoa_last", aoa(run.log, T), "fraction");
}

void shock_cell(const ExperimentConfig& cfg, const ActivationSpec& act,
                std::uint64_t seed, const std::string& out, const std::string& hash,
                const Emit& emit) {
    StressConfig sc;
    sc.net = cfg.net_for(act);
    sc.stream = cfg.stream;
    sc.stream.seed = seed;
    sc.schedule = cfg.schedule;
    sc.epochs = cfg.epochs;
    sc.opt = cfg.opt;
    sc.lr = cfg.lr;
    sc.seed = seed;
    SaturationTrace trace = run_stress_experiment(sc, base_dataset(cfg));
    {
        std::ofstream f(out + "/trace_" + hash + "_" + std::to_string(seed) + ".csv");
        f << trace.to_csv();
    }
    auto recs = recovery_stats(trace);
    double ausc = 0, peak = 0, nonrec = 0, tau = 0;
    int ntau = 0;
    for (const auto& r : recs) {
        ausc += r.ausc;
        peak += r.peak_sf;
        nonrec += r.sf_recovered ? 0.0 : 1.0;
        if (r.perf_recovered) {
            tau += r.tau95;
            ++ntau;
        }
    }
    double n = static_cast<double>(recs.size());
    emit("ausc_mean", ausc / n, "sf*epochs");
    emit("peak_sf_mean", peak / n, "fraction");
    emit("sf_nonrecovery_rate", nonrec / n, "fraction");
    if (ntau > 0) emit("tau95_mean", tau / ntau, "epochs");
    emit("final_accuracy", trace.records.back().accuracy, "fraction");
    ActivationState st = ActivationState::init(act, 1, cfg.alpha_init);
    emit("dbw", dead_band_width(act, st), "width_fraction");
    emit("sbar", sbar_of(act, st), "slope");
}

void write_results_csv(const std::string& out, const std::vector<ResultRow>& rows) {
    std::ofstream f(out + "/results.csv");
    f << "experiment,config_hash,activation,seed,metric,value,units\n";
    for (const auto& r : rows)
        f << r.experiment << ',' << r.hash << ',' << r.activation << ','
          << r.seed << ',' << r.metric << ',' << fmt(r.value) << ',' << r.units
          << "\n";
}

std::string now_iso() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&t));
    return buf;
}

}  // namespace

std::string act_label(const ActivationSpec& s) {
    std::ostringstream o;
    o << act_kind_name(s.kind);
    switch (s.kind) {
        case ActKind::LeakyReLU:
        case ActKind::ELU:
        case ActKind::CELU:
        case ActKind::SELU:
            o << "[alpha=" << s.alpha << "]";
            break;
        case ActKind::PReLU:
            o << "[scope=" << (s.scope == PreluScope::Global ? "global"
                               : s.scope == PreluScope::Layer ? "layer"
                                                              : "neuron")
              << "]";
            break;
        case ActKind::Swish:
        case ActKind::GeLU:
            o << "[beta=" << s.beta << "]";
            break;
        case ActKind::RReLU:
        case ActKind::RandSmoothLeaky:
        case ActKind::BoPReLU:
        case ActKind::RSELU:
            o << "[" << s.lower << ";" << s.upper << "]";
            if (s.kind == ActKind::RandSmoothLeaky)
                o << "[c=" << s.c << ";p=" << s.p << "]";
            break;
        case ActKind::SmoothLeaky:
            o << "[alpha=" << s.alpha << ";c=" << s.c << ";p=" << s.p << "]";
            break;
        case ActKind::Rational:
            o << "[" << s.deg_p << "/" << s.deg_q << "]";
            break;
        default:
            break;
    }
    return o.str();
}

RunOutcome run_experiment(const ExperimentConfig& cfg, const std::string& out,
                          bool overwrite, int jobs) {
    cfg.validate();
    fs::create_directories(out);
    if (!overwrite &&
        (fs::exists(out + "/results.csv") || fs::exists(out + "/manifest.json")))
        throw std::runtime_error("output directory '" + out +
                                 "' already holds results; pass --overwrite");

    std::string started = now_iso();
    RunOutcome outcome;

    struct Cell {
        ActivationSpec act;
        std::uint64_t seed;
        std::string hash;
        std::string label;
    };
    std::vector<Cell> cells;
    for (const auto& act : cfg.activations) {
        ExperimentConfig cc = cfg;
        cc.activations = {act};
        cc.seeds.clear();
        std::string h = config_hash(cc);
        for (std::uint64_t s : cfg.seeds)
            cells.push_back({act, s, h, act_label(act)});
    }

    if (cfg.kind == ExperimentKind::PropertyGrid) {
        auto specs = canonical_specs();
        auto extra = appendix_specs();
        specs.insert(specs.end(), extra.begin(), extra.end());
        std::ofstream f(out + "/props.csv");
        f << property_grid_csv(specs);
        std::string h = config_hash(cfg);
        for (const auto& sp : specs) {
            ActivationState st = ActivationState::init(sp, 1, cfg.alpha_init);
            outcome.rows.push_back(
                {cfg.name, h, act_label(sp), 0, "sbar", sbar_of(sp, st), "slope"});
            outcome.rows.push_back({cfg.name, h, act_label(sp), 0, "dbw",
                                    dead_band_width(sp, st), "width_fraction"});
        }
        outcome.cells.push_back({"property_grid", 0, "ok"});
    } else if (cfg.kind == ExperimentKind::RlMetrics) {
        ReturnLog log = ReturnLog::from_csv(cfg.returns_csv);
        std::vector<std::string> runs;
        for (const auto& e : log.entries)
            if (std::find(runs.begin(), runs.end(), e.run) == runs.end())
                runs.push_back(e.run);
        std::string h = config_hash(cfg);
        for (const auto& r : runs) {
            try {
                outcome.rows.push_back({cfg.name, h, r, 0, "plasticity_score",
                                        plasticity_score(log, r), "return"});
                GapSummary g = gap_summary(log, r);
                outcome.rows.push_back(
                    {cfg.name, h, r, 0, "gap_delta_median", g.median, "return"});
                outcome.rows.push_back(
                    {cfg.name, h, r, 0, "gap_delta_mean", g.mean, "return"});
                outcome.cells.push_back({r, 0, "ok"});
            } catch (const std::exception& e) {
                outcome.cells.push_back({r, 0, e.what()});
            }
        }
    } else {
        if (cells.empty())
            outcome.warnings.push_back("empty sweep grid: no result rows");

        std::vector<std::vector<ResultRow>> slots(cells.size());
        std::vector<CellStatus> status(cells.size());
        std::atomic<size_t> next{0};
        auto worker = [&] {
            for (size_t i = next.fetch_add(1); i < cells.size();
                 i = next.fetch_add(1)) {
                const Cell& c = cells[i];
                Emit emit = [&](const std::string& metric, double v,
                                const std::string& units) {
                    slots[i].push_back(
                        {cfg.name, c.hash, c.label, c.seed, metric, v, units});
                };
                try {
                    if (cfg.kind == ExperimentKind::GoldilocksSweep)
                        goldilocks_cell(cfg, c.act, c.seed, emit);
                    else if (cfg.kind == ExperimentKind::ContinualBenchmark)
                        continual_cell(cfg, c.act, c.seed, emit);
                    else
                        shock_cell(cfg, c.act, c.seed, out, c.hash, emit);
                    status[i] = {c.label, c.seed, "ok"};
                } catch (const std::exception& e) {
                    slots[i].clear();
                    status[i] = {c.label, c.seed, e.what()};
                }
            }
        };
        int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
        std::vector<std::thread> pool;
        for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
        worker();
        for (auto& th : pool) th.join();

        for (size_t i = 0; i < cells.size(); ++i) {
            outcome.rows.insert(outcome.rows.end(), slots[i].begin(), slots[i].end());
            outcome.cells.push_back(status[i]);
        }
    }

    write_results_csv(out, outcome.rows);

    nlohmann::json manifest;
    manifest["tool"] = kToolVersion;
    manifest["config"] = cfg;
    manifest["warnings"] = outcome.warnings;
    manifest["cells"] = nlohmann::json::array();
    for (const auto& c : outcome.cells)
        manifest["cells"].push_back(
            {{"activation", c.activation}, {"seed", c.seed}, {"status", c.status}});
    {
        std::ofstream f(out + "/manifest.json");
        f << manifest.dump(2) << "\n";
    }
    {
        // timestamps live apart so result trees stay byte-comparable
        std::ofstream f(out + "/times.json");
        f << nlohmann::json{{"started", started}, {"finished", now_iso()}}.dump(2)
          << "\n";
    }
    return outcome;
}

std::vector<ResultRow> read_results(const std::string& dir) {
    std::ifstream in(dir + "/results.csv");
    if (!in) throw std::runtime_error("no results.csv in '" + dir + "'");
    std::vector<ResultRow> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        ResultRow r;
        std::string seed, value;
        std::getline(ss, r.experiment, ',');
        std::getline(ss, r.hash, ',');
        std::getline(ss, r.activation, ',');
        std::getline(ss, seed, ',');
        std::getline(ss, r.metric, ',');
        std::getline(ss, value, ',');
        std::getline(ss, r.units, ',');
        r.seed = std::stoull(seed);
        r.value = std::stod(value);
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

// Fig.-style grouping of the piecewise-linear families by derivative floor.
std::string floor_class(const std::string& label) {
    std::string kind = label.substr(0, label.find('['));
    if (kind == "relu" || kind == "sigmoid" || kind == "tanh") return "zero_floor";
    if (kind == "leaky_relu" || kind == "prelu" || kind == "rrelu")
        return "non_zero_floor";
    return "other";
}

// Ordered group-by helper: key -> values, preserving first-seen order.
template <typename Key>
struct OrderedGroups {
    std::vector<Key> order;
    std::map<Key, std::vector<double>> values;
    void add(const Key& k, double v) {
        if (!values.count(k)) order.push_back(k);
        values[k].push_back(v);
    }
};

}  // namespace

std::vector<std::string> write_report(const std::string& dir,
                                      const std::string& kind) {
    auto rows = read_results(dir);
    std::vector<std::string> written;

    if (kind == "summary") {
        OrderedGroups<std::pair<std::string, std::string>> g;
        for (const auto& r : rows) g.add({r.activation, r.metric}, r.value);
        std::string path = dir + "/report_summary.csv";
        std::ofstream f(path);
        f << "activation,metric,n,mean,ci_lo,ci_hi,degenerate\n";
        for (const auto& k : g.order) {
            const auto& v = g.values[k];
            double mean = 0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            double lo = mean, hi = mean;
            bool degenerate = v.size() < 2;
            if (!degenerate) {
                auto ci = bootstrap_ci(v, 0.95, 2000, 1);
                lo = ci.lo;
                hi = ci.hi;
            }
            f << k.first << ',' << k.second << ',' << v.size() << ',' << fmt(mean)
              << ',' << fmt(lo) << ',' << fmt(hi) << ',' << (degenerate ? 1 : 0)
              << "\n";
        }
        written.push_back(path);
    } else if (kind == "floor_class") {
        OrderedGroups<std::pair<std::string, std::string>> g;
        for (const auto& r : rows)
            g.add({floor_class(r.activation), r.metric}, r.value);
        std::string path = dir + "/report_floor_class.csv";
        std::ofstream f(path);
        f << "floor_class,metric,n,mean\n";
        for (const auto& k : g.order) {
            const auto& v = g.values[k];
            double mean = 0;
            for (double x : v) mean += x;
            f << k.first << ',' << k.second << ',' << v.size() << ','
              << fmt(mean / static_cast<double>(v.size())) << "\n";
        }
        written.push_back(path);
    } else if (kind == "correlation") {
        // mean per activation of the x/y metrics, paired across activations
        OrderedGroups<std::string> xs, ys;
        for (const auto& r : rows) {
            if (r.metric == "dbw") xs.add(r.activation, r.value);
            if (r.metric == "ausc_mean") ys.add(r.activation, r.value);
        }
        std::vector<double> x, y;
        std::vector<std::string> missing;
        for (const auto& a : xs.order) {
            if (!ys.values.count(a)) {
                missing.push_back(a);
                continue;
            }
            auto mean = [](const std::vector<double>& v) {
                double m = 0;
                for (double e : v) m += e;
                return m / static_cast<double>(v.size());
            };
            x.push_back(mean(xs.values[a]));
            y.push_back(mean(ys.values[a]));
        }
        std::string path = dir + "/report_correlation.csv";
        std::ofstream f(path);
        f << "metric_x,metric_y,n,r,p,missing\n";
        if (x.size() >= 3) {
            try {
                auto c = pearson_r(x, y);
                f << "dbw,ausc_mean," << x.size() << ',' << fmt(c.r) << ','
                  << fmt(c.p) << ',' << missing.size() << "\n";
            } catch (const std::exception&) {
                // degenerate inputs (zero variance): leave the partial report
            }
        }
        written.push_back(path);
    } else {
        throw std::runtime_error("unknown report kind '" + kind + "'");
    }
    return written;
}

}  // namespace plast
