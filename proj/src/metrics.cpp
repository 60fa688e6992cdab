#include "plast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "plast/rng.hpp"

namespace plast {

namespace {

double mean_of(const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) /
           static_cast<double>(xs.size());
}

double lgamma_fn(double x) { return std::lgamma(x); }

// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction.
double betacf(double a, double b, double x) {
    const int kMaxIter = 300;
    const double kEps = 1e-15, kFpMin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

double inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln = lgamma_fn(a + b) - lgamma_fn(a) - lgamma_fn(b) +
                a * std::log(x) + b * std::log(1.0 - x);
    double front = std::exp(ln);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

void AccuracyMatrix::validate() const {
    if (A.rows() != A.cols())
        throw std::invalid_argument("accuracy matrix must be square");
    for (int t = 0; t < tasks(); ++t)
        for (int i = 0; i <= t; ++i)
            if (A(t, i) < 0.0 || A(t, i) > 1.0)
                throw std::invalid_argument("accuracy outside [0,1] at (" +
                                            std::to_string(t) + "," +
                                            std::to_string(i) + ")");
}

double acc_T(const AccuracyMatrix& m, int t) {
    m.validate();
    if (t < 0 || t >= m.tasks())
        throw std::invalid_argument("acc_T: task index out of range");
    double s = 0.0;
    for (int i = 0; i <= t; ++i) s += m.A(t, i);
    return s / (t + 1);
}

double bwt_T(const AccuracyMatrix& m, int t) {
    m.validate();
    if (t < 1 || t >= m.tasks())
        throw std::invalid_argument("bwt_T needs at least two tasks");
    double s = 0.0;
    for (int i = 0; i < t; ++i) s += m.A(t, i) - m.A(i, i);
    return s / t;
}

double aoa(const OnlineAccuracyLog& log, int task) {
    if (task < 0 || task >= static_cast<int>(log.batches.size()) ||
        log.batches[task].empty())
        throw std::invalid_argument("aoa: empty or missing task log");
    return mean_of(log.batches[task]);
}

double taoa(const OnlineAccuracyLog& log, int through_task) {
    if (through_task < 0 || through_task >= static_cast<int>(log.batches.size()))
        throw std::invalid_argument("taoa: task index out of range");
    double num = 0.0;
    long den = 0;
    for (int i = 0; i <= through_task; ++i) {
        if (log.batches[i].empty())
            throw std::invalid_argument("taoa: empty task log at " +
                                        std::to_string(i));
        num += std::accumulate(log.batches[i].begin(), log.batches[i].end(), 0.0);
        den += static_cast<long>(log.batches[i].size());
    }
    return num / static_cast<double>(den);
}

std::vector<ShockRecovery> recovery_stats(const SaturationTrace& trace,
                                          double perf_threshold) {
    std::vector<int> shocks;
    for (size_t i = 0; i < trace.records.size(); ++i)
        if (trace.records[i].shock) shocks.push_back(static_cast<int>(i));
    if (shocks.empty() || shocks[0] == 0)
        throw std::invalid_argument(
            "recovery_stats needs a shock with a pre-shock baseline");

    std::vector<ShockRecovery> out;
    for (size_t s = 0; s < shocks.size(); ++s) {
        int at = shocks[s];
        int window_end = s + 1 < shocks.size()
                             ? shocks[s + 1]
                             : static_cast<int>(trace.records.size());
        if (window_end - at < 2) continue;  // terminal shock, empty window

        const auto& rec = trace.records;
        ShockRecovery r;
        r.shock_epoch = rec[at].epoch;
        r.gamma = rec[at].gamma;
        r.baseline_sf = rec[at - 1].sf_network;
        r.baseline_acc = rec[at - 1].accuracy;
        r.peak_sf = rec[at].sf_network;

        // window includes the shock epoch and runs to the next shock
        for (int i = at; i < window_end; ++i)
            r.ausc += std::max(rec[i].sf_network - r.baseline_sf, 0.0);

        double target = r.baseline_sf + (r.peak_sf - r.baseline_sf) / 2.0;
        for (int i = at + 1; i < window_end; ++i)
            if (rec[i].sf_network <= target) {
                r.sf_recovered = true;
                r.sf_half_time = i - at;
                break;
            }
        for (int i = at + 1; i < window_end; ++i)
            if (rec[i].accuracy >= perf_threshold * r.baseline_acc) {
                r.perf_recovered = true;
                r.tau95 = i - at;
                break;
            }
        out.push_back(r);
    }
    return out;
}

Eigen::VectorXd jacobi_eigenvalues(Eigen::MatrixXd M) {
    const int n = static_cast<int>(M.rows());
    if (M.cols() != n) throw std::invalid_argument("jacobi: matrix not square");
    double scale = M.cwiseAbs().maxCoeff();
    if (scale == 0.0) return Eigen::VectorXd::Zero(n);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += M(p, q) * M(p, q);
        if (std::sqrt(off) < 1e-14 * scale * n) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(M(p, q)) < 1e-300) continue;
                double theta = (M(q, q) - M(p, p)) / (2.0 * M(p, q));
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int k = 0; k < n; ++k) {
                    double mp = M(k, p), mq = M(k, q);
                    M(k, p) = c * mp - s * mq;
                    M(k, q) = s * mp + c * mq;
                }
                for (int k = 0; k < n; ++k) {
                    double mp = M(p, k), mq = M(q, k);
                    M(p, k) = c * mp - s * mq;
                    M(q, k) = s * mp + c * mq;
                }
            }
    }
    Eigen::VectorXd ev = M.diagonal();
    std::sort(ev.data(), ev.data() + n, std::greater<double>());
    return ev;
}

int effective_rank(const Eigen::MatrixXd& G, double tau) {
    if (G.size() == 0) throw std::invalid_argument("effective_rank: empty matrix");
    if (!G.allFinite())
        throw std::invalid_argument("effective_rank: non-finite entries");
    if (G.cwiseAbs().maxCoeff() == 0.0) return 0;
    Eigen::MatrixXd M = G.transpose() * G;
    Eigen::VectorXd sv = jacobi_eigenvalues(std::move(M)).cwiseMax(0.0);
    double total = sv.sum();
    double run = 0.0;
    for (int k = 0; k < sv.size(); ++k) {
        run += sv[k];
        if (run / total >= tau) return k + 1;
    }
    return static_cast<int>(sv.size());
}

PowerIterResult lambda_max(const LinOp& hvp, int dim, int iters, double tol,
                           std::uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("lambda_max: dim must be >= 1");
    auto rng = make_rng(seed, 0x13A);
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = normal(rng);
    v.normalize();

    PowerIterResult res;
    double prev = 0.0;
    for (int it = 0; it < iters; ++it) {
        Eigen::VectorXd w = hvp(v);
        double nw = w.norm();
        if (nw == 0.0) {
            res.zero_operator = true;
            res.v = v;
            return res;
        }
        double lam = v.dot(w);  // Rayleigh quotient of the current direction
        v = w / nw;
        if (it > 0 && std::abs(lam - prev) < tol) {
            res.converged = true;
            res.lambda = v.dot(hvp(v));
            res.v = v;
            return res;
        }
        prev = lam;
    }
    res.lambda = v.dot(hvp(v));
    res.v = v;
    return res;
}

int weight_dim(const NetworkSpec& spec) {
    int n = 0;
    for (int l = 0; l < spec.num_layers(); ++l)
        n += spec.widths[l] * spec.producer_width(l) + spec.producer_width(l);
    return n;
}

LinOp make_loss_hvp(const NetworkSpec& spec, const NetworkParams& params,
                    const Eigen::MatrixXd& batch, const std::vector<int>& labels,
                    double fd_step) {
    auto grad_at = [=](const Eigen::VectorXd& delta) {
        NetworkParams p = params;
        int k = 0;
        for (size_t l = 0; l < p.W.size(); ++l) {
            for (Eigen::Index i = 0; i < p.W[l].size(); ++i)
                p.W[l].data()[i] += delta[k++];
            for (Eigen::Index i = 0; i < p.b[l].size(); ++i)
                p.b[l].data()[i] += delta[k++];
        }
        auto [logits, tape] = forward(spec, p, batch, 1.0, Mode::Eval);
        auto [loss, dlogits] = softmax_xent(logits, labels);
        NetGrads g = backward(spec, p, tape, dlogits);
        Eigen::VectorXd out(delta.size());
        k = 0;
        for (size_t l = 0; l < g.dW.size(); ++l) {
            for (Eigen::Index i = 0; i < g.dW[l].size(); ++i)
                out[k++] = g.dW[l].data()[i];
            for (Eigen::Index i = 0; i < g.db[l].size(); ++i)
                out[k++] = g.db[l].data()[i];
        }
        return out;
    };
    return [grad_at, fd_step](const Eigen::VectorXd& v) {
        return ((grad_at(fd_step * v) - grad_at(-fd_step * v)) / (2 * fd_step))
            .eval();
    };
}

std::vector<std::string> ReturnLog::envs(const std::string& run) const {
    std::set<std::string> seen;
    std::vector<std::string> out;
    for (const auto& e : entries)
        if (e.run == run && seen.insert(e.env).second) out.push_back(e.env);
    return out;
}

ReturnLog ReturnLog::from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open");
    ReturnLog log;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::vector<std::string> cells;
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (lineno == 1) {
            if (cells != std::vector<std::string>{"run", "environment", "cycle",
                                                  "phase", "episode_index",
                                                  "return"})
                throw std::runtime_error(
                    path + ": line 1: expected header "
                           "run,environment,cycle,phase,episode_index,return");
            continue;
        }
        if (cells.size() != 6)
            throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                     ": expected 6 columns, got " +
                                     std::to_string(cells.size()));
        Entry e;
        e.run = cells[0];
        e.env = cells[1];
        try {
            e.cycle = std::stoi(cells[2]);
            e.episode = std::stoi(cells[4]);
            e.ret = std::stod(cells[5]);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                     ": numeric field failed to parse");
        }
        if (cells[3] == "train")
            e.train = true;
        else if (cells[3] == "test")
            e.train = false;
        else
            throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                     ": phase must be 'train' or 'test'");
        if (e.cycle < 1)
            throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                     ": cycle must be >= 1");
        log.entries.push_back(std::move(e));
    }
    return log;
}

double median(std::vector<double> xs) {
    if (xs.empty()) throw std::invalid_argument("median of empty list");
    std::sort(xs.begin(), xs.end());
    size_t n = xs.size();
    if (n % 2 == 1) return xs[n / 2];
    return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double plasticity_score(const ReturnLog& log, const std::string& run, double p) {
    auto es = log.envs(run);
    if (es.empty())
        throw std::invalid_argument("plasticity_score: run '" + run +
                                    "' has no entries");
    std::vector<double> env_means;
    for (const auto& env : es) {
        int last_cycle = 0;
        for (const auto& e : log.entries)
            if (e.run == run && e.env == env && e.train)
                last_cycle = std::max(last_cycle, e.cycle);
        std::vector<std::pair<int, double>> series;
        for (const auto& e : log.entries)
            if (e.run == run && e.env == env && e.train && e.cycle == last_cycle)
                series.emplace_back(e.episode, e.ret);
        if (series.empty())
            throw std::invalid_argument("plasticity_score: environment '" + env +
                                        "' has no train series");
        std::sort(series.begin(), series.end());
        int n = static_cast<int>(series.size());
        int w = static_cast<int>(std::ceil(p * n));
        w = std::max(w, 1);
        double s = 0.0;
        for (int i = n - w; i < n; ++i) s += series[i].second;
        env_means.push_back(s / w);
    }
    return median(env_means);
}

namespace {

double phase_mean(const ReturnLog& log, const std::string& run,
                  const std::string& env, int cycle, bool train) {
    std::vector<double> xs;
    for (const auto& e : log.entries)
        if (e.run == run && e.env == env && e.cycle == cycle && e.train == train)
            xs.push_back(e.ret);
    if (xs.empty())
        throw std::invalid_argument("missing " +
                                    std::string(train ? "train" : "test") +
                                    " returns for environment '" + env +
                                    "' cycle " + std::to_string(cycle));
    return mean_of(xs);
}

}  // namespace

double gap_delta(const ReturnLog& log, const std::string& run,
                 const std::string& env) {
    double gap1 = phase_mean(log, run, env, 1, true) -
                  phase_mean(log, run, env, 1, false);
    double gap3 = phase_mean(log, run, env, 3, true) -
                  phase_mean(log, run, env, 3, false);
    return gap3 - gap1;
}

GapSummary gap_summary(const ReturnLog& log, const std::string& run) {
    auto es = log.envs(run);
    if (es.empty())
        throw std::invalid_argument("gap_summary: run '" + run +
                                    "' has no entries");
    std::vector<double> deltas;
    for (const auto& env : es) deltas.push_back(gap_delta(log, run, env));
    GapSummary s;
    s.median = median(deltas);
    s.mean = mean_of(deltas);
    return s;
}

Correlation pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw std::invalid_argument("pearson_r: length mismatch");
    int n = static_cast<int>(x.size());
    if (n < 3) throw std::invalid_argument("pearson_r needs n >= 3");
    double mx = mean_of(x), my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        throw std::invalid_argument("pearson_r: zero variance input");
    Correlation c;
    c.r = sxy / std::sqrt(sxx * syy);
    double r2 = std::min(c.r * c.r, 1.0);
    if (r2 >= 1.0) {
        c.p = 0.0;
        return c;
    }
    double df = n - 2;
    double t2 = r2 * df / (1.0 - r2);
    // two-sided p = I_{df/(df+t^2)}(df/2, 1/2)
    c.p = inc_beta(df / 2.0, 0.5, df / (df + t2));
    return c;
}

double BootstrapCi::half_width() const {
    return std::max(mean - lo, hi - mean);
}

BootstrapCi bootstrap_ci(const std::vector<double>& samples, double level,
                         int resamples, std::uint64_t seed) {
    int n = static_cast<int>(samples.size());
    if (n < 2) throw std::invalid_argument("bootstrap_ci needs n >= 2");
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("bootstrap_ci: level in (0,1)");
    auto rng = make_rng(seed, 0xB007);
    std::vector<double> means(resamples);
    for (int r = 0; r < resamples; ++r) {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            s += samples[static_cast<int>(rng() % static_cast<unsigned>(n))];
        means[r] = s / n;
    }
    std::sort(means.begin(), means.end());
    double alpha = (1.0 - level) / 2.0;
    auto quantile = [&](double q) {
        double pos = q * (resamples - 1);
        int lo = static_cast<int>(std::floor(pos));
        int hi = std::min(lo + 1, resamples - 1);
        double frac = pos - lo;
        return means[lo] * (1.0 - frac) + means[hi] * frac;
    };
    BootstrapCi ci;
    ci.mean = mean_of(samples);
    ci.lo = quantile(alpha);
    ci.hi = quantile(1.0 - alpha);
    return ci;
}

}  // namespace plast
