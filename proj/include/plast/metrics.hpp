#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "plast/net.hpp"
#include "plast/stress.hpp"

namespace plast {

// Lower-triangular accuracy matrix, 0-based: A(t, i) is the accuracy on task
// i measured after finishing training on task t, defined for i <= t.
struct AccuracyMatrix {
    Eigen::MatrixXd A;

    int tasks() const { return static_cast<int>(A.rows()); }
    void validate() const;
};

// Mean accuracy over all tasks seen through task t.
double acc_T(const AccuracyMatrix& m, int t);
// Backward transfer: mean of A(t,i) - A(i,i) over i < t; needs t >= 1.
double bwt_T(const AccuracyMatrix& m, int t);

// Per-task online (during-training) batch accuracies.
struct OnlineAccuracyLog {
    std::vector<std::vector<double>> batches;  // batches[i][j] = a_{i,j}
};

double aoa(const OnlineAccuracyLog& log, int task);
// Batch-count-weighted mean over tasks [0, through_task].
double taoa(const OnlineAccuracyLog& log, int through_task);

struct ShockRecovery {
    int shock_epoch = 0;
    double gamma = 1.0;
    double baseline_sf = 0.0;   // SF at the epoch before the shock
    double peak_sf = 0.0;       // SF at the shock epoch
    double ausc = 0.0;          // sum of max(SF - baseline, 0) over the window
    bool sf_recovered = false;
    int sf_half_time = 0;       // epochs after the shock, in [1, window)
    double baseline_acc = 0.0;  // accuracy at the epoch before the shock
    bool perf_recovered = false;
    int tau95 = 0;              // epochs after the shock to regain 95% accuracy
};

// One entry per shock that has a pre-shock baseline and a non-empty recovery
// window (the epochs up to the next shock); terminal shocks are skipped.
std::vector<ShockRecovery> recovery_stats(const SaturationTrace& trace,
                                          double perf_threshold = 0.95);

// min k such that the top-k eigenvalues of G^T G hold >= tau of the spectrum
// mass. Uses an in-house cyclic Jacobi eigensolver; all-zero G gives 0.
int effective_rank(const Eigen::MatrixXd& G, double tau = 0.99);

// Symmetric eigenvalues (descending) via cyclic Jacobi; exposed so the
// effective-rank spectrum can be inspected and cross-checked.
Eigen::VectorXd jacobi_eigenvalues(Eigen::MatrixXd M);

struct PowerIterResult {
    double lambda = 0.0;   // Rayleigh quotient of the converged direction
    Eigen::VectorXd v;
    bool converged = false;
    bool zero_operator = false;
};

using LinOp = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

PowerIterResult lambda_max(const LinOp& hvp, int dim, int iters = 100,
                           double tol = 1e-6, std::uint64_t seed = 0);

// Hessian-vector product of the batch cross-entropy loss wrt the network's
// weight/bias parameters, by central finite differences of the gradient.
LinOp make_loss_hvp(const NetworkSpec& spec, const NetworkParams& params,
                    const Eigen::MatrixXd& batch, const std::vector<int>& labels,
                    double fd_step = 1e-4);
int weight_dim(const NetworkSpec& spec);

// Episodic-return records for the RL analysis (ingested, never generated).
struct ReturnLog {
    struct Entry {
        std::string run;
        std::string env;
        int cycle = 0;
        bool train = true;
        int episode = 0;
        double ret = 0.0;
    };
    std::vector<Entry> entries;

    std::vector<std::string> envs(const std::string& run) const;
    // Schema: run,environment,cycle,phase,episode_index,return (header
    // required); errors carry the 1-based line number.
    static ReturnLog from_csv(const std::string& path);
};

// Median with the even-count rule (mean of the two middle values).
double median(std::vector<double> xs);

// Mean return over the final ceil(p*n) episodes of each environment's
// last-cycle training series, median across environments.
double plasticity_score(const ReturnLog& log, const std::string& run,
                        double p = 0.15);

// GAP_{c,e} = mean train return - mean test return for (env, cycle);
// delta = GAP_3 - GAP_1.
double gap_delta(const ReturnLog& log, const std::string& run,
                 const std::string& env);

struct GapSummary {
    double median = 0.0;
    double mean = 0.0;
};
GapSummary gap_summary(const ReturnLog& log, const std::string& run);

struct Correlation {
    double r = 0.0;
    double p = 0.0;  // two-sided, exact t CDF with n-2 dof
};
Correlation pearson_r(const std::vector<double>& x, const std::vector<double>& y);

struct BootstrapCi {
    double lo = 0.0, hi = 0.0, mean = 0.0;
    double half_width() const;  // the larger one-sided margin
};
BootstrapCi bootstrap_ci(const std::vector<double>& samples, double level = 0.95,
                         int resamples = 10000, std::uint64_t seed = 0);

}  // namespace plast
