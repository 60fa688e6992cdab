#include "plast/net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "plast/rng.hpp"

namespace plast {

namespace {

Eigen::ArrayXd flatten_rowmajor(const Eigen::MatrixXd& m) {
    Eigen::ArrayXd out(m.size());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[k++] = m(i, j);
    return out;
}

Eigen::MatrixXd unflatten_rowmajor(const Eigen::ArrayXd& a, Eigen::Index rows,
                                   Eigen::Index cols) {
    Eigen::MatrixXd out(rows, cols);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = a[k++];
    return out;
}

bool global_scoped(const ActivationSpec& s) {
    return (s.kind == ActKind::PReLU || s.kind == ActKind::BoPReLU) &&
           s.scope == PreluScope::Global;
}

void adam_update(double& theta, double g, double& m, double& v, double lr,
                 double b1, double b2, double eps, double bc1, double bc2) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    theta -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
}

}  // namespace

void NetworkSpec::validate() const {
    if (widths.size() < 2)
        throw std::invalid_argument("network needs at least input and output widths");
    for (int w : widths)
        if (w < 1) throw std::invalid_argument("layer widths must be >= 1");
    if (static_cast<int>(activations.size()) != hidden_layers())
        throw std::invalid_argument("need one activation per hidden layer");
    for (int l = 0; l < hidden_layers(); ++l) {
        activations[l].validate();
        if (activations[l].doubles_width() && widths[l + 1] % 2 != 0)
            throw std::invalid_argument(
                "width-doubling activation needs an even hidden width");
    }
}

int NetworkSpec::producer_width(int l) const {
    int w = widths[l + 1];
    if (l < hidden_layers() && activations[l].doubles_width()) return w / 2;
    return w;
}

long NetworkSpec::param_count() const {
    long n = 0;
    for (int l = 0; l < num_layers(); ++l)
        n += static_cast<long>(widths[l]) * producer_width(l) + producer_width(l);
    for (int l = 0; l < hidden_layers(); ++l) {
        const auto& a = activations[l];
        if (a.kind == ActKind::PReLU || a.kind == ActKind::BoPReLU)
            n += a.scope == PreluScope::Neuron ? producer_width(l) : 1;
        else if (a.kind == ActKind::Rational)
            n += a.deg_p + 1 + a.deg_q;
    }
    return n;
}

void NetworkParams::check_finite() const {
    for (size_t l = 0; l < W.size(); ++l) {
        if (!W[l].allFinite())
            throw std::runtime_error("non-finite values in W" + std::to_string(l));
        if (!b[l].allFinite())
            throw std::runtime_error("non-finite values in b" + std::to_string(l));
    }
    for (size_t l = 0; l < act.size(); ++l)
        for (double a : act[l].alpha)
            if (!std::isfinite(a))
                throw std::runtime_error("non-finite activation parameter in layer " +
                                         std::to_string(l));
}

NetworkParams init_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    NetworkParams p;
    for (int l = 0; l < spec.num_layers(); ++l) {
        int fan_in = spec.widths[l];
        int fan_out = spec.producer_width(l);
        // logits layer: unit gain
        double gain = l < spec.hidden_layers() ? kaiming_gain(spec.activations[l])
                                               : 1.0;
        double sd = gain / std::sqrt(static_cast<double>(fan_in));
        auto rng = make_rng(seed, static_cast<std::uint64_t>(l));
        Eigen::MatrixXd W(fan_in, fan_out);
        for (Eigen::Index i = 0; i < W.rows(); ++i)
            for (Eigen::Index j = 0; j < W.cols(); ++j)
                W(i, j) = sd * normal(rng);
        p.W.push_back(std::move(W));
        p.b.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    for (int l = 0; l < spec.hidden_layers(); ++l)
        p.act.push_back(ActivationState::init(spec.activations[l],
                                              spec.producer_width(l),
                                              spec.alpha_init));
    // Global scope shares one slope across layers; init already agrees.
    return p;
}

std::pair<Eigen::MatrixXd, ForwardTape> forward(const NetworkSpec& spec,
                                                const NetworkParams& params,
                                                const Eigen::MatrixXd& batch,
                                                double gamma, Mode mode,
                                                std::mt19937_64* rng) {
    spec.validate();
    if (batch.cols() != spec.widths[0])
        throw std::invalid_argument("batch width does not match input width");
    if (!(gamma > 0)) throw std::invalid_argument("gamma must be > 0");

    ForwardTape tape;
    tape.gamma = gamma;
    tape.batch = static_cast<int>(batch.rows());

    Eigen::MatrixXd x = batch;
    for (int l = 0; l < spec.num_layers(); ++l) {
        tape.inputs.push_back(x);
        Eigen::MatrixXd z =
            (x * params.W[l]).rowwise() + params.b[l].transpose();
        if (!z.allFinite())
            throw std::runtime_error("non-finite pre-activation in layer " +
                                     std::to_string(l));
        if (l == spec.num_layers() - 1) return {z, tape};

        z *= gamma;
        tape.z.push_back(z);
        const ActivationSpec& aspec = spec.activations[l];
        ActivationState astate = params.act[l];
        astate.mode = mode;
        int units = spec.producer_width(l);
        if (aspec.kind == ActKind::CReLU) {
            // per-row concat; the elementwise tape still records z row-major
            ActTape at;
            at.x = flatten_rowmajor(z);
            at.units = units;
            tape.act_tapes.push_back(std::move(at));
            Eigen::MatrixXd y(z.rows(), 2 * z.cols());
            y.leftCols(z.cols()) = z.cwiseMax(0.0);
            y.rightCols(z.cols()) = (-z).cwiseMax(0.0);
            x = std::move(y);
        } else {
            auto [y, at] = act_forward(aspec, astate, flatten_rowmajor(z), units, rng);
            tape.act_tapes.push_back(std::move(at));
            x = unflatten_rowmajor(y, z.rows(), z.cols());
        }
    }
    throw std::logic_error("unreachable");
}

NetGrads backward(const NetworkSpec& spec, const NetworkParams& params,
                  const ForwardTape& tape, const Eigen::MatrixXd& dlogits) {
    int L = spec.num_layers();
    if (static_cast<int>(tape.inputs.size()) != L)
        throw std::invalid_argument("tape does not match network depth");
    NetGrads g;
    g.dW.resize(L);
    g.db.resize(L);
    g.dact.resize(spec.hidden_layers());

    Eigen::MatrixXd d = dlogits;  // gradient wrt layer output
    for (int l = L - 1; l >= 0; --l) {
        if (l < L - 1) {
            const ActivationSpec& aspec = spec.activations[l];
            ActivationState astate = params.act[l];
            const ActTape& at = tape.act_tapes[l];
            Eigen::MatrixXd dz(tape.z[l].rows(), tape.z[l].cols());
            if (aspec.kind == ActKind::CReLU) {
                const Eigen::MatrixXd& z = tape.z[l];
                int u = static_cast<int>(z.cols());
                for (Eigen::Index i = 0; i < z.rows(); ++i)
                    for (Eigen::Index j = 0; j < u; ++j) {
                        double dd = 0.0;
                        if (z(i, j) > 0) dd += d(i, j);
                        if (-z(i, j) > 0) dd -= d(i, u + j);
                        dz(i, j) = dd;
                    }
            } else {
                ActGrads ag = act_backward(aspec, astate, at, flatten_rowmajor(d));
                dz = unflatten_rowmajor(ag.dx, dz.rows(), dz.cols());
                g.dact[l] = std::move(ag);
            }
            dz *= tape.gamma;  // z_scaled = gamma * z_linear
            d = std::move(dz);
        }
        if (d.rows() != tape.inputs[l].rows() || d.cols() != params.W[l].cols())
            throw std::invalid_argument("gradient shape mismatch at layer " +
                                        std::to_string(l));
        g.dW[l] = tape.inputs[l].transpose() * d;
        g.db[l] = d.colwise().sum().transpose();
        if (l > 0) d = (d * params.W[l].transpose()).eval();
    }
    return g;
}

std::pair<double, Eigen::MatrixXd> softmax_xent(const Eigen::MatrixXd& logits,
                                                const std::vector<int>& labels) {
    if (static_cast<size_t>(logits.rows()) != labels.size())
        throw std::invalid_argument("labels do not match batch size");
    int B = static_cast<int>(logits.rows());
    int K = static_cast<int>(logits.cols());
    double loss = 0.0;
    Eigen::MatrixXd d(B, K);
    for (int i = 0; i < B; ++i) {
        if (labels[i] < 0 || labels[i] >= K)
            throw std::invalid_argument("label out of range at sample " +
                                        std::to_string(i));
        double mx = logits.row(i).maxCoeff();
        Eigen::ArrayXd e = (logits.row(i).array() - mx).exp();
        double Z = e.sum();
        loss += -(logits(i, labels[i]) - mx) + std::log(Z);
        d.row(i) = (e / Z).matrix().transpose() / B;
        d(i, labels[i]) -= 1.0 / B;
    }
    return {loss / B, d};
}

OptimizerState OptimizerState::init(OptKind kind, double lr,
                                    const NetworkParams& params) {
    OptimizerState o;
    o.kind = kind;
    o.lr = lr;
    if (kind == OptKind::Adam) {
        for (const auto& W : params.W) {
            o.mW.push_back(Eigen::MatrixXd::Zero(W.rows(), W.cols()));
            o.vW.push_back(Eigen::MatrixXd::Zero(W.rows(), W.cols()));
        }
        for (const auto& b : params.b) {
            o.mb.push_back(Eigen::VectorXd::Zero(b.size()));
            o.vb.push_back(Eigen::VectorXd::Zero(b.size()));
        }
        for (const auto& a : params.act) {
            size_t n = a.alpha.size() + a.num_coeffs.size() + a.den_coeffs.size();
            o.ma.emplace_back(n, 0.0);
            o.va.emplace_back(n, 0.0);
        }
    }
    return o;
}

void step(OptimizerState& opt, const NetworkSpec& spec, NetworkParams& params,
          const NetGrads& grads) {
    for (const auto& dW : grads.dW)
        if (!dW.allFinite())
            throw std::runtime_error("non-finite gradient (weights)");
    for (const auto& db : grads.db)
        if (!db.allFinite()) throw std::runtime_error("non-finite gradient (bias)");

    ++opt.t;
    double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.t));
    double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.t));

    // Global-scope learnable slopes: one shared parameter, summed gradient.
    double shared_dalpha = 0.0;
    bool shared = spec.hidden_layers() > 0 && global_scoped(spec.activations[0]);
    if (shared)
        for (const auto& ag : grads.dact)
            if (!ag.dalpha.empty()) shared_dalpha += ag.dalpha[0];

    for (size_t l = 0; l < params.W.size(); ++l) {
        if (opt.kind == OptKind::SGD) {
            params.W[l] -= opt.lr * grads.dW[l];
            params.b[l] -= opt.lr * grads.db[l];
        } else {
            for (Eigen::Index i = 0; i < params.W[l].size(); ++i)
                adam_update(params.W[l].data()[i], grads.dW[l].data()[i],
                            opt.mW[l].data()[i], opt.vW[l].data()[i], opt.lr,
                            opt.beta1, opt.beta2, opt.eps, bc1, bc2);
            for (Eigen::Index i = 0; i < params.b[l].size(); ++i)
                adam_update(params.b[l].data()[i], grads.db[l].data()[i],
                            opt.mb[l].data()[i], opt.vb[l].data()[i], opt.lr,
                            opt.beta1, opt.beta2, opt.eps, bc1, bc2);
        }
    }

    for (size_t l = 0; l < params.act.size(); ++l) {
        if (l >= grads.dact.size()) break;
        auto& st = params.act[l];
        const auto& ag = grads.dact[l];
        std::vector<double> g;
        for (size_t j = 0; j < st.alpha.size(); ++j)
            g.push_back(shared ? (l == 0 ? shared_dalpha : 0.0)
                               : (j < ag.dalpha.size() ? ag.dalpha[j] : 0.0));
        for (size_t j = 0; j < st.num_coeffs.size(); ++j)
            g.push_back(j < ag.dnum_coeffs.size() ? ag.dnum_coeffs[j] : 0.0);
        for (size_t j = 0; j < st.den_coeffs.size(); ++j)
            g.push_back(j < ag.dden_coeffs.size() ? ag.dden_coeffs[j] : 0.0);
        for (double gv : g)
            if (!std::isfinite(gv))
                throw std::runtime_error("non-finite gradient (activation layer " +
                                         std::to_string(l) + ")");
        size_t k = 0;
        auto upd = [&](double& theta) {
            if (opt.kind == OptKind::SGD)
                theta -= opt.lr * g[k];
            else
                adam_update(theta, g[k], opt.ma[l][k], opt.va[l][k], opt.lr,
                            opt.beta1, opt.beta2, opt.eps, bc1, bc2);
            ++k;
        };
        for (auto& a : st.alpha) upd(a);
        for (auto& a : st.num_coeffs) upd(a);
        for (auto& a : st.den_coeffs) upd(a);
    }
    if (shared)
        for (size_t l = 1; l < params.act.size(); ++l)
            if (!params.act[l].alpha.empty())
                params.act[l].alpha[0] = params.act[0].alpha[0];
}

Eigen::MatrixXd per_sample_gradients(const NetworkSpec& spec,
                                     const NetworkParams& params,
                                     const Eigen::MatrixXd& batch,
                                     const std::vector<int>& labels, int layer) {
    int m = static_cast<int>(batch.rows());
    if (m == 0) throw std::invalid_argument("per_sample_gradients: empty batch");
    if (m > 256)
        throw std::invalid_argument("per_sample_gradients: batch too large");
    if (layer < 0 || layer >= spec.num_layers())
        throw std::invalid_argument("per_sample_gradients: bad layer index");
    long d = params.W[layer].size();
    Eigen::MatrixXd G(d, m);
    for (int i = 0; i < m; ++i) {
        auto [logits, tape] =
            forward(spec, params, batch.row(i), 1.0, Mode::Eval);
        auto [loss, dlogits] = softmax_xent(logits, {labels[i]});
        NetGrads g = backward(spec, params, tape, dlogits);
        G.col(i) = flatten_rowmajor(g.dW[layer]).matrix();
    }
    return G;
}

double dead_unit_fraction(const NetworkSpec& spec, const NetworkParams& params,
                          const std::vector<Eigen::MatrixXd>& probe_batches,
                          double eps) {
    if (probe_batches.empty())
        throw std::invalid_argument("dead_unit_fraction: no probe batches");
    long total = 0, dead = 0;
    for (int l = 0; l < spec.hidden_layers(); ++l)
        total += spec.producer_width(l);
    if (total == 0) return 0.0;

    std::vector<std::vector<bool>> alive(spec.hidden_layers());
    for (int l = 0; l < spec.hidden_layers(); ++l)
        alive[l].assign(spec.producer_width(l), false);

    for (const auto& batch : probe_batches) {
        auto [logits, tape] = forward(spec, params, batch, 1.0, Mode::Eval);
        for (int l = 0; l < spec.hidden_layers(); ++l) {
            ActivationState st = params.act[l];
            st.mode = Mode::Eval;
            const Eigen::MatrixXd& z = tape.z[l];
            for (Eigen::Index i = 0; i < z.rows(); ++i)
                for (Eigen::Index j = 0; j < z.cols(); ++j)
                    if (act_deriv_mag(spec.activations[l], st, z(i, j),
                                      static_cast<int>(j)) >= eps)
                        alive[l][j] = true;
        }
    }
    for (const auto& layer : alive)
        for (bool a : layer)
            if (!a) ++dead;
    return static_cast<double>(dead) / static_cast<double>(total);
}

}  // namespace plast
