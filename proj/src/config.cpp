#include "plast/config.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace plast {

namespace {

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end())
        throw std::runtime_error(std::string("missing field '") + key + "'");
    return *it;
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    auto it = j.find(key);
    if (it != j.end()) out = it->get<T>();
}

std::string scope_name(PreluScope s) {
    switch (s) {
        case PreluScope::Global: return "global";
        case PreluScope::Layer: return "layer";
        case PreluScope::Neuron: return "neuron";
    }
    throw std::logic_error("bad scope");
}

PreluScope scope_from_name(const std::string& name) {
    for (PreluScope s : {PreluScope::Global, PreluScope::Layer, PreluScope::Neuron})
        if (scope_name(s) == name) return s;
    throw std::runtime_error("unknown scope '" + name + "'");
}

}  // namespace

std::string experiment_kind_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::GoldilocksSweep: return "goldilocks_sweep";
        case ExperimentKind::ShockStudy: return "shock_study";
        case ExperimentKind::ContinualBenchmark: return "continual_benchmark";
        case ExperimentKind::RlMetrics: return "rl_metrics";
        case ExperimentKind::PropertyGrid: return "property_grid";
    }
    throw std::logic_error("bad experiment kind");
}

ExperimentKind experiment_kind_from_name(const std::string& name) {
    for (ExperimentKind k :
         {ExperimentKind::GoldilocksSweep, ExperimentKind::ShockStudy,
          ExperimentKind::ContinualBenchmark, ExperimentKind::RlMetrics,
          ExperimentKind::PropertyGrid})
        if (experiment_kind_name(k) == name) return k;
    throw std::runtime_error("unknown experiment kind '" + name + "'");
}

void ExperimentConfig::validate() const {
    if (name.empty()) throw std::runtime_error("field 'name' must be non-empty");
    if (seeds.empty() && kind != ExperimentKind::PropertyGrid &&
        kind != ExperimentKind::RlMetrics)
        throw std::runtime_error("field 'seeds' must be non-empty");
    if (kind == ExperimentKind::RlMetrics && returns_csv.empty())
        throw std::runtime_error("field 'returns_csv' required for rl_metrics");
    if (widths.size() < 2)
        throw std::runtime_error("field 'widths' needs input and output sizes");
    for (const auto& a : activations) a.validate();
    stream.validate();
    schedule.validate();
    if (epochs <= 0) throw std::runtime_error("field 'epochs' must be positive");
    if (!(lr > 0)) throw std::runtime_error("field 'lr' must be positive");
    if (scale <= 0) throw std::runtime_error("field 'scale' must be positive");
}

NetworkSpec ExperimentConfig::net_for(const ActivationSpec& act) const {
    NetworkSpec net;
    net.widths = widths;
    net.activations.assign(net.hidden_layers(), act);
    net.alpha_init = alpha_init;
    net.validate();
    return net;
}

void to_json(nlohmann::json& j, const ActivationSpec& s) {
    j = {{"kind", act_kind_name(s.kind)}, {"alpha", s.alpha},
         {"beta", s.beta},               {"c", s.c},
         {"p", s.p},                     {"lower", s.lower},
         {"upper", s.upper},             {"scope", scope_name(s.scope)},
         {"deg_p", s.deg_p},             {"deg_q", s.deg_q}};
}

void from_json(const nlohmann::json& j, ActivationSpec& s) {
    s.kind = act_kind_from_name(require(j, "kind").get<std::string>());
    maybe(j, "alpha", s.alpha);
    maybe(j, "beta", s.beta);
    maybe(j, "c", s.c);
    maybe(j, "p", s.p);
    maybe(j, "lower", s.lower);
    maybe(j, "upper", s.upper);
    if (j.contains("scope")) s.scope = scope_from_name(j["scope"].get<std::string>());
    maybe(j, "deg_p", s.deg_p);
    maybe(j, "deg_q", s.deg_q);
    s.validate();
}

void to_json(nlohmann::json& j, const StreamConfig& s) {
    j = {{"kind", stream_kind_name(s.kind)},
         {"tasks", s.tasks},
         {"epochs", s.epochs},
         {"batch_size", s.batch_size},
         {"subset", s.subset},
         {"per_class", s.per_class},
         {"hard_classes", s.hard_classes},
         {"easy_classes", s.easy_classes},
         {"step_budget", s.step_budget},
         {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, StreamConfig& s) {
    s.kind = stream_kind_from_name(require(j, "kind").get<std::string>());
    maybe(j, "tasks", s.tasks);
    maybe(j, "epochs", s.epochs);
    maybe(j, "batch_size", s.batch_size);
    maybe(j, "subset", s.subset);
    maybe(j, "per_class", s.per_class);
    maybe(j, "hard_classes", s.hard_classes);
    maybe(j, "easy_classes", s.easy_classes);
    maybe(j, "step_budget", s.step_budget);
    maybe(j, "seed", s.seed);
    s.validate();
}

void to_json(nlohmann::json& j, const ShockSchedule& s) {
    j = {{"gammas", s.gammas}, {"cycle", s.cycle}};
}

void from_json(const nlohmann::json& j, ShockSchedule& s) {
    maybe(j, "gammas", s.gammas);
    maybe(j, "cycle", s.cycle);
    s.validate();
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = {{"name", c.name},
         {"kind", experiment_kind_name(c.kind)},
         {"activations", c.activations},
         {"widths", c.widths},
         {"alpha_init", c.alpha_init},
         {"stream", c.stream},
         {"schedule", c.schedule},
         {"opt", c.opt == OptKind::Adam ? "adam" : "sgd"},
         {"lr", c.lr},
         {"epochs", c.epochs},
         {"scale", c.scale},
         {"seeds", c.seeds},
         {"out_dir", c.out_dir},
         {"returns_csv", c.returns_csv}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    c.name = require(j, "name").get<std::string>();
    c.kind = experiment_kind_from_name(require(j, "kind").get<std::string>());
    maybe(j, "activations", c.activations);
    maybe(j, "widths", c.widths);
    maybe(j, "alpha_init", c.alpha_init);
    if (j.contains("stream")) c.stream = j["stream"].get<StreamConfig>();
    if (j.contains("schedule")) c.schedule = j["schedule"].get<ShockSchedule>();
    if (j.contains("opt")) {
        std::string o = j["opt"].get<std::string>();
        if (o == "adam") c.opt = OptKind::Adam;
        else if (o == "sgd") c.opt = OptKind::SGD;
        else throw std::runtime_error("field 'opt' must be 'adam' or 'sgd'");
    }
    maybe(j, "lr", c.lr);
    maybe(j, "epochs", c.epochs);
    maybe(j, "scale", c.scale);
    maybe(j, "seeds", c.seeds);
    maybe(j, "out_dir", c.out_dir);
    maybe(j, "returns_csv", c.returns_csv);
    c.validate();
}

std::string config_hash(const ExperimentConfig& c) {
    nlohmann::json j = c;
    std::string s = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("config parse error in '" + path + "': " + e.what());
    }
    try {
        return j.get<ExperimentConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("config schema error in '" + path + "': " + e.what());
    }
}

void save_config(const ExperimentConfig& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config '" + path + "'");
    out << nlohmann::json(c).dump(2) << "\n";
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    Eigen::MatrixXd m(j.size(), j.empty() ? 0 : j[0].size());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index k = 0; k < m.cols(); ++k)
            m(i, k) = j[i][k].get<double>();
    return m;
}

}  // namespace

void save_params(const NetworkSpec& spec, const NetworkParams& params,
                 const std::string& path) {
    nlohmann::json j;
    j["widths"] = spec.widths;
    for (size_t l = 0; l < params.W.size(); ++l) {
        j["W"].push_back(matrix_json(params.W[l]));
        nlohmann::json b = nlohmann::json::array();
        for (Eigen::Index i = 0; i < params.b[l].size(); ++i)
            b.push_back(params.b[l][i]);
        j["b"].push_back(std::move(b));
    }
    j["act"] = nlohmann::json::array();
    for (const auto& st : params.act)
        j["act"].push_back({{"alpha", st.alpha},
                            {"num_coeffs", st.num_coeffs},
                            {"den_coeffs", st.den_coeffs}});
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
    out << j.dump() << "\n";
}

NetworkParams load_params(const NetworkSpec& spec, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    nlohmann::json j;
    in >> j;
    if (require(j, "widths").get<std::vector<int>>() != spec.widths)
        throw std::runtime_error("checkpoint widths do not match the network");
    NetworkParams p;
    for (const auto& w : require(j, "W")) p.W.push_back(matrix_from_json(w));
    for (const auto& b : require(j, "b")) {
        Eigen::VectorXd v(b.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = b[i].get<double>();
        p.b.push_back(std::move(v));
    }
    for (size_t l = 0; l < require(j, "act").size(); ++l) {
        const auto& a = j["act"][l];
        ActivationState st;
        st.alpha = require(a, "alpha").get<std::vector<double>>();
        st.num_coeffs = require(a, "num_coeffs").get<std::vector<double>>();
        st.den_coeffs = require(a, "den_coeffs").get<std::vector<double>>();
        p.act.push_back(std::move(st));
    }
    if (p.W.size() != static_cast<size_t>(spec.num_layers()) ||
        p.act.size() != static_cast<size_t>(spec.hidden_layers()))
        throw std::runtime_error("checkpoint layer count does not match the network");
    return p;
}

}  // namespace plast
