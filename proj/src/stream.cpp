#include "plast/stream.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "plast/rng.hpp"

namespace plast {

namespace {

constexpr std::uint64_t kSubsetStream = 0xA11CE;
constexpr std::uint64_t kPermStream = 0x9E12;
constexpr std::uint64_t kLabelStream = 0x1AB31;
constexpr std::uint64_t kOrderStream = 0x0D2D;
constexpr std::uint64_t kClassStream = 0xC1A55;

std::vector<int> seeded_shuffle(int n, std::mt19937_64 rng) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

// Fixed sample subset shared by every task of a stream.
std::vector<int> stream_subset(const StreamConfig& cfg, const Dataset& base) {
    int want = cfg.subset > 0 ? cfg.subset : base.n();
    if (want > base.n())
        throw std::invalid_argument("stream subset larger than base dataset");
    auto idx = seeded_shuffle(base.n(), make_rng(cfg.seed, kSubsetStream));
    idx.resize(want);
    return idx;
}

// Class ids consumed by tasks [0, task_index], in stream order.
std::vector<std::vector<int>> class_schedule(const StreamConfig& cfg,
                                             const Dataset& base,
                                             int task_index) {
    auto order = seeded_shuffle(base.classes, make_rng(cfg.seed, kClassStream));
    std::vector<std::vector<int>> sched;
    size_t next = 0;
    for (int t = 0; t <= task_index; ++t) {
        int need = cfg.kind == StreamKind::BinaryPair
                       ? 2
                       : (t % 2 == 0 ? cfg.hard_classes : cfg.easy_classes);
        if (next + need > order.size())
            throw std::out_of_range(
                "task " + std::to_string(t) + " needs " + std::to_string(need) +
                " fresh classes but only " +
                std::to_string(order.size() - next) + " remain");
        sched.emplace_back(order.begin() + next, order.begin() + next + need);
        next += need;
    }
    return sched;
}

// First `per_class` samples of each listed class, remapped to 0..k-1.
Dataset gather_classes(const Dataset& base, const std::vector<int>& classes,
                       int per_class) {
    std::vector<int> rows;
    std::vector<int> labels;
    for (size_t k = 0; k < classes.size(); ++k) {
        int found = 0;
        for (int i = 0; i < base.n() && found < per_class; ++i)
            if (base.y[i] == classes[k]) {
                rows.push_back(i);
                labels.push_back(static_cast<int>(k));
                ++found;
            }
        if (found < per_class)
            throw std::invalid_argument("class " + std::to_string(classes[k]) +
                                        " has only " + std::to_string(found) +
                                        " samples, need " +
                                        std::to_string(per_class));
    }
    Dataset out;
    out.X.resize(static_cast<int>(rows.size()), base.dim());
    for (size_t i = 0; i < rows.size(); ++i) out.X.row(i) = base.X.row(rows[i]);
    out.y = std::move(labels);
    out.classes = static_cast<int>(classes.size());
    return out;
}

std::uint32_t read_be32(std::istream& in, const std::string& path,
                        long& offset) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in)
        throw std::runtime_error(path + ": truncated at byte offset " +
                                 std::to_string(offset));
    offset += 4;
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

bool numeric_cell(const std::string& s) {
    if (s.empty()) return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end && *end == '\0';
}

}  // namespace

void Dataset::validate() const {
    if (n() < 1) throw std::invalid_argument("dataset must have >= 1 sample");
    if (static_cast<int>(y.size()) != n())
        throw std::invalid_argument("label count does not match sample count");
    for (size_t i = 0; i < y.size(); ++i)
        if (y[i] < 0 || y[i] >= classes)
            throw std::invalid_argument("label out of range at sample " +
                                        std::to_string(i));
}

Dataset synthetic_blobs(int per_class, int classes, int dim, std::uint64_t seed,
                        int clusters_per_class, double spread) {
    if (per_class < 1 || classes < 1 || dim < 1 || clusters_per_class < 1)
        throw std::invalid_argument("synthetic_blobs: sizes must be >= 1");
    Dataset d;
    d.classes = classes;
    d.X.resize(per_class * classes, dim);
    d.y.resize(per_class * classes);

    // cluster centers in (0,1)^dim
    auto crng = make_rng(seed, 0xB10B);
    std::vector<Eigen::VectorXd> centers;
    for (int c = 0; c < classes * clusters_per_class; ++c) {
        Eigen::VectorXd m(dim);
        for (int j = 0; j < dim; ++j) m[j] = uniform(crng, 0.15, 0.85);
        centers.push_back(std::move(m));
    }

    auto rng = make_rng(seed, 0x5A3);
    int row = 0;
    for (int c = 0; c < classes; ++c)
        for (int i = 0; i < per_class; ++i, ++row) {
            int cl = c * clusters_per_class +
                     static_cast<int>(rng() % clusters_per_class);
            for (int j = 0; j < dim; ++j) {
                double v = centers[cl][j] + spread * normal(rng);
                d.X(row, j) = std::clamp(v, 0.0, 1.0);
            }
            d.y[row] = c;
        }
    d.validate();
    return d;
}

std::string stream_kind_name(StreamKind k) {
    switch (k) {
        case StreamKind::PermutedInput: return "permuted_input";
        case StreamKind::RandomLabel: return "random_label";
        case StreamKind::SplitClassAlternating: return "split_class_alternating";
        case StreamKind::BinaryPair: return "binary_pair";
    }
    return "?";
}

StreamKind stream_kind_from_name(const std::string& name) {
    for (auto k : {StreamKind::PermutedInput, StreamKind::RandomLabel,
                   StreamKind::SplitClassAlternating, StreamKind::BinaryPair})
        if (stream_kind_name(k) == name) return k;
    throw std::invalid_argument("unknown stream kind: " + name);
}

void StreamConfig::validate() const {
    if (tasks < 1 || batch_size < 1)
        throw std::invalid_argument("stream needs tasks >= 1 and batch_size >= 1");
    if (epochs < 1 && step_budget < 1)
        throw std::invalid_argument("stream needs epochs >= 1 or a step budget");
    if ((kind == StreamKind::SplitClassAlternating ||
         kind == StreamKind::BinaryPair) &&
        per_class < 1)
        throw std::invalid_argument("class-based streams need per_class >= 1");
}

Task make_task(const StreamConfig& cfg, const Dataset& base, int task_index) {
    cfg.validate();
    base.validate();
    if (task_index < 0) throw std::invalid_argument("task_index must be >= 0");
    Task t;
    t.index = task_index;

    switch (cfg.kind) {
        case StreamKind::PermutedInput: {
            auto subset = stream_subset(cfg, base);
            t.permutation = seeded_shuffle(
                base.dim(),
                make_rng(cfg.seed, kPermStream,
                         static_cast<std::uint64_t>(task_index)));
            t.data.X.resize(static_cast<int>(subset.size()), base.dim());
            t.data.y.resize(subset.size());
            for (size_t i = 0; i < subset.size(); ++i) {
                for (int j = 0; j < base.dim(); ++j)
                    t.data.X(static_cast<int>(i), j) =
                        base.X(subset[i], t.permutation[j]);
                t.data.y[i] = base.y[subset[i]];
            }
            t.data.classes = base.classes;
            break;
        }
        case StreamKind::RandomLabel: {
            auto subset = stream_subset(cfg, base);
            t.data.X.resize(static_cast<int>(subset.size()), base.dim());
            t.data.y.resize(subset.size());
            auto lrng = make_rng(cfg.seed, kLabelStream,
                                 static_cast<std::uint64_t>(task_index));
            for (size_t i = 0; i < subset.size(); ++i) {
                t.data.X.row(static_cast<int>(i)) = base.X.row(subset[i]);
                t.data.y[i] = static_cast<int>(lrng() %
                                               static_cast<unsigned>(base.classes));
            }
            t.data.classes = base.classes;
            break;
        }
        case StreamKind::SplitClassAlternating:
        case StreamKind::BinaryPair: {
            auto sched = class_schedule(cfg, base, task_index);
            t.source_classes = sched.back();
            t.data = gather_classes(base, t.source_classes, cfg.per_class);
            break;
        }
    }
    t.data.validate();
    return t;
}

std::vector<Batch> task_batches(const StreamConfig& cfg, const Task& task) {
    const Dataset& d = task.data;
    std::vector<Batch> out;
    auto emit_epoch = [&](int epoch, int limit) {
        auto order = seeded_shuffle(
            d.n(), make_rng(cfg.seed, kOrderStream,
                            static_cast<std::uint64_t>(task.index),
                            static_cast<std::uint64_t>(epoch)));
        for (int start = 0; start < d.n(); start += cfg.batch_size) {
            if (limit >= 0 && static_cast<int>(out.size()) >= limit) return;
            int bn = std::min(cfg.batch_size, d.n() - start);
            Batch b;
            b.X.resize(bn, d.dim());
            b.y.resize(bn);
            for (int i = 0; i < bn; ++i) {
                b.X.row(i) = d.X.row(order[start + i]);
                b.y[i] = d.y[order[start + i]];
            }
            out.push_back(std::move(b));
        }
    };
    if (cfg.step_budget > 0) {
        for (int epoch = 0; static_cast<int>(out.size()) < cfg.step_budget;
             ++epoch)
            emit_epoch(epoch, cfg.step_budget);
    } else {
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) emit_epoch(epoch, -1);
    }
    return out;
}

ReplayBuffer::ReplayBuffer(int capacity, int per_task_cap, std::uint64_t seed)
    : capacity_(capacity), per_task_cap_(per_task_cap),
      rng_(make_rng(seed, 0xBDF)) {
    if (capacity < 1 || per_task_cap < 1)
        throw std::invalid_argument("buffer capacity and cap must be >= 1");
}

int ReplayBuffer::task_count(int task) const {
    auto it = slots_.find(task);
    return it == slots_.end() ? 0 : static_cast<int>(it->second.size());
}

void ReplayBuffer::check_invariants() const {
    if (size() > capacity_)
        throw std::logic_error("replay buffer exceeded capacity");
    size_t total = 0;
    for (const auto& [task, idx] : slots_) {
        if (static_cast<int>(idx.size()) > per_task_cap_)
            throw std::logic_error("replay buffer exceeded per-task cap for task " +
                                   std::to_string(task));
        total += idx.size();
    }
    if (total != items_.size())
        throw std::logic_error("replay buffer slot index out of sync");
}

void ReplayBuffer::insert(const Eigen::MatrixXd& X, const std::vector<int>& y,
                          int task) {
    if (static_cast<size_t>(X.rows()) != y.size())
        throw std::invalid_argument("replay insert: feature/label count mismatch");
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        long seen = ++seen_[task];
        Item item{X.row(i).transpose(), y[i], task};
        auto& mine = slots_[task];
        if (static_cast<int>(mine.size()) < per_task_cap_) {
            if (size() == capacity_) {
                // global random eviction to make room
                int victim = static_cast<int>(rng_() % items_.size());
                auto& vslots = slots_[items_[victim].task];
                vslots.erase(std::find(vslots.begin(), vslots.end(), victim));
                items_[victim] = std::move(item);
                mine.push_back(victim);
            } else {
                items_.push_back(std::move(item));
                mine.push_back(static_cast<int>(items_.size()) - 1);
            }
        } else {
            // within-task reservoir: keep with probability cap/seen
            if (static_cast<long>(rng_() % static_cast<std::uint64_t>(seen)) <
                per_task_cap_) {
                int pick = mine[rng_() % mine.size()];
                items_[pick] = std::move(item);
            }
        }
    }
    check_invariants();
}

Batch ReplayBuffer::sample(int n) {
    if (items_.empty())
        throw std::runtime_error("cannot sample from an empty replay buffer");
    if (n < 1 || n > size())
        throw std::invalid_argument("replay sample size out of range");
    std::vector<int> idx(items_.size());
    std::iota(idx.begin(), idx.end(), 0);
    // partial Fisher-Yates: first n entries are a uniform sample w/o replacement
    for (int i = 0; i < n; ++i) {
        int j = i + static_cast<int>(rng_() % (idx.size() - i));
        std::swap(idx[i], idx[j]);
    }
    Batch b;
    b.X.resize(n, items_[0].x.size());
    b.y.resize(n);
    for (int i = 0; i < n; ++i) {
        b.X.row(i) = items_[idx[i]].x.transpose();
        b.y[i] = items_[idx[i]].y;
    }
    return b;
}

Eigen::MatrixXd load_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open");
    long offset = 0;
    std::uint32_t magic = read_be32(in, path, offset);
    if (magic != 0x00000803)
        throw std::runtime_error(path + ": bad image magic at byte offset 0");
    std::uint32_t n = read_be32(in, path, offset);
    std::uint32_t rows = read_be32(in, path, offset);
    std::uint32_t cols = read_be32(in, path, offset);
    Eigen::MatrixXd X(n, static_cast<long>(rows) * cols);
    std::vector<unsigned char> buf(static_cast<size_t>(rows) * cols);
    for (std::uint32_t i = 0; i < n; ++i) {
        in.read(reinterpret_cast<char*>(buf.data()), buf.size());
        if (!in)
            throw std::runtime_error(path + ": truncated at byte offset " +
                                     std::to_string(offset));
        offset += static_cast<long>(buf.size());
        for (size_t j = 0; j < buf.size(); ++j)
            X(i, static_cast<long>(j)) = buf[j] / 255.0;
    }
    return X;
}

std::vector<int> load_idx_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open");
    long offset = 0;
    std::uint32_t magic = read_be32(in, path, offset);
    if (magic != 0x00000801)
        throw std::runtime_error(path + ": bad label magic at byte offset 0");
    std::uint32_t n = read_be32(in, path, offset);
    std::vector<int> y(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        int c = in.get();
        if (c == EOF)
            throw std::runtime_error(path + ": truncated at byte offset " +
                                     std::to_string(offset));
        ++offset;
        y[i] = c;
    }
    return y;
}

Dataset load_csv_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open");
    Dataset d;
    std::string line;
    long lineno = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (lineno == 1 && !cells.empty() && !numeric_cell(cells[0]))
            continue;  // header
        if (cells.size() < 2)
            throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                     ": need a label and at least one feature");
        std::vector<double> vals;
        for (const auto& c : cells) {
            if (!numeric_cell(c))
                throw std::runtime_error(path + ": line " +
                                         std::to_string(lineno) +
                                         ": non-numeric cell '" + c + "'");
            vals.push_back(std::stod(c));
        }
        double lbl = vals[0];
        if (lbl != std::floor(lbl) || lbl < 0)
            throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                     ": label must be a non-negative integer");
        if (!rows.empty() && vals.size() != rows.front().size() + 1)
            throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                     ": inconsistent column count");
        d.y.push_back(static_cast<int>(lbl));
        vals.erase(vals.begin());
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw std::runtime_error(path + ": no data rows");
    d.X.resize(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows[i].size(); ++j)
            d.X(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    d.classes = *std::max_element(d.y.begin(), d.y.end()) + 1;
    d.validate();
    return d;
}

Dataset load_dataset(const std::string& path, DataFormat format) {
    if (format == DataFormat::CSV) return load_csv_dataset(path);
    auto pos = path.find("images");
    if (pos == std::string::npos)
        throw std::runtime_error(
            path + ": IDX image path must contain 'images' so the matching "
                   "label file can be located");
    std::string label_path = path;
    label_path.replace(pos, 6, "labels");
    Dataset d;
    d.X = load_idx_images(path);
    d.y = load_idx_labels(label_path);
    if (static_cast<size_t>(d.X.rows()) != d.y.size())
        throw std::runtime_error(path + ": image/label counts differ");
    d.classes = d.y.empty() ? 0 : *std::max_element(d.y.begin(), d.y.end()) + 1;
    d.validate();
    return d;
}

}  // namespace plast
