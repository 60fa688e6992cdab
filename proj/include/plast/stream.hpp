#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace plast {

struct Dataset {
    Eigen::MatrixXd X;   // N x D
    std::vector<int> y;  // class ids in [0, classes)
    int classes = 0;

    int n() const { return static_cast<int>(X.rows()); }
    int dim() const { return static_cast<int>(X.cols()); }
    void validate() const;
};

// Seeded K-class generator: each class is a mixture of `clusters_per_class`
// Gaussian blobs, so the classes are not linearly separable for >= 2 clusters
// (XOR-style layout). Features squashed into [0,1].
Dataset synthetic_blobs(int per_class, int classes, int dim, std::uint64_t seed,
                        int clusters_per_class = 2, double spread = 0.08);

enum class StreamKind { PermutedInput, RandomLabel, SplitClassAlternating, BinaryPair };

std::string stream_kind_name(StreamKind k);
StreamKind stream_kind_from_name(const std::string& name);

struct StreamConfig {
    StreamKind kind = StreamKind::PermutedInput;
    int tasks = 10;
    int epochs = 1;       // full passes per task (ignored if step_budget > 0)
    int batch_size = 16;
    int subset = 0;       // samples per task for permuted / random-label (0 = all)
    int per_class = 0;    // samples per class for the class-based protocols
    int hard_classes = 5; // fresh classes on even tasks (split-alternating)
    int easy_classes = 1; // fresh classes on odd tasks
    int step_budget = 0;  // fixed batches per task; data cycles to fill it
    std::uint64_t seed = 0;

    void validate() const;
};

struct Batch {
    Eigen::MatrixXd X;
    std::vector<int> y;
};

// One realized task: transformed features / remapped labels, ready to batch.
struct Task {
    int index = 0;
    Dataset data;
    std::vector<int> source_classes;  // original class ids (class protocols)
    std::vector<int> permutation;     // feature permutation (PermutedInput)
};

// Deterministic in (config, base, task_index). Throws std::out_of_range when a
// class-budget protocol has exhausted fresh classes.
Task make_task(const StreamConfig& cfg, const Dataset& base, int task_index);

// Epoch-shuffled batches; shuffling is derived from (seed, task, epoch). With
// a step budget the epoch sequence cycles and truncates to exactly
// step_budget batches.
std::vector<Batch> task_batches(const StreamConfig& cfg, const Task& task);

class ReplayBuffer {
  public:
    ReplayBuffer(int capacity, int per_task_cap, std::uint64_t seed);

    // Per-task reservoir under `per_task_cap`; global capacity kept by random
    // eviction.
    void insert(const Eigen::MatrixXd& X, const std::vector<int>& y, int task);
    // Uniform without replacement within one call.
    Batch sample(int n);

    int size() const { return static_cast<int>(items_.size()); }
    int capacity() const { return capacity_; }
    int task_count(int task) const;

  private:
    struct Item {
        Eigen::VectorXd x;
        int y;
        int task;
    };
    void check_invariants() const;

    std::vector<Item> items_;
    std::unordered_map<int, std::vector<int>> slots_;  // task -> item indices
    std::unordered_map<int, long> seen_;
    int capacity_, per_task_cap_;
    std::mt19937_64 rng_;
};

enum class DataFormat { IDX, CSV };

// IDX ingestion (big-endian, magic 0x00000803 / 0x00000801); pixel bytes are
// scaled to [0,1]. Parse errors carry the byte offset.
Eigen::MatrixXd load_idx_images(const std::string& path);
std::vector<int> load_idx_labels(const std::string& path);

// CSV: label first, features after; a header line is auto-detected by a
// non-numeric first cell. Errors carry the 1-based line number.
Dataset load_csv_dataset(const std::string& path);

// IDX expects `path` to name the image file with "images" in the filename;
// the label file is found by substituting "labels".
Dataset load_dataset(const std::string& path, DataFormat format);

}  // namespace plast
