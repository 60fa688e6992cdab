#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "doctest.h"
#include "plast/stream.hpp"

using namespace plast;

namespace {

Dataset base20(int per_class = 60) {
    return synthetic_blobs(per_class, 20, 12, 11);
}

bool batches_equal(const std::vector<Batch>& a, const std::vector<Batch>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i].y != b[i].y) return false;
        if ((a[i].X - b[i].X).cwiseAbs().maxCoeff() != 0.0) return false;
    }
    return true;
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/plast_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("synthetic blobs: shape, range, determinism") {
    Dataset d = synthetic_blobs(50, 4, 8, 3);
    CHECK(d.n() == 200);
    CHECK(d.dim() == 8);
    CHECK(d.classes == 4);
    CHECK(d.X.minCoeff() >= 0.0);
    CHECK(d.X.maxCoeff() <= 1.0);
    Dataset e = synthetic_blobs(50, 4, 8, 3);
    CHECK((d.X - e.X).cwiseAbs().maxCoeff() == 0.0);
    CHECK(d.y == e.y);
}

TEST_CASE("permuted tasks") {
    Dataset base = synthetic_blobs(30, 5, 10, 7);
    StreamConfig cfg{.kind = StreamKind::PermutedInput, .tasks = 5, .epochs = 1,
                     .batch_size = 16, .subset = 100, .seed = 0};
    Task t0 = make_task(cfg, base, 0);
    Task t0b = make_task(cfg, base, 0);
    CHECK(batches_equal(task_batches(cfg, t0), task_batches(cfg, t0b)));

    // pi is a bijection over feature indices
    auto sorted = t0.permutation;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> want(base.dim());
    std::iota(want.begin(), want.end(), 0);
    CHECK(sorted == want);

    Task t1 = make_task(cfg, base, 1);
    CHECK(t0.permutation != t1.permutation);

    // label-preserving: task rows are permutations of base rows, same labels
    CHECK(t0.data.n() == 100);
    std::multiset<double> a, b;
    for (int j = 0; j < base.dim(); ++j) a.insert(t0.data.X(0, j));
    // locate the base row by matching the sorted feature multiset and label
    bool found = false;
    for (int i = 0; i < base.n() && !found; ++i) {
        if (base.y[i] != t0.data.y[0]) continue;
        std::multiset<double> c;
        for (int j = 0; j < base.dim(); ++j) c.insert(base.X(i, j));
        found = a == c;
    }
    CHECK(found);
}

TEST_CASE("random label tasks") {
    Dataset base = synthetic_blobs(120, 10, 6, 9);
    StreamConfig cfg{.kind = StreamKind::RandomLabel, .tasks = 10, .epochs = 2,
                     .batch_size = 16, .subset = 1200, .seed = 4};
    Task t3 = make_task(cfg, base, 3);
    Task t7 = make_task(cfg, base, 7);
    CHECK((t3.data.X - t7.data.X).cwiseAbs().maxCoeff() == 0.0);
    CHECK(t3.data.y != t7.data.y);
    Task t3b = make_task(cfg, base, 3);
    CHECK(t3.data.y == t3b.data.y);

    // binomial bound: each class within 5 sigma of 1200/10
    std::vector<int> hist(10, 0);
    for (int y : t3.data.y) ++hist[y];
    double sigma = std::sqrt(1200 * 0.1 * 0.9);
    for (int h : hist) CHECK(std::abs(h - 120.0) < 5 * sigma);
}

TEST_CASE("split class alternating tasks") {
    Dataset base = base20();
    StreamConfig cfg{.kind = StreamKind::SplitClassAlternating, .tasks = 8,
                     .epochs = 1, .batch_size = 32, .per_class = 50,
                     .hard_classes = 2, .easy_classes = 1, .step_budget = 8,
                     .seed = 5};
    std::set<int> used;
    for (int t = 0; t < 8; ++t) {
        Task task = make_task(cfg, base, t);
        int expect = t % 2 == 0 ? 2 : 1;
        CHECK(static_cast<int>(task.source_classes.size()) == expect);
        std::set<int> labels(task.data.y.begin(), task.data.y.end());
        CHECK(static_cast<int>(labels.size()) == expect);
        for (int c : task.source_classes) {
            CHECK(used.count(c) == 0);  // never repeats
            used.insert(c);
        }
        CHECK(task.data.n() == expect * 50);
    }
    // 8 tasks consumed 4*2 + 4*1 = 12 classes; 20-class budget dies at task 13+
    StreamConfig big = cfg;
    big.tasks = 14;
    CHECK_THROWS_AS(make_task(big, base, 13), std::out_of_range);
}

TEST_CASE("binary pair tasks") {
    Dataset base = base20();
    StreamConfig cfg{.kind = StreamKind::BinaryPair, .tasks = 10, .epochs = 1,
                     .batch_size = 16, .per_class = 40, .seed = 6};
    std::set<int> used;
    for (int t = 0; t < 10; ++t) {
        Task task = make_task(cfg, base, t);
        CHECK(task.source_classes.size() == 2);
        CHECK(task.data.classes == 2);
        int zeros = 0, ones = 0;
        for (int y : task.data.y) {
            CHECK((y == 0 || y == 1));
            (y == 0 ? zeros : ones)++;
        }
        CHECK(zeros == 40);
        CHECK(ones == 40);
        for (int c : task.source_classes) used.insert(c);
    }
    CHECK(used.size() == 20);
    CHECK_THROWS_AS(make_task(cfg, base, 10), std::out_of_range);
}

TEST_CASE("step budget cycles the data") {
    Dataset base = synthetic_blobs(50, 2, 4, 2);  // 100 samples
    StreamConfig cfg{.kind = StreamKind::PermutedInput, .tasks = 1, .epochs = 1,
                     .batch_size = 32, .step_budget = 78, .seed = 1};
    Task t = make_task(cfg, base, 0);
    auto batches = task_batches(cfg, t);
    CHECK(batches.size() == 78);
    // without a budget: ceil(100/32) = 4 batches per epoch
    StreamConfig plain = cfg;
    plain.step_budget = 0;
    plain.epochs = 3;
    CHECK(task_batches(plain, t).size() == 12);
}

TEST_CASE("replay buffer caps and capacity") {
    Dataset d = synthetic_blobs(100, 7, 4, 8);
    ReplayBuffer buf(1000, 500, 42);
    Eigen::MatrixXd X = d.X.topRows(700);
    std::vector<int> y(d.y.begin(), d.y.begin() + 700);
    buf.insert(X, y, 0);
    CHECK(buf.task_count(0) == 500);
    CHECK(buf.size() == 500);

    // capacity pressure from more tasks
    for (int task = 1; task <= 3; ++task) buf.insert(X, y, task);
    CHECK(buf.size() <= 1000);
    for (int task = 0; task <= 3; ++task) CHECK(buf.task_count(task) <= 500);
}

TEST_CASE("replay buffer sampling is uniform") {
    ReplayBuffer buf(200, 200, 3);
    Eigen::MatrixXd X(100, 1);
    std::vector<int> y(100);
    for (int i = 0; i < 100; ++i) {
        X(i, 0) = i;
        y[i] = i % 7;
    }
    buf.insert(X, y, 0);
    std::vector<int> freq(100, 0);
    for (int rep = 0; rep < 1000; ++rep) {
        Batch b = buf.sample(10);
        std::set<double> uniq;
        for (int i = 0; i < 10; ++i) {
            ++freq[static_cast<int>(b.X(i, 0))];
            uniq.insert(b.X(i, 0));
        }
        CHECK(uniq.size() == 10);  // without replacement within a call
    }
    double sigma = std::sqrt(10000.0 * 0.01 * 0.99);
    for (int f : freq) CHECK(std::abs(f - 100.0) < 5 * sigma);

    ReplayBuffer empty(10, 10, 1);
    CHECK_THROWS_AS(empty.sample(1), std::runtime_error);
}

TEST_CASE("replay buffer stress: invariants over 1e5 operations") {
    ReplayBuffer buf(500, 120, 9);
    std::mt19937_64 rng(123);
    Eigen::MatrixXd X(1, 3);
    for (int op = 0; op < 100000; ++op) {
        int task = static_cast<int>(rng() % 12);
        X(0, 0) = static_cast<double>(op);
        X(0, 1) = task;
        X(0, 2) = 0.5;
        buf.insert(X, {task % 3}, task);  // throws if an invariant breaks
        if (op % 997 == 0 && buf.size() > 10) buf.sample(10);
    }
    CHECK(buf.size() <= 500);
}

TEST_CASE("csv loader") {
    TempFile f("data.csv");
    {
        std::ofstream out(f.path);
        out << "label,f1,f2\n0,0.1,0.2\n1,0.3,0.4\n1,0.5,0.6\n";
    }
    Dataset d = load_csv_dataset(f.path);
    CHECK(d.n() == 3);
    CHECK(d.dim() == 2);
    CHECK(d.classes == 2);
    CHECK(d.y == std::vector<int>{0, 1, 1});
    CHECK(d.X(2, 1) == doctest::Approx(0.6));

    TempFile g("bad.csv");
    {
        std::ofstream out(g.path);
        out << "0,0.1\n1,oops\n";
    }
    CHECK_THROWS_WITH_AS(load_csv_dataset(g.path), doctest::Contains("line 2"),
                         std::runtime_error);

    TempFile e("empty.csv");
    { std::ofstream out(e.path); }
    CHECK_THROWS_AS(load_csv_dataset(e.path), std::runtime_error);
}

TEST_CASE("idx loader") {
    TempFile img("t-images.idx");
    TempFile lbl("t-labels.idx");
    auto be32 = [](std::ofstream& out, std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
        out.write(reinterpret_cast<char*>(b), 4);
    };
    {
        std::ofstream out(img.path, std::ios::binary);
        be32(out, 0x00000803);
        be32(out, 4);  // 4 images
        be32(out, 2);  // 2x2
        be32(out, 2);
        for (int i = 0; i < 16; ++i) out.put(static_cast<char>(i * 17));
    }
    {
        std::ofstream out(lbl.path, std::ios::binary);
        be32(out, 0x00000801);
        be32(out, 4);
        for (char c : {0, 1, 2, 1}) out.put(c);
    }
    Dataset d = load_dataset(img.path, DataFormat::IDX);
    CHECK(d.n() == 4);
    CHECK(d.dim() == 4);
    CHECK(d.y == std::vector<int>{0, 1, 2, 1});
    CHECK(d.X(0, 0) == doctest::Approx(0.0));
    CHECK(d.X(0, 3) == doctest::Approx(3 * 17 / 255.0));
    CHECK(d.X(3, 3) == doctest::Approx(1.0));

    // wrong magic
    TempFile bad("b-images.idx");
    {
        std::ofstream out(bad.path, std::ios::binary);
        be32(out, 0x00000801);
    }
    CHECK_THROWS_WITH_AS(load_idx_images(bad.path),
                         doctest::Contains("bad image magic"),
                         std::runtime_error);

    // truncated pixel data
    TempFile trunc("c-images.idx");
    {
        std::ofstream out(trunc.path, std::ios::binary);
        be32(out, 0x00000803);
        be32(out, 2);
        be32(out, 2);
        be32(out, 2);
        out.put(static_cast<char>(7));
    }
    CHECK_THROWS_WITH_AS(load_idx_images(trunc.path),
                         doctest::Contains("truncated"), std::runtime_error);
}

TEST_CASE("stream determinism: full batch sequence is a pure function") {
    Dataset base = base20(80);
    for (auto kind : {StreamKind::PermutedInput, StreamKind::RandomLabel,
                      StreamKind::SplitClassAlternating, StreamKind::BinaryPair}) {
        StreamConfig cfg{.kind = kind, .tasks = 4, .epochs = 2, .batch_size = 16,
                         .subset = 200, .per_class = 30, .hard_classes = 2,
                         .easy_classes = 1, .seed = 77};
        for (int t = 0; t < 4; ++t) {
            Task a = make_task(cfg, base, t);
            Task b = make_task(cfg, base, t);
            CHECK(batches_equal(task_batches(cfg, a), task_batches(cfg, b)));
        }
    }
}
