#include <doctest.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "muse/cli.hpp"
#include "muse/graph.hpp"
#include "support.hpp"

using namespace muse;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "muse");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Two nodes with identical features joined by one edge.
fs::path toy_dataset(const fs::path& root) {
  const fs::path dir = root / "toy";
  fs::create_directories(dir);
  write_file(dir / "meta.json", R"({"name": "toy", "n_nodes": 2, "n_features": 3, "n_classes": 2})");
  write_file(dir / "edges.tsv", "0\t1\n");
  write_file(dir / "features.csv", "1,0,2\n1,0,2\n");
  write_file(dir / "labels.txt", "0\n1\n");
  return dir;
}

fs::path synthetic_dataset(const fs::path& root) {
  const fs::path dir = root / "synthetic";
  write_graph(testing::synthetic_graph(60, 150, 6, 3, 2), dir);
  return dir;
}

std::string config_text(const fs::path& dataset, const fs::path& out, std::size_t epochs = 3,
                        const std::string& extra_train = "") {
  return R"({
  "dataset_dir": ")" + dataset.string() + R"(",
  "output_dir": ")" + out.string() + R"(",
  "train": {"epochs": )" + std::to_string(epochs) + extra_train + R"(, "dims": {"embed": 8, "project": 6, "filter": 4}},
  "eval": {"n_splits": 10, "ratio": [0.48, 0.32, 0.2], "probe": {"epochs": 50}}
})";
}

std::vector<nlohmann::json> read_jsonl(const fs::path& p) {
  std::vector<nlohmann::json> rows;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) rows.push_back(nlohmann::json::parse(line));
  return rows;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("train on the toy graph writes the three artifacts") {
    const fs::path root = testing::scratch_dir("cli_train");
    const fs::path data = toy_dataset(root);
    write_file(root / "run.json", config_text(data, root / "out"));
    const Result r = run({"train", "--config", (root / "run.json").string()});
    CHECK_MESSAGE(r.code == 0, r.err);
    CHECK(fs::exists(root / "out" / "model.ckpt"));
    CHECK(fs::exists(root / "out" / "config.json"));
    const auto report = read_jsonl(root / "out" / "train_report.jsonl");
    REQUIRE(report.size() == 3);
    CHECK(report[0]["epoch"] == 1);
    CHECK(report[2].contains("contrast_loss"));
    CHECK(report[2].contains("lambda_mean"));
  }

  TEST_CASE("the config snapshot alone reproduces the run") {
    const fs::path root = testing::scratch_dir("cli_snapshot");
    const fs::path data = synthetic_dataset(root);
    write_file(root / "run.json", config_text(data, root / "a", 4));
    REQUIRE(run({"train", "--config", (root / "run.json").string()}).code == 0);
    REQUIRE(run({"train", "--config", (root / "a" / "config.json").string(), "--out", (root / "b").string()}).code == 0);
    CHECK(slurp(root / "a" / "train_report.jsonl") == slurp(root / "b" / "train_report.jsonl"));
    CHECK(slurp(root / "a" / "model.ckpt") == slurp(root / "b" / "model.ckpt"));
  }

  TEST_CASE("a snapshot of a relative-path config still finds the dataset") {
    const fs::path root = fs::absolute(testing::scratch_dir("cli_relative"));
    synthetic_dataset(root);
    fs::create_directories(root / "configs");
    write_file(root / "configs" / "run.json",
               R"({"dataset_dir": "../synthetic", "output_dir": "../a", "train": {"epochs": 3, "dims": {"embed": 8, "project": 8, "filter": 4}}})");
    const fs::path saved = fs::current_path();
    fs::current_path(root);
    const int first = run({"train", "--config", "configs/run.json"}).code;
    const int second = run({"train", "--config", "a/config.json", "--out", "b"}).code;
    fs::current_path(saved);
    REQUIRE(first == 0);
    REQUIRE(second == 0);
    CHECK(slurp(root / "a" / "model.ckpt") == slurp(root / "b" / "model.ckpt"));
  }

  TEST_CASE("reruns are byte-identical and --seed changes the run") {
    const fs::path root = testing::scratch_dir("cli_rerun");
    const fs::path data = synthetic_dataset(root);
    write_file(root / "run.json", config_text(data, root / "a"));
    const std::string cfg = (root / "run.json").string();
    REQUIRE(run({"train", "--config", cfg}).code == 0);
    REQUIRE(run({"train", "--config", cfg, "--out", (root / "b").string()}).code == 0);
    REQUIRE(run({"train", "--config", cfg, "--out", (root / "c").string(), "--seed", "77"}).code == 0);
    CHECK(slurp(root / "a" / "train_report.jsonl") == slurp(root / "b" / "train_report.jsonl"));
    CHECK(slurp(root / "a" / "train_report.jsonl") != slurp(root / "c" / "train_report.jsonl"));
  }

  TEST_CASE("config problems exit 2 and name the field") {
    const fs::path root = testing::scratch_dir("cli_config");
    const fs::path data = toy_dataset(root);
    const std::string cfg = (root / "run.json").string();

    write_file(cfg, config_text(data, root / "out", 3, R"(, "learning_rate": 0.1)"));
    Result r = run({"train", "--config", cfg});
    CHECK(r.code == 2);
    CHECK(r.err.find("train.learning_rate") != std::string::npos);

    write_file(cfg, config_text(data, root / "out", 3, R"(, "lr": "fast")"));
    r = run({"train", "--config", cfg});
    CHECK(r.code == 2);
    CHECK(r.err.find("train.lr") != std::string::npos);

    write_file(cfg, config_text(data, root / "out", 3, R"(, "contrast": {"precision": "f16"})"));
    r = run({"train", "--config", cfg});
    CHECK(r.code == 2);
    CHECK(r.err.find("train.contrast.precision") != std::string::npos);

    write_file(cfg, "{\n  \"dataset_dir\": \"x\",\n  oops\n}");
    r = run({"train", "--config", cfg});
    CHECK(r.code == 2);
    CHECK(r.err.find("line 3") != std::string::npos);

    write_file(cfg, config_text(root / "nowhere", root / "out"));
    CHECK(run({"train", "--config", cfg}).code == 2);

    write_file(cfg, R"({"dataset_dir": ")" + data.string() + R"(", "output_dir": "o", "ablation": {
      "disable_semantic_contrast": true, "disable_context_contrast": true, "disable_fusion_contrast": true}})");
    r = run({"train", "--config", cfg});
    CHECK(r.code == 2);

    CHECK(run({"train"}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"train", "--config", (root / "missing.json").string()}).code == 2);
  }

  TEST_CASE("a non-finite loss exits 3") {
    const fs::path root = testing::scratch_dir("cli_nan");
    const fs::path data = toy_dataset(root);
    write_file(data / "features.csv", "1,nan,2\n1,0,2\n");
    write_file(root / "run.json", config_text(data, root / "out"));
    const Result r = run({"train", "--config", (root / "run.json").string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("epoch 1") != std::string::npos);
  }

  TEST_CASE("eval records ten accuracies or the clustering triple") {
    const fs::path root = testing::scratch_dir("cli_eval");
    const fs::path data = synthetic_dataset(root);
    write_file(root / "run.json", config_text(data, root / "out"));
    REQUIRE(run({"train", "--config", (root / "run.json").string()}).code == 0);
    const std::string ckpt = (root / "out" / "model.ckpt").string();

    Result r = run({"eval", "--checkpoint", ckpt, "--config", (root / "run.json").string(), "--task", "classify", "--out",
                    (root / "classify.jsonl").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto rows = read_jsonl(root / "classify.jsonl");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0]["metric"] == "accuracy");
    CHECK(rows[0]["task"] == "classify");
    CHECK(rows[0]["values"].size() == 10);
    for (const auto& v : rows[0]["values"]) CHECK((v.get<double>() >= 0.0 && v.get<double>() <= 1.0));
    CHECK(r.out.find("+-") != std::string::npos);

    r = run({"eval", "--checkpoint", ckpt, "--dataset", data.string(), "--task", "cluster", "--out",
             (root / "cluster.jsonl").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    rows = read_jsonl(root / "cluster.jsonl");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0]["metric"] == "acc");
    CHECK(rows[1]["metric"] == "nmi");
    CHECK(rows[2]["metric"] == "ari");

    r = run({"eval", "--checkpoint", ckpt, "--dataset", data.string(), "--n-splits", "3", "--ratio", "0.6,0.2,0.2",
             "--out", (root / "three.jsonl").string()});
    REQUIRE(r.code == 0);
    CHECK(read_jsonl(root / "three.jsonl")[0]["values"].size() == 3);

    r = run({"eval", "--checkpoint", ckpt, "--dataset", data.string(), "--out", (root / "again.jsonl").string()});
    REQUIRE(r.code == 0);
    r = run({"eval", "--checkpoint", ckpt, "--dataset", data.string(), "--out", (root / "again2.jsonl").string()});
    CHECK(slurp(root / "again.jsonl") == slurp(root / "again2.jsonl"));
  }

  TEST_CASE("eval failures exit 4") {
    const fs::path root = testing::scratch_dir("cli_eval_bad");
    const fs::path data = synthetic_dataset(root);
    CHECK(run({"eval", "--checkpoint", (root / "none.ckpt").string(), "--dataset", data.string()}).code == 4);

    write_file(root / "run.json", config_text(data, root / "out", 2));
    REQUIRE(run({"train", "--config", (root / "run.json").string()}).code == 0);
    const fs::path other = root / "other";
    write_graph(testing::synthetic_graph(20, 30, 4, 2, 1), other);
    CHECK(run({"eval", "--checkpoint", (root / "out" / "model.ckpt").string(), "--dataset", other.string()}).code == 4);
    CHECK(run({"eval", "--checkpoint", (root / "out" / "model.ckpt").string(), "--dataset", data.string(), "--task",
               "regress"})
              .code == 2);
  }

  TEST_CASE("embed writes one row per node") {
    const fs::path root = testing::scratch_dir("cli_embed");
    const fs::path data = synthetic_dataset(root);
    write_file(root / "run.json", config_text(data, root / "out", 2));
    REQUIRE(run({"train", "--config", (root / "run.json").string()}).code == 0);
    const std::string ckpt = (root / "out" / "model.ckpt").string();
    REQUIRE(run({"embed", "--checkpoint", ckpt, "--dataset", data.string(), "--out", (root / "e.csv").string()}).code == 0);
    std::ifstream in(root / "e.csv");
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line);) {
      ++lines;
      CHECK(std::count(line.begin(), line.end(), ',') == 7);
    }
    CHECK(lines == 60);
  }

  TEST_CASE("analyze puts identical neighbours in the top bin") {
    const fs::path root = testing::scratch_dir("cli_analyze");
    const fs::path data = toy_dataset(root);
    REQUIRE(run({"analyze", "--dataset", data.string(), "--out", (root / "a.json").string()}).code == 0);
    const auto doc = nlohmann::json::parse(slurp(root / "a.json"));
    REQUIRE(doc["counts"].size() == 50);
    CHECK(doc["counts"][49] == 2);
    CHECK(doc["similarity"][0].get<double>() == doctest::Approx(1.0).epsilon(1e-15));
  }

  TEST_CASE("analyze counts every non-isolated node and is stable") {
    const fs::path root = testing::scratch_dir("cli_analyze_sum");
    const fs::path data = root / "g";
    write_graph(testing::synthetic_graph(80, 60, 5, 3, 4), data);
    REQUIRE(run({"analyze", "--dataset", data.string(), "--out", (root / "a.json").string()}).code == 0);
    REQUIRE(run({"analyze", "--dataset", data.string(), "--out", (root / "b.json").string()}).code == 0);
    CHECK(slurp(root / "a.json") == slurp(root / "b.json"));
    const auto doc = nlohmann::json::parse(slurp(root / "a.json"));
    std::size_t total = 0;
    for (const auto& c : doc["counts"]) total += c.get<std::size_t>();
    CHECK(total + doc["isolated"].get<std::size_t>() == 80);
    CHECK(doc["isolated"].get<std::size_t>() > 0);
  }

  TEST_CASE("histogram binning edges") {
    NeighborhoodSimilarity sim;
    sim.values = {-1.0, -0.96, 0.0, 0.999, 1.0, 0.5};
    sim.isolated = {false, false, false, false, false, true};
    const auto counts = cli::similarity_histogram(sim, 50);
    CHECK(counts[0] == 1);
    CHECK(counts[1] == 1);
    CHECK(counts[25] == 1);
    CHECK(counts[49] == 2);
  }
}
