#include "muse/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "muse/config.hpp"
#include "muse/errors.hpp"
#include "muse/evaluation.hpp"
#include "muse/model.hpp"
#include "muse/training.hpp"

namespace muse::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct TrainArgs {
  std::string config;
  std::string dataset;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct EvalArgs {
  std::string config;
  std::string checkpoint;
  std::string dataset;
  std::string task;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_splits;
  std::vector<double> ratio;
};

struct AnalyzeArgs {
  std::string dataset;
  std::string out;
};

struct EmbedArgs {
  std::string checkpoint;
  std::string dataset;
  std::string out;
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

Graph load_dataset(const fs::path& dir, std::ostream& err) {
  LoadedGraph loaded = load_graph_with_report(dir);
  if (loaded.cleanup.self_loops + loaded.cleanup.duplicates > 0) {
    err << "warning: " << dir.string() << ": dropped " << loaded.cleanup.self_loops << " self-loop and "
        << loaded.cleanup.duplicates << " duplicate edge records\n";
  }
  return std::move(loaded.graph);
}

ojson epoch_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"contrast_loss", r.contrast_loss},
          {"semantic_loss", r.semantic_loss},
          {"contextual_loss", r.contextual_loss},
          {"fusion_loss", r.fusion_loss},
          {"controller_loss", r.controller_loss},
          {"lambda_mean", r.lambda_mean},
          {"lambda_std", r.lambda_std}};
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = load_run_config(args.config);
    if (!args.dataset.empty()) cfg.dataset_dir = fs::absolute(args.dataset).lexically_normal();
    if (!args.out.empty()) cfg.output_dir = fs::absolute(args.out).lexically_normal();
    if (args.seed) cfg.train.seed = *args.seed;
    if (cfg.output_dir.empty()) throw ConfigError("field 'output_dir' is required (or pass --out)");
    if (!fs::is_directory(cfg.dataset_dir)) {
      throw ConfigError("field 'dataset_dir': " + cfg.dataset_dir.string() + " is not a directory");
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  const Graph g = load_dataset(cfg.dataset_dir, err);
  fs::create_directories(cfg.output_dir);
  {
    auto f = open_out(cfg.output_dir / "config.json");
    f << to_json(cfg).dump(2) << "\n";
  }
  auto report_file = open_out(cfg.output_dir / "train_report.jsonl");
  auto timing_file = open_out(cfg.output_dir / "train_timing.jsonl");

  TrainReport report;
  try {
    report = train(g, cfg.train, [&](const EpochRecord& r) {
      report_file << epoch_json(r).dump() << "\n";
      timing_file << ojson{{"epoch", r.epoch}, {"seconds", r.seconds}}.dump() << "\n";
    });
  } catch (const NonFiniteLoss& e) {
    report_file.flush();
    err << "error: " << e.what() << "\n";
    return kNonFiniteLoss;
  }
  save_checkpoint({report.params, report.fixed_lambda}, cfg.output_dir / "model.ckpt");

  const EpochRecord& last = report.epochs.back();
  out << "trained " << report.epochs.size() << " epochs on " << g.name() << " (" << g.n_nodes() << " nodes, "
      << g.n_edges() << " edges)" << (report.stopped_early ? ", stopped early" : "") << "\n"
      << "final contrast loss " << last.contrast_loss << ", mean lambda " << last.lambda_mean << "\n"
      << "wrote " << (cfg.output_dir / "model.ckpt").string() << "\n";
  return kOk;
}

struct ResultRecord {
  std::string metric;
  std::vector<double> values;
};

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  EvalOptions opts;
  fs::path dataset = args.dataset;
  try {
    if (!args.config.empty()) {
      RunConfig cfg = load_run_config(args.config);
      opts = cfg.eval;
      if (dataset.empty()) dataset = cfg.dataset_dir;
    }
    if (!args.task.empty()) opts.task = args.task;
    if (args.seed) opts.seed = *args.seed;
    if (args.n_splits) opts.n_splits = *args.n_splits;
    if (!args.ratio.empty()) {
      if (args.ratio.size() != 3) throw ConfigError("--ratio takes three comma-separated numbers");
      opts.ratio = {args.ratio[0], args.ratio[1], args.ratio[2]};
    }
    if (dataset.empty()) throw ConfigError("no dataset given (pass --dataset or --config)");
    validate_eval_options(opts);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  Graph g;
  Tensor emb;
  try {
    if (!fs::exists(args.checkpoint)) throw CheckpointError("checkpoint not found: " + args.checkpoint);
    const Checkpoint ckpt = load_checkpoint(args.checkpoint);
    g = load_dataset(dataset, err);
    if (!g.has_labels()) throw ContractError("dataset " + g.name() + " has no labels");
    emb = embed(g, ckpt.params, ckpt.fixed_lambda);
  } catch (const std::exception& e) {
    err << "eval error: " << e.what() << "\n";
    return kEvalError;
  }

  std::vector<ResultRecord> records;
  try {
    if (opts.task == "classify") {
      const auto splits = make_splits(g, opts.ratio, opts.n_splits, opts.seed);
      const ClassificationResult r = linear_probe(emb, g.labels(), g.n_classes(), splits, opts.probe);
      records.push_back({"accuracy", r.accuracies});
    } else {
      const ClusteringResult r = evaluate_clustering(emb, g.labels(), g.n_classes(), opts.seed);
      records.push_back({"acc", {r.acc}});
      records.push_back({"nmi", {r.nmi}});
      records.push_back({"ari", {r.ari}});
    }
  } catch (const std::exception& e) {
    err << "eval error: " << e.what() << "\n";
    return kEvalError;
  }

  std::ofstream file;
  if (!args.out.empty()) file = open_out(args.out);
  out << std::left << std::setw(14) << "dataset" << std::setw(10) << "task" << std::setw(10) << "metric"
      << "mean +- std\n";
  for (const auto& rec : records) {
    double mean = 0.0, std = 0.0;
    mean_std(rec.values, mean, std);
    if (file.is_open()) {
      file << ojson{{"dataset", g.name()},
                    {"task", opts.task},
                    {"metric", rec.metric},
                    {"mean", mean},
                    {"std", std},
                    {"values", rec.values}}
                  .dump()
           << "\n";
    }
    std::ostringstream cell;
    cell << std::fixed << std::setprecision(2) << 100.0 * mean << " +- " << 100.0 * std;
    out << std::left << std::setw(14) << g.name() << std::setw(10) << opts.task << std::setw(10) << rec.metric
        << cell.str() << "\n";
  }
  return kOk;
}

int cmd_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err) {
  const Graph g = load_dataset(args.dataset, err);
  const NeighborhoodSimilarity sim = neighborhood_similarity(g);
  const auto counts = similarity_histogram(sim);
  ojson similarity = ojson::array();
  std::size_t isolated = 0;
  for (std::size_t i = 0; i < sim.values.size(); ++i) {
    if (sim.isolated[i]) {
      ++isolated;
      similarity.push_back(nullptr);
    } else {
      similarity.push_back(sim.values[i]);
    }
  }
  ojson doc{{"dataset", g.name()}, {"bins", counts.size()}, {"range", {-1.0, 1.0}},
            {"counts", counts},    {"isolated", isolated},  {"similarity", similarity}};
  auto f = open_out(args.out);
  f << doc.dump() << "\n";
  out << "analyzed " << g.name() << ": " << g.n_nodes() - isolated << " nodes binned, " << isolated
      << " isolated\n";
  return kOk;
}

int cmd_embed(const EmbedArgs& args, std::ostream& out, std::ostream& err) {
  Tensor emb;
  try {
    if (!fs::exists(args.checkpoint)) throw CheckpointError("checkpoint not found: " + args.checkpoint);
    const Checkpoint ckpt = load_checkpoint(args.checkpoint);
    const Graph g = load_dataset(args.dataset, err);
    emb = embed(g, ckpt.params, ckpt.fixed_lambda);
  } catch (const std::exception& e) {
    err << "eval error: " << e.what() << "\n";
    return kEvalError;
  }
  auto f = open_out(args.out);
  f << std::setprecision(17);
  const auto v = emb.data();
  for (std::size_t r = 0; r < emb.rows(); ++r) {
    for (std::size_t c = 0; c < emb.cols(); ++c) f << (c ? "," : "") << v[r * emb.cols() + c];
    f << "\n";
  }
  out << "wrote " << emb.rows() << "x" << emb.cols() << " embeddings to " << args.out << "\n";
  return kOk;
}

}  // namespace

std::vector<std::size_t> similarity_histogram(const NeighborhoodSimilarity& sim, std::size_t bins) {
  std::vector<std::size_t> counts(bins, 0);
  for (std::size_t i = 0; i < sim.values.size(); ++i) {
    if (sim.isolated[i]) continue;
    const double t = (sim.values[i] + 1.0) / 2.0 * static_cast<double>(bins);
    const auto b = static_cast<std::ptrdiff_t>(std::floor(t));
    counts[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1))]++;
  }
  return counts;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-view contrastive node embeddings"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
  train_cmd->add_option("--config", train_args.config, "JSON run config")->required();
  train_cmd->add_option("--dataset", train_args.dataset, "override dataset_dir");
  train_cmd->add_option("--out", train_args.out, "override output_dir");
  train_cmd->add_option("--seed", train_args.seed, "override train.seed");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate frozen embeddings");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "model.ckpt from train")->required();
  eval_cmd->add_option("--dataset", eval_args.dataset, "dataset directory");
  eval_cmd->add_option("--config", eval_args.config, "take eval options and dataset from a run config");
  eval_cmd->add_option("--task", eval_args.task, "classify or cluster");
  eval_cmd->add_option("--out", eval_args.out, "results file (JSON lines)");
  eval_cmd->add_option("--seed", eval_args.seed, "split / k-means seed");
  eval_cmd->add_option("--n-splits", eval_args.n_splits, "number of random splits");
  eval_cmd->add_option("--ratio", eval_args.ratio, "train,val,test fractions")->delimiter(',');

  AnalyzeArgs analyze_args;
  auto* analyze_cmd = app.add_subcommand("analyze", "ego/neighbour feature similarity histogram");
  analyze_cmd->add_option("--dataset", analyze_args.dataset, "dataset directory")->required();
  analyze_cmd->add_option("--out", analyze_args.out, "output JSON file")->required();

  EmbedArgs embed_args;
  auto* embed_cmd = app.add_subcommand("embed", "write frozen embeddings as CSV");
  embed_cmd->add_option("--checkpoint", embed_args.checkpoint, "model.ckpt from train")->required();
  embed_cmd->add_option("--dataset", embed_args.dataset, "dataset directory")->required();
  embed_cmd->add_option("--out", embed_args.out, "output CSV file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*train_cmd) return cmd_train(train_args, out, err);
    if (*eval_cmd) return cmd_eval(eval_args, out, err);
    if (*analyze_cmd) return cmd_analyze(analyze_args, out, err);
    if (*embed_cmd) return cmd_embed(embed_args, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace muse::cli
