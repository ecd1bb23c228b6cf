// Command-line entry point: cv, train, sweep-k, coherence, gradcheck, inspect.
//
// Exit codes: 0 success, 1 failed check or aborted run, 2 bad configuration,
// 3 file or dataset problem.

#include "slim/coherence.hpp"
#include "slim/config.hpp"
#include "slim/dataset.hpp"
#include "slim/errors.hpp"
#include "slim/gradcheck_suite.hpp"
#include "slim/model_io.hpp"
#include "slim/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kCheckFailed = 1, kConfigError = 2, kIoError = 3 };

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw slim::IoError("cannot write " + path.string());
  out << text;
  if (!out) throw slim::IoError("failed while writing " + path.string());
}

// Flags shared by every subcommand.
struct Common {
  std::uint64_t seed = 0;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::string config;
  std::string out = "slim-out";
};

struct DataFlags {
  std::string dataset;
  std::string data_dir;
  int folds = 10;

  [[nodiscard]] fs::path root() const {
    if (!data_dir.empty()) return data_dir;
    if (const char* env = std::getenv("SLIM_DATA_DIR"); env != nullptr && *env != '\0') return env;
    return "data";
  }
};

struct ModelFlags {
  slim::TrainConfig cfg;
  std::string variant = "node-distribution";
  std::string hidden = "D";
  std::string activation = "logistic";
  std::string optimizer = "sgd";

  void resolve() {
    cfg.substructure.variant = slim::parse_variant(variant);
    cfg.hidden = slim::parse_hidden_width(hidden);
    cfg.activation = slim::parse_activation(activation);
    cfg.optimizer = slim::parse_optimizer(optimizer);
    cfg.validate();
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Seed for every random choice");
  sub->add_option("--jobs", c.jobs, "Worker threads");
  sub->add_option("--config", c.config, "key = value file with [section] headers; flags given here win");
  sub->add_option("--out", c.out, "Output directory");
}

void add_data(CLI::App* sub, DataFlags& d, bool folds) {
  sub->add_option("--dataset", d.dataset, "TU dataset name, e.g. MUTAG")->required();
  sub->add_option("--data-dir", d.data_dir, "Dataset root (falls back to $SLIM_DATA_DIR, then ./data)");
  if (folds) sub->add_option("--folds", d.folds, "Cross-validation folds");
}

void add_model(CLI::App* sub, ModelFlags& m) {
  slim::TrainConfig& c = m.cfg;
  sub->add_option("--hops", c.substructure.hops, "Neighborhood radius");
  sub->add_option("--variant", m.variant,
                  "Substructure summary: node-distribution, center-emphasis, layer-wise, weighted-layer-sum");
  sub->add_option("--layer-decay", c.substructure.layer_decay, "Per-layer decay of weighted-layer-sum");
  sub->add_option("--k", c.K, "Number of landmarks");
  sub->add_option("--latent", c.latent, "Embedding dimension");
  sub->add_option("--hidden", m.hidden, "Encoder hidden width: D, D/2 or 2D");
  sub->add_option("--activation", m.activation, "logistic or tanh");
  sub->add_option("--optimizer", m.optimizer, "sgd or adagrad");
  sub->add_option("--lr", c.learning_rate, "Learning rate (grid: 1e-2, 5e-2, 1e-3, 5e-3, 1e-4)");
  sub->add_option("--epochs", c.epochs, "Training epochs");
  sub->add_option("--batch-size", c.batch_size, "Graphs per mini-batch");
  sub->add_option("--lambda-embed", c.lambda_embed, "Weight of the co-occurrence loss");
  sub->add_option("--lambda-cluster", c.lambda_cluster, "Weight of the clustering loss");
  sub->add_option("--dof", c.dof, "Student-t degrees of freedom");
  sub->add_option("--kmeans-restarts", c.kmeans.restarts, "k-means++ restarts for landmark initialization");
  sub->add_flag("--semi-supervised", c.semi_supervised, "Use held-out graphs, unlabeled, in the unsupervised losses");
  sub->add_option("--with-density", c.layout.with_density, "Append landmark densities to the classifier input");
  sub->add_option("--with-means", c.layout.with_means, "Append landmark means to the classifier input");
}

json resolved_options(const CLI::App* sub) {
  json out = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_lnames().empty() ? std::string() : opt->get_lnames().front();
    if (name.empty() || name == "help") continue;
    std::string value;
    if (opt->count() > 0) {
      value = opt->results().back();  // last occurrence wins
    } else {
      value = opt->get_default_str();
    }
    out[name] = value;
  }
  return out;
}

// Written when a run starts and again when it ends.
struct Manifest {
  json doc;
  fs::path path;

  Manifest(const std::string& command, const CLI::App* sub, const Common& c, const std::string& dataset) {
    fs::create_directories(c.out);
    path = fs::path(c.out) / "manifest.json";
    doc = {{"command", command},          {"config", resolved_options(sub)}, {"seed", c.seed},
           {"dataset", dataset},          {"started_at", utc_now()},         {"finished_at", nullptr},
           {"artifacts", json::array()},  {"warnings", json::array()}};
  }
  fs::path artifact(const std::string& name) {
    const fs::path p = fs::path(doc["config"].value("out", "slim-out")) / name;
    doc["artifacts"].push_back(p.string());
    return p;
  }
  void warn(const std::string& w) {
    doc["warnings"].push_back(w);
    std::cerr << "warning: " << w << '\n';
  }
  void save() { write_text(path, doc.dump(2) + "\n"); }
  void finish() {
    doc["finished_at"] = utc_now();
    save();
  }
};

json epoch_json(const slim::EpochMetrics& m, int K) {
  return {{"fold", m.fold},
          {"epoch", m.epoch},
          {"K", K},
          {"train_loss", m.train_loss},
          {"cross_entropy", m.cross_entropy},
          {"cooccurrence", m.cooccurrence},
          {"cluster", m.cluster},
          {"val_accuracy", number_or_null(m.val_accuracy)}};
}

json cv_json(const slim::CVResult& r, const std::string& dataset, int K) {
  return {{"dataset", dataset},
          {"K", K},
          {"mean", r.mean},
          {"std", r.std},
          {"per_fold", r.per_fold},
          {"selected_epoch", r.selected_epoch},
          {"curve", r.curve},
          {"warnings", r.warnings}};
}

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

void write_matrix_csv(const fs::path& path, const slim::Mat& m) {
  std::ostringstream s;
  s << std::setprecision(17);
  for (slim::Index r = 0; r < m.rows(); ++r) {
    for (slim::Index c = 0; c < m.cols(); ++c) s << (c ? "," : "") << m(r, c);
    s << '\n';
  }
  write_text(path, s.str());
}

slim::DatasetBundle load_dataset(const DataFlags& d, Manifest& manifest) {
  slim::DatasetBundle b = slim::load_tu_dataset(d.root(), d.dataset);
  for (const std::string& w : b.warnings) manifest.warn(w);
  return b;
}

// Inserts `--key=value` pairs from the config file right after the
// subcommand so that later command-line flags take precedence.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::size_t> at;
  std::string file;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      file = args[i + 1];
      at = i;
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
      at = i;
    }
  }
  if (!at || args.size() < 2) return args;
  std::vector<std::string> inserted;
  for (const slim::ConfigEntry& e : slim::load_config(file)) {
    std::string key = e.key;
    std::replace(key.begin(), key.end(), '_', '-');
    inserted.push_back("--" + key + "=" + e.value);
  }
  args.insert(args.begin() + 2, inserted.begin(), inserted.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SLIM: structural landmarking and interaction modelling for graph classification"};
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.get_formatter()->column_width(34);

  Common common;
  DataFlags data;
  ModelFlags model;

  auto* cv = app.add_subcommand("cv", "k-fold cross-validation");
  auto* train = app.add_subcommand("train", "Train on every graph and save the model");
  auto* sweep = app.add_subcommand("sweep-k", "Cross-validation accuracy for several K");
  for (auto* sub : {cv, train, sweep}) {
    add_common(sub, common);
    add_data(sub, data, sub != train);
    add_model(sub, model);
  }
  std::string model_path;
  train->add_option("--model", model_path, "Model file (default <out>/model.slim)");
  std::string ks_text;
  sweep->add_option("--ks", ks_text, "Comma-separated K values")->required();

  auto* coh = app.add_subcommand("coherence", "Landmark coherence versus K on a Gaussian mixture");
  add_common(coh, common);
  std::string generator;
  std::string coh_ks = "2,4,8,16,32,64,128,256,512";
  int coh_seeds = 10;
  bool no_bound = false;
  bool analytic_only = false;
  int bound_d = 2;
  double bound_K = 8;
  double cdcp = 1.0;
  coh->add_option("--generator", generator, "Mixture spec file (default: 4 components on a ring, d = 2)");
  coh->add_option("--ks", coh_ks, "Comma-separated K values");
  coh->add_option("--seeds", coh_seeds, "Draws per K");
  coh->add_flag("--no-bound", no_bound, "Skip the lower-bound column");
  coh->add_flag("--analytic-only", analytic_only, "Only evaluate the lower bound for --d, --K, --cdcp-over-umax2");
  coh->add_option("--d", bound_d, "Dimension for --analytic-only");
  coh->add_option("--K", bound_K, "Landmark count for --analytic-only");
  coh->add_option("--cdcp-over-umax2", cdcp, "C_d C_p / u_max^2 for --analytic-only");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op and the loss");
  add_common(gc, common);
  double step = 1e-5;
  double tolerance = 1e-4;
  gc->add_option("--step", step, "Central-difference step");
  gc->add_option("--tolerance", tolerance, "Largest accepted relative error");

  auto* insp = app.add_subcommand("inspect", "Dump W, p, M, C and C_norm of one graph as CSV");
  add_common(insp, common);
  add_data(insp, data, false);
  std::string inspect_model;
  long long graph_index = 0;
  insp->add_option("--model", inspect_model, "Model file written by train")->required();
  insp->add_option("--graph", graph_index, "Graph index (0-based)");

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(std::move(args));
    std::vector<const char*> raw;
    for (const std::string& a : args) raw.push_back(a.c_str());
    app.parse(static_cast<int>(raw.size()), const_cast<char**>(raw.data()));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  } catch (const slim::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const slim::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (cv->parsed() || sweep->parsed() || train->parsed()) {
      model.resolve();
      model.cfg.seed = common.seed;
      CLI::App* sub = cv->parsed() ? cv : (sweep->parsed() ? sweep : train);
      std::vector<int> ks;
      if (sweep->parsed()) {
        ks = slim::parse_int_list(ks_text);
        if (ks.empty()) throw slim::ConfigError("--ks needs at least one K value");
      }
      if (data.folds < 2) throw slim::ConfigError("--folds must be at least 2");
      Manifest manifest(sub->get_name(), sub, common, data.dataset);
      const fs::path metrics_path = manifest.artifact("metrics.jsonl");
      fs::path result_path;
      if (cv->parsed()) result_path = manifest.artifact("cv_result.json");
      if (sweep->parsed()) result_path = manifest.artifact("sweep.csv");
      const fs::path sweep_json = sweep->parsed() ? manifest.artifact("sweep.json") : fs::path();
      fs::path model_file;
      if (train->parsed() && model_path.empty()) {
        model_file = manifest.artifact("model.slim");
      } else if (train->parsed()) {
        model_file = model_path;
        manifest.doc["artifacts"].push_back(model_path);
      }
      const slim::DatasetBundle bundle = load_dataset(data, manifest);
      manifest.save();

      std::ofstream metrics(metrics_path, std::ios::binary);
      if (!metrics) throw slim::IoError("cannot write " + metrics_path.string());
      int current_K = model.cfg.K;
      const slim::EpochCallback log = [&](const slim::EpochMetrics& m) {
        metrics << epoch_json(m, current_K).dump() << '\n';
        metrics.flush();
      };

      if (cv->parsed()) {
        const slim::FoldPlan plan = slim::make_folds(bundle, data.folds, common.seed);
        const slim::CVResult r = slim::cross_validate(bundle, model.cfg, plan, common.jobs, log);
        for (const std::string& w : r.warnings) manifest.warn(w);
        write_text(result_path, cv_json(r, bundle.name, model.cfg.K).dump(2) + "\n");
        std::cout << std::fixed << std::setprecision(4) << bundle.name << " K=" << model.cfg.K << ": " << r.mean
                  << " ± " << r.std << " (epoch " << r.selected_epoch << ")\n";
      } else if (sweep->parsed()) {
        const slim::FoldPlan plan = slim::make_folds(bundle, data.folds, common.seed);
        slim::SweepResult out;
        {
          std::vector<int> sorted = ks;
          std::sort(sorted.begin(), sorted.end());
          sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
          if (sorted.size() != ks.size()) manifest.warn("duplicate K values removed");
          for (int k : sorted) {
            current_K = k;
            slim::SweepResult one = slim::sweep_k(bundle, model.cfg, {k}, plan, common.jobs, log);
            out.rows.push_back(one.rows.front());
            out.runs.push_back(std::move(one.runs.front()));
            for (const std::string& w : one.warnings) manifest.warn(w);
            std::cout << "K=" << k << ": " << std::fixed << std::setprecision(4) << out.rows.back().mean << " ± "
                      << out.rows.back().std << std::endl;
          }
        }
        std::ostringstream csv;
        csv << "K,mean_acc,std_acc\n";
        json runs = json::array();
        for (std::size_t i = 0; i < out.rows.size(); ++i) {
          csv << out.rows[i].K << ',' << csv_number(out.rows[i].mean) << ',' << csv_number(out.rows[i].std) << '\n';
          runs.push_back(cv_json(out.runs[i], bundle.name, out.rows[i].K));
        }
        write_text(result_path, csv.str());
        write_text(sweep_json, runs.dump(2) + "\n");
      } else {
        const std::vector<slim::PreparedGraph> graphs = slim::prepare_graphs(bundle, model.cfg.substructure);
        slim::TrainSplit split;
        for (std::size_t i = 0; i < graphs.size(); ++i) split.train.push_back(i);
        slim::TrainResult r =
            slim::train(graphs, split, model.cfg, bundle.node_label_count, bundle.class_count, 0, log);
        for (const std::string& w : r.warnings) manifest.warn(w);
        slim::save_model(r.model, model_file);
        std::cout << std::fixed << std::setprecision(4) << "training accuracy "
                  << slim::accuracy(r.model, graphs, split.train) << ", model written to " << model_file.string()
                  << '\n';
      }
      manifest.finish();
      return kOk;
    }

    if (coh->parsed()) {
      if (analytic_only) {
        if (!(bound_K >= 2.0)) throw slim::ConfigError("--K must be at least 2");
        const slim::BoundValue b = slim::theorem1_lower_bound_scaled(bound_d, bound_K, cdcp);
        if (b.vacuous) {
          std::cout << "vacuous: " << b.note << '\n';
        } else {
          std::cout << std::setprecision(10) << b.value << '\n';
        }
        return kOk;
      }
      slim::CoherenceSweepOptions opt;
      opt.ks = slim::parse_int_list(coh_ks);
      opt.seeds = coh_seeds;
      opt.base_seed = common.seed;
      opt.with_bound = !no_bound;
      opt.jobs = common.jobs;
      const slim::MixtureSpec spec = generator.empty() ? slim::default_mixture() : slim::load_mixture(generator);
      if (opt.with_bound && spec.dimension() < 2) throw slim::ConfigError("the bound needs d >= 2; pass --no-bound");
      Manifest manifest("coherence", coh, common, "gaussian-mixture");
      const fs::path csv_path = manifest.artifact("coherence.csv");
      manifest.save();
      const slim::CoherenceSweep sweep_out = slim::coherence_sweep(spec, opt);
      for (const std::string& w : sweep_out.warnings) manifest.warn(w);
      std::ostringstream csv;
      csv << "K,seed,coherence,distortion,bound\n";
      for (const slim::CoherenceRow& r : sweep_out.rows) {
        csv << r.K << ',' << r.seed << ',' << csv_number(r.coherence) << ',' << csv_number(r.distortion) << ','
            << csv_number(r.bound.value) << '\n';
      }
      write_text(csv_path, csv.str());
      manifest.doc["c_p"] = sweep_out.c_p;
      manifest.doc["u_max"] = "max landmark norm per cell";
      manifest.doc["spearman"] = number_or_null(sweep_out.spearman);
      manifest.finish();
      std::cout << std::setprecision(6);
      for (std::size_t k = 0; k < sweep_out.ks.size(); ++k) {
        std::cout << "K=" << sweep_out.ks[k] << " coherence=" << sweep_out.mean_coherence[k]
                  << " distortion=" << sweep_out.mean_distortion[k] << '\n';
      }
      std::cout << "spearman(K, coherence) = " << sweep_out.spearman << '\n';
      return kOk;
    }

    if (gc->parsed()) {
      const auto reports = slim::run_gradcheck_suite(common.seed, step, tolerance);
      json doc = json::array();
      bool ok = true;
      for (const auto& r : reports) {
        doc.push_back({{"op", r.op_name},
                       {"max_relative_error", r.max_relative_error},
                       {"coordinates", r.coordinates},
                       {"step", r.step},
                       {"tolerance", r.tolerance},
                       {"passed", r.passed}});
        if (!r.passed) {
          ok = false;
          std::cerr << "FAIL " << r.op_name << " max relative error " << r.max_relative_error << '\n';
        }
      }
      const std::string text = doc.dump(2) + "\n";
      std::cout << text;
      if (gc->count("--out") > 0) {
        fs::create_directories(common.out);
        write_text(fs::path(common.out) / "gradcheck.json", text);
      }
      return ok ? kOk : kCheckFailed;
    }

    if (insp->parsed()) {
      if (!fs::exists(inspect_model)) throw slim::IoError("model file " + inspect_model + " not found");
      const slim::ModelState m = slim::load_model(inspect_model);
      Manifest manifest("inspect", insp, common, data.dataset);
      const slim::DatasetBundle bundle = load_dataset(data, manifest);
      if (m.node_types != bundle.node_label_count) {
        throw slim::ConfigError("model expects " + std::to_string(m.node_types) + " node types, dataset has " +
                                std::to_string(bundle.node_label_count));
      }
      if (graph_index < 0 || graph_index >= static_cast<long long>(bundle.graphs.size())) {
        throw slim::ConfigError("--graph must be in [0, " + std::to_string(bundle.graphs.size()) + ")");
      }
      slim::DatasetBundle one = bundle;
      one.graphs = {bundle.graphs[static_cast<std::size_t>(graph_index)]};
      const slim::PreparedGraph g = slim::prepare_graphs(one, m.substructure).front();
      const slim::Mat w = slim::soft_assignment(m, g);
      const slim::PooledFeatures pf = slim::pool(g.x, w, g.adjacency);
      const std::string stem = "graph" + std::to_string(graph_index) + "_";
      write_matrix_csv(manifest.artifact(stem + "W.csv"), w);
      write_matrix_csv(manifest.artifact(stem + "p.csv"), pf.p);
      write_matrix_csv(manifest.artifact(stem + "M.csv"), pf.M);
      write_matrix_csv(manifest.artifact(stem + "C.csv"), pf.C);
      write_matrix_csv(manifest.artifact(stem + "C_norm.csv"), pf.C_norm);
      manifest.finish();
      std::cout << "graph " << graph_index << ": n=" << g.adjacency.rows() << " K=" << w.cols()
                << " predicted class " << slim::predict(m, std::span(&g, 1), std::vector<std::size_t>{0}).front()
                << '\n';
      return kOk;
    }
  } catch (const slim::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const slim::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const slim::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const slim::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCheckFailed;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  }
  return kOk;
}
