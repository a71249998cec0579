#include "liftnet/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "liftnet/arch.hpp"
#include "liftnet/baseline.hpp"
#include "liftnet/bcd.hpp"
#include "liftnet/data.hpp"
#include "liftnet/inference.hpp"
#include "liftnet/trace.hpp"

namespace liftnet::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Data specs: mnist:DIR (train split), mnist-test:DIR (t10k split),
// idx:IMAGES,LABELS, synthetic:n=..,d=..,classes=..[,seed=..]
Dataset load_data_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw std::runtime_error("bad data spec '" + spec +
                             "' (expected kind:args)");
  }
  const std::string kind = spec.substr(0, colon);
  const std::string args = spec.substr(colon + 1);
  if (kind == "mnist") {
    return load_idx(args + "/train-images-idx3-ubyte",
                    args + "/train-labels-idx1-ubyte");
  }
  if (kind == "mnist-test") {
    return load_idx(args + "/t10k-images-idx3-ubyte",
                    args + "/t10k-labels-idx1-ubyte");
  }
  if (kind == "idx") {
    const auto comma = args.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error("idx spec needs 'idx:IMAGES,LABELS'");
    }
    return load_idx(args.substr(0, comma), args.substr(comma + 1));
  }
  if (kind == "synthetic") {
    long n = 0, d = 0, classes = 0;
    unsigned long long seed = 0;
    std::stringstream ss(args);
    std::string kv;
    while (std::getline(ss, kv, ',')) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw std::runtime_error("bad synthetic spec entry '" + kv + "'");
      }
      const std::string key = kv.substr(0, eq);
      const std::string val = kv.substr(eq + 1);
      if (key == "n") n = std::stol(val);
      else if (key == "d") d = std::stol(val);
      else if (key == "classes") classes = std::stol(val);
      else if (key == "seed") seed = std::stoull(val);
      else throw std::runtime_error("unknown synthetic key '" + key + "'");
    }
    return make_synthetic(static_cast<int>(n), static_cast<int>(d),
                          static_cast<int>(classes), seed);
  }
  throw std::runtime_error("unknown data kind '" + kind + "'");
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  in >> j;
  return j;
}

struct TrainArgs {
  std::string algo, arch_file, data_spec, out_dir;
  int epochs = 100;
  std::vector<double> gammas{0.1};
  double p = 2.0;
  std::uint64_t seed = 0;
  int subset_n = 0;
  std::uint64_t subset_seed = 0;
  bool subset_seed_set = false;
  double init_scale = 0.01;
  double nnqp_tol = 1e-6;
  int nnqp_max_iter = 2000;
  double w_tol = 1e-6;
  int w_max_iter = 2000;
  double l1_radius = 1.0;
  double weight_decay = 0.0;
  double lr = 0.01;
  double momentum = 0.9;
  int batch = 32;
};

int cmd_train(const TrainArgs& a) {
  const ArchitectureSpec spec = load_arch(a.arch_file);
  Dataset data = load_data_spec(a.data_spec);
  if (a.subset_n > 0) {
    data = subset(data, a.subset_n,
                  a.subset_seed_set ? a.subset_seed : a.seed);
  }

  fs::create_directories(a.out_dir);
  const fs::path out(a.out_dir);
  save_arch(spec, (out / "arch.config").string());

  json manifest;
  manifest["algo"] = a.algo;
  manifest["arch"] = a.arch_file;
  manifest["data"] = a.data_spec;
  manifest["epochs"] = a.epochs;
  manifest["gammas"] = a.gammas;
  manifest["p"] = a.p;
  manifest["seed"] = a.seed;
  manifest["subset"] = a.subset_n;
  manifest["subset_seed"] = a.subset_seed_set ? a.subset_seed : a.seed;
  manifest["init_scale"] = a.init_scale;
  manifest["out"] = a.out_dir;
  manifest["artifacts"] = {{"arch", "arch.config"},
                           {"weights", "weights.bin"},
                           {"trace", "trace.csv"},
                           {"timing", "timing.csv"}};
  if (a.algo == "sgd") {
    manifest["sgd"] = {{"lr", a.lr}, {"momentum", a.momentum}, {"batch", a.batch}};
  } else {
    manifest["tolerances"] = {{"nnqp_tol", a.nnqp_tol},
                              {"nnqp_max_iter", a.nnqp_max_iter},
                              {"w_tol", a.w_tol},
                              {"w_max_iter", a.w_max_iter},
                              {"l1_radius", a.l1_radius},
                              {"weight_decay", a.weight_decay}};
  }

  WeightSet weights;
  TrainTrace trace;
  if (a.algo == "sgd") {
    SgdConfig cfg;
    cfg.learning_rate = a.lr;
    cfg.momentum = a.momentum;
    cfg.batch_size = a.batch;
    cfg.epochs = a.epochs;
    cfg.seed = a.seed;
    cfg.init_scale = a.init_scale;
    auto [w, tr] = train_sgd(data, spec, cfg);
    weights = std::move(w);
    trace = std::move(tr);
  } else {
    TrainConfig cfg;
    cfg.schedule_power = a.p;
    cfg.gammas = a.gammas;
    cfg.max_epochs = a.epochs;
    cfg.seed = a.seed;
    cfg.sparse = a.algo == "bcd-s";
    cfg.init_scale = a.init_scale;
    cfg.nnqp_tol = a.nnqp_tol;
    cfg.nnqp_max_iter = a.nnqp_max_iter;
    cfg.w_tol = a.w_tol;
    cfg.w_max_iter = a.w_max_iter;
    cfg.l1_radius = a.l1_radius;
    cfg.weight_decay = a.weight_decay;
    auto result = train(data, spec, cfg);
    weights = std::move(result.weights);
    trace = std::move(result.trace);
  }

  save_weights(spec, weights, (out / "weights.bin").string());
  write_trace_csv(trace, (out / "trace.csv").string());
  write_timing_csv(trace, (out / "timing.csv").string());
  write_json(manifest, out / "manifest.json");

  if (trace.aborted) {
    std::cerr << "liftnet train: aborted: " << trace.abort_reason << "\n";
    return 1;
  }
  return 0;
}

struct EvalArgs {
  std::string weights_file, arch_file, train_spec, test_spec, out_dir;
  double svm_reg = 0.01;
  int subset_train = 0;
  int subset_test = 0;
  std::uint64_t subset_seed = 0;
};

int cmd_eval(const EvalArgs& a) {
  const ArchitectureSpec spec = load_arch(a.arch_file);
  const WeightSet weights = load_weights(spec, a.weights_file);

  Dataset train_ds = load_data_spec(a.train_spec);
  if (a.subset_train > 0) train_ds = subset(train_ds, a.subset_train, a.subset_seed);
  Dataset test_ds = load_data_spec(a.test_spec);
  if (a.subset_test > 0) test_ds = subset(test_ds, a.subset_test, a.subset_seed + 1);

  const Eigen::MatrixXd features = extract_features(spec, weights, train_ds);
  const LinearClassifier clf =
      fit_linear_svm(features, train_ds.labels, a.svm_reg);
  const EvalMetrics metrics = evaluate(spec, weights, clf, test_ds);

  fs::create_directories(a.out_dir);
  json ev;
  ev["test_error"] = metrics.error;
  ev["n_train"] = train_ds.n();
  ev["n_test"] = metrics.n;
  ev["feature_dim"] = spec.feature_dim();
  ev["svm_reg"] = a.svm_reg;
  json per_class = json::array();
  for (std::size_t c = 0; c < metrics.per_class_total.size(); ++c) {
    const int total = metrics.per_class_total[c];
    per_class.push_back(total > 0 ? static_cast<double>(metrics.per_class_correct[c]) / total
                                  : 0.0);
  }
  ev["per_class_accuracy"] = per_class;
  write_json(ev, fs::path(a.out_dir) / "eval.json");
  std::cout << "test_error " << metrics.error << "\n";
  return 0;
}

struct CompareArgs {
  std::vector<std::string> manifests;
  std::string out_file;
};

int cmd_compare(const CompareArgs& a) {
  if (a.manifests.size() < 2) {
    std::cerr << "liftnet compare: need at least 2 run manifests\n";
    return 1;
  }
  struct Row {
    std::string algo, run;
    double final_objective = 0.0;
    double test_error = 0.0;
    double wall_seconds = 0.0;
    double hidden_nnz = 0.0;
    std::vector<std::string> nnz_names;
    std::vector<double> nnz;
  };
  std::vector<Row> rows;
  std::string arch_canon;

  for (const auto& mpath : a.manifests) {
    const json manifest = read_json(mpath);
    const fs::path dir = fs::path(mpath).parent_path();
    Row row;
    row.algo = manifest.at("algo").get<std::string>();
    row.run = dir.string();

    const ArchitectureSpec spec = load_arch((dir / "arch.config").string());
    const std::string canon = arch_to_string(spec);
    if (arch_canon.empty()) {
      arch_canon = canon;
    } else if (canon != arch_canon) {
      std::cerr << "liftnet compare: incompatible architectures across runs\n";
      return 1;
    }

    const TrainTrace trace = read_trace_csv((dir / "trace.csv").string());
    row.final_objective =
        trace.rows.empty() ? 0.0 : trace.rows.back().objective;

    {
      std::ifstream timing(dir / "timing.csv");
      if (!timing) {
        std::cerr << "liftnet compare: missing timing.csv in " << dir << "\n";
        return 1;
      }
      std::string line;
      std::getline(timing, line);  // header
      while (std::getline(timing, line)) {
        const auto comma = line.find(',');
        if (comma != std::string::npos) {
          row.wall_seconds += std::stod(line.substr(comma + 1));
        }
      }
    }

    if (!fs::exists(dir / "eval.json")) {
      std::cerr << "liftnet compare: missing eval.json in " << dir
                << " (run `liftnet eval` first)\n";
      return 1;
    }
    row.test_error = read_json(dir / "eval.json").at("test_error").get<double>();

    const WeightSet weights = load_weights(spec, (dir / "weights.bin").string());
    long nz = 0, total = 0;
    for (const auto& [key, w] : weights.hidden) {
      row.nnz_names.push_back("w" + std::to_string(key.first) + "_" +
                              std::to_string(key.second));
      const long wz = (w.cwiseAbs().array() > kNonzeroThreshold).count();
      row.nnz.push_back(w.size() > 0
                            ? static_cast<double>(wz) / static_cast<double>(w.size())
                            : 0.0);
      nz += wz;
      total += w.size();
    }
    // Last-layer V is retrained at test time, so it stays out of the
    // sparsity aggregate.
    row.hidden_nnz = total > 0 ? static_cast<double>(nz) / total : 0.0;
    rows.push_back(std::move(row));
  }

  std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
    return std::tie(x.algo, x.run) < std::tie(y.algo, y.run);
  });

  std::ofstream out(a.out_file, std::ios::binary);
  if (!out) {
    std::cerr << "liftnet compare: cannot write " << a.out_file << "\n";
    return 1;
  }
  out << "algo,run,final_objective,test_error,wall_seconds,hidden_nnz";
  for (const auto& name : rows.front().nnz_names) out << ",nnz_" << name;
  out << "\n";
  char buf[32];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& row : rows) {
    out << row.algo << ',' << row.run << ',' << fmt(row.final_objective) << ','
        << fmt(row.test_error) << ',' << fmt(row.wall_seconds) << ','
        << fmt(row.hidden_nnz);
    for (double z : row.nnz) out << ',' << fmt(z);
    out << "\n";
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Lifted Tikhonov block-coordinate training for ReLU networks"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a network and write artifacts");
  tr->add_option("--algo", ta.algo, "bcd | bcd-s | sgd")
      ->required()
      ->check(CLI::IsMember({"bcd", "bcd-s", "sgd"}));
  tr->add_option("--arch", ta.arch_file, "architecture config file")->required();
  tr->add_option("--data", ta.data_spec,
                 "mnist:DIR | mnist-test:DIR | idx:IMG,LBL | synthetic:k=v,...")
      ->required();
  tr->add_option("--epochs", ta.epochs, "iteration budget")
      ->check(CLI::NonNegativeNumber);
  tr->add_option("--gamma", ta.gammas,
                 "layer penalty gamma (one value or one per hidden layer)");
  tr->add_option("--p", ta.p, "theta schedule power (> 1)");
  tr->add_option("--seed", ta.seed, "RNG seed");
  tr->add_option("--out", ta.out_dir, "output run directory")->required();
  tr->add_option("--subset", ta.subset_n, "stratified subset size (0 = all)");
  auto* ss = tr->add_option("--subset-seed", ta.subset_seed,
                            "subset seed (defaults to --seed)");
  tr->add_option("--init-scale", ta.init_scale, "uniform init scale");
  tr->add_option("--nnqp-tol", ta.nnqp_tol, "u sub-problem tolerance");
  tr->add_option("--nnqp-max-iter", ta.nnqp_max_iter, "u sub-problem cap");
  tr->add_option("--w-tol", ta.w_tol, "sparse W sub-problem tolerance");
  tr->add_option("--w-max-iter", ta.w_max_iter, "sparse W sub-problem cap");
  tr->add_option("--l1-radius", ta.l1_radius, "l1 row radius (bcd-s)");
  tr->add_option("--weight-decay", ta.weight_decay, "optional l2 on weights");
  tr->add_option("--lr", ta.lr, "SGD learning rate");
  tr->add_option("--momentum", ta.momentum, "SGD momentum");
  tr->add_option("--batch", ta.batch, "SGD mini-batch size");

  EvalArgs ea;
  auto* ev = app.add_subcommand(
      "eval", "Extract features, retrain the linear SVM, evaluate test error");
  ev->add_option("--weights", ea.weights_file, "weights.bin from train")
      ->required();
  ev->add_option("--arch", ea.arch_file, "architecture config file")->required();
  ev->add_option("--train-data", ea.train_spec, "data spec for SVM training")
      ->required();
  ev->add_option("--test-data", ea.test_spec, "data spec for evaluation")
      ->required();
  ev->add_option("--out", ea.out_dir, "output directory for eval.json")
      ->required();
  ev->add_option("--svm-reg", ea.svm_reg, "SVM l2 regularization");
  ev->add_option("--subset-train", ea.subset_train, "train subset size");
  ev->add_option("--subset-test", ea.subset_test, "test subset size");
  ev->add_option("--subset-seed", ea.subset_seed, "subset seed");

  CompareArgs ca;
  auto* cp = app.add_subcommand("compare",
                                "Combine completed runs into one metrics CSV");
  cp->add_option("manifests", ca.manifests, "manifest.json paths")->required();
  cp->add_option("--out", ca.out_file, "compare CSV path")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (tr->parsed()) {
      ta.subset_seed_set = ss->count() > 0;
      return cmd_train(ta);
    }
    if (ev->parsed()) return cmd_eval(ea);
    if (cp->parsed()) return cmd_compare(ca);
  } catch (const std::exception& e) {
    std::cerr << "liftnet: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace liftnet::cli
