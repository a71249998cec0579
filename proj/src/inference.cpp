#include "liftnet/inference.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "liftnet/lifting.hpp"
#include "liftnet/parallel.hpp"
#include "liftnet/solvers.hpp"

static_assert(std::endian::native == std::endian::little,
              "weight container I/O assumes a little-endian host");

namespace liftnet {

std::vector<Eigen::VectorXd> forward(const ArchitectureSpec& spec,
                                     const WeightSet& weights,
                                     const Eigen::VectorXd& x) {
  if (x.size() != spec.input_dim()) {
    throw std::invalid_argument("forward: input dim " + std::to_string(x.size()) +
                                " != " + std::to_string(spec.input_dim()));
  }
  std::vector<Eigen::VectorXd> u(static_cast<std::size_t>(spec.N()) + 1);
  u[0] = x;
  for (int n = 1; n <= spec.N(); ++n) {
    Eigen::VectorXd pre = Eigen::VectorXd::Zero(spec.dims[n]);
    for (const auto& in : spec.layer_inputs(n)) {
      if (in.kind == EdgeKind::FixedIdentity) {
        pre += u[static_cast<std::size_t>(in.source)];
      } else {
        pre.noalias() += weights.hidden.at({n, in.source}) *
                         u[static_cast<std::size_t>(in.source)];
      }
    }
    u[static_cast<std::size_t>(n)] = pre.cwiseMax(0.0);
  }
  return u;
}

std::vector<Eigen::MatrixXd> forward_batch(const ArchitectureSpec& spec,
                                           const WeightSet& weights,
                                           const Eigen::MatrixXd& X0) {
  if (X0.rows() != spec.input_dim()) {
    throw std::invalid_argument("forward_batch: bad input dim");
  }
  std::vector<Eigen::MatrixXd> u(static_cast<std::size_t>(spec.N()) + 1);
  u[0] = X0;
  for (int n = 1; n <= spec.N(); ++n) {
    Eigen::MatrixXd pre = Eigen::MatrixXd::Zero(spec.dims[n], X0.cols());
    for (const auto& in : spec.layer_inputs(n)) {
      if (in.kind == EdgeKind::FixedIdentity) {
        pre += u[static_cast<std::size_t>(in.source)];
      } else {
        pre.noalias() += weights.hidden.at({n, in.source}) *
                         u[static_cast<std::size_t>(in.source)];
      }
    }
    u[static_cast<std::size_t>(n)] = pre.cwiseMax(0.0);
  }
  return u;
}

Eigen::MatrixXd extract_features(const ArchitectureSpec& spec,
                                 const WeightSet& weights, const Dataset& ds) {
  const auto blocks = forward_batch(spec, weights, ds.features.transpose());
  return blocks.back().transpose();
}

LinearClassifier fit_linear_svm(const Eigen::MatrixXd& features,
                                const std::vector<int>& labels, double reg,
                                double grad_tol, int max_iter) {
  const int n = static_cast<int>(features.rows());
  const int d = static_cast<int>(features.cols());
  if (n == 0 || static_cast<int>(labels.size()) != n) {
    throw std::invalid_argument("fit_linear_svm: bad labels");
  }
  if (!(reg >= 0.0)) throw std::invalid_argument("fit_linear_svm: reg < 0");
  const int classes = 1 + *std::max_element(labels.begin(), labels.end());
  std::vector<int> counts(static_cast<std::size_t>(classes), 0);
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument("fit_linear_svm: negative label");
    ++counts[static_cast<std::size_t>(l)];
  }
  int present = 0;
  for (int c : counts) present += c > 0 ? 1 : 0;
  if (present < 2) {
    throw std::invalid_argument("fit_linear_svm: need at least 2 classes");
  }

  // Bias via feature augmentation; the whole augmented vector is
  // regularized uniformly.
  Eigen::MatrixXd phi(n, d + 1);
  phi.leftCols(d) = features;
  phi.col(d).setOnes();

  Eigen::MatrixXd S = -Eigen::MatrixXd::Ones(classes, n);
  for (int i = 0; i < n; ++i) S(labels[static_cast<std::size_t>(i)], i) = 1.0;

  // L <= 2/n lambda_max(phi'phi) + reg for the squared hinge.
  auto gram_apply = [&phi, n](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
    out.noalias() = phi.transpose() * (phi * v) / static_cast<double>(n);
  };
  const double L =
      2.0 * 1.1 * estimate_operator_norm(gram_apply, d + 1, 30) + reg + 1e-12;

  // All one-vs-rest problems share the data, so they run as one matrix
  // iteration; the objective is separable across rows.
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(classes, d + 1);
  auto objective_grad = [&](const Eigen::MatrixXd& X, Eigen::MatrixXd* grad) {
    Eigen::MatrixXd margins =
        Eigen::MatrixXd::Ones(classes, n) - S.cwiseProduct(X * phi.transpose());
    margins = margins.cwiseMax(0.0);
    const double f =
        margins.squaredNorm() / n + 0.5 * reg * X.squaredNorm();
    if (grad) {
      grad->noalias() =
          (-2.0 / n) * (S.cwiseProduct(margins)) * phi;
      *grad += reg * X;
    }
    return f;
  };

  Eigen::MatrixXd Y = W, Wm = W, grad(classes, d + 1), Wn;
  double fw = objective_grad(W, &grad);
  double t = 1.0;
  int k = 0;
  for (; k < max_iter; ++k) {
    if (grad.norm() <= grad_tol) break;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    Y = W + beta * (W - Wm);
    Eigen::MatrixXd gy(classes, d + 1);
    objective_grad(Y, &gy);
    Wn = Y - gy / L;
    const double fn = objective_grad(Wn, nullptr);
    if (fn > fw) {
      Wn = W - grad / L;  // restart from the last iterate
      t = 1.0;
    } else {
      t = t_next;
    }
    Wm = W;
    W = Wn;
    fw = objective_grad(W, &grad);
  }

  LinearClassifier clf;
  clf.weights = W.leftCols(d);
  clf.bias = W.col(d);
  clf.feature_dim = d;
  clf.num_classes = classes;
  return clf;
}

Eigen::VectorXd classifier_scores(const LinearClassifier& clf,
                                  const Eigen::VectorXd& feature) {
  if (feature.size() != clf.feature_dim) {
    throw std::invalid_argument("classifier_scores: bad feature dim");
  }
  return clf.weights * feature + clf.bias;
}

EvalMetrics evaluate(const ArchitectureSpec& spec, const WeightSet& weights,
                     const LinearClassifier& clf, const Dataset& ds) {
  if (clf.feature_dim != spec.feature_dim()) {
    throw std::invalid_argument("evaluate: classifier/architecture mismatch");
  }
  const Eigen::MatrixXd feats = extract_features(spec, weights, ds);
  EvalMetrics m;
  m.n = ds.n();
  m.per_class_total.assign(static_cast<std::size_t>(ds.num_classes), 0);
  m.per_class_correct.assign(static_cast<std::size_t>(ds.num_classes), 0);
  int wrong = 0;
  const Eigen::MatrixXd scores =
      clf.weights * feats.transpose() + clf.bias.rowwise().replicate(ds.n());
  for (int i = 0; i < ds.n(); ++i) {
    Eigen::Index pred = 0;
    scores.col(i).maxCoeff(&pred);
    const int label = ds.labels[static_cast<std::size_t>(i)];
    ++m.per_class_total[static_cast<std::size_t>(label)];
    if (static_cast<int>(pred) == label) {
      ++m.per_class_correct[static_cast<std::size_t>(label)];
    } else {
      ++wrong;
    }
  }
  m.error = ds.n() > 0 ? static_cast<double>(wrong) / ds.n() : 0.0;
  return m;
}

int ideal_decision(const ArchitectureSpec& spec, const WeightSet& weights,
                   const std::vector<double>& gammas, const Eigen::VectorXd& x) {
  const LiftedQuadratic q(spec, weights, gammas);
  const auto off = spec.block_offsets();
  const int D = q.dim();
  const int d0 = spec.input_dim();
  const int dN = spec.feature_dim();
  const Eigen::MatrixXd& V = weights.classifier;
  const Eigen::MatrixXd VtV = V.transpose() * V;

  NnqpProblem p;
  p.hessian_apply = [&](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
    q.apply(v, out);
    out.segment(off[spec.N()], dN).noalias() += VtV * v.segment(off[spec.N()], dN);
  };
  p.fixed.assign(static_cast<std::size_t>(D), 0);
  std::fill(p.fixed.begin(), p.fixed.begin() + d0, 1);
  p.fixed_values = Eigen::VectorXd::Zero(D);
  p.fixed_values.head(d0) = x;

  // Warm start from the feed-forward pass.
  const auto ff = forward(spec, weights, x);
  Eigen::VectorXd start(D);
  for (int n = 0; n <= spec.N(); ++n) {
    start.segment(off[n], spec.dims[n]) = ff[static_cast<std::size_t>(n)];
  }

  int best = -1;
  double best_value = std::numeric_limits<double>::infinity();
  for (int y = 0; y < spec.num_classes(); ++y) {
    Eigen::VectorXd target = Eigen::VectorXd::Zero(spec.num_classes());
    target[y] = 1.0;
    p.linear = Eigen::VectorXd::Zero(D);
    p.linear.segment(off[spec.N()], dN) = V.transpose() * target;
    const auto r = solve_nnqp(p, start, 1e-8, 5000);
    // objective above omits the constant 1/2|y|^2 = 1/2, same for all labels
    if (r.objective < best_value) {
      best_value = r.objective;
      best = y;
    }
  }
  return best;
}

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("truncated weight file: " + path);
  return v;
}

}  // namespace

void save_weights(const ArchitectureSpec& spec, const WeightSet& weights,
                  const std::string& path) {
  const auto errors = validate_weights(spec, weights);
  if (!errors.empty()) {
    throw std::invalid_argument("save_weights: " + errors.front());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write weights: " + path);
  out.write("LNWB", 4);
  write_u32(out, 1u);  // version
  write_u32(out, static_cast<std::uint32_t>(spec.N()));
  for (int d : spec.dims) write_u32(out, static_cast<std::uint32_t>(d));
  std::vector<std::tuple<int, int, EdgeKind>> edges;
  for (int n = 1; n <= spec.N(); ++n) {
    for (const auto& in : spec.layer_inputs(n)) {
      edges.emplace_back(n, in.source, in.kind);
    }
  }
  std::sort(edges.begin(), edges.end());
  write_u32(out, static_cast<std::uint32_t>(edges.size()));
  for (const auto& [n, m, kind] : edges) {
    write_u32(out, static_cast<std::uint32_t>(n));
    write_u32(out, static_cast<std::uint32_t>(m));
    out.put(kind == EdgeKind::Learnable ? 0 : 1);
  }
  // Matrices are stored row-major; Eigen's default layout is column-major,
  // so rows stream out one at a time.
  auto write_matrix = [&out](const Eigen::MatrixXd& w) {
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      const Eigen::VectorXd row = w.row(r).transpose();
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(sizeof(double) * row.size()));
    }
  };
  for (const auto& [key, w] : weights.hidden) write_matrix(w);
  write_matrix(weights.classifier);
  if (!out) throw std::runtime_error("failed writing weights: " + path);
}

WeightSet load_weights(const ArchitectureSpec& spec, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weights: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "LNWB", 4) != 0) {
    throw std::runtime_error("bad weight file magic: " + path);
  }
  const std::uint32_t version = read_u32(in, path);
  if (version != 1u) {
    throw std::runtime_error("unsupported weight file version " +
                             std::to_string(version) + ": " + path);
  }
  const std::uint32_t N = read_u32(in, path);
  if (N != static_cast<std::uint32_t>(spec.N())) {
    throw std::runtime_error("weight/arch mismatch: N=" + std::to_string(N) +
                             " vs " + std::to_string(spec.N()));
  }
  for (int k = 0; k < spec.N() + 2; ++k) {
    const std::uint32_t d = read_u32(in, path);
    if (d != static_cast<std::uint32_t>(spec.dims[k])) {
      throw std::runtime_error("weight/arch mismatch: dims[" +
                               std::to_string(k) + "]");
    }
  }
  std::vector<std::tuple<int, int, EdgeKind>> expected;
  for (int n = 1; n <= spec.N(); ++n) {
    for (const auto& e : spec.layer_inputs(n)) {
      expected.emplace_back(n, e.source, e.kind);
    }
  }
  std::sort(expected.begin(), expected.end());
  const std::uint32_t edge_count = read_u32(in, path);
  if (edge_count != expected.size()) {
    throw std::runtime_error("weight/arch mismatch: edge count");
  }
  for (const auto& [n, m, kind] : expected) {
    const std::uint32_t fn = read_u32(in, path);
    const std::uint32_t fm = read_u32(in, path);
    const int fk = in.get();
    if (!in || fn != static_cast<std::uint32_t>(n) ||
        fm != static_cast<std::uint32_t>(m) ||
        fk != (kind == EdgeKind::Learnable ? 0 : 1)) {
      throw std::runtime_error("weight/arch mismatch: edge list");
    }
  }

  auto read_matrix = [&in, &path](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd w(rows, cols);
    Eigen::VectorXd row(cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      in.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(sizeof(double) * cols));
      if (!in) throw std::runtime_error("truncated weight file: " + path);
      w.row(r) = row.transpose();
    }
    return w;
  };

  WeightSet ws;
  for (const auto& [n, m] : spec.learnable_edges()) {
    ws.hidden[{n, m}] = read_matrix(spec.dims[n], spec.dims[m]);
  }
  ws.classifier = read_matrix(spec.num_classes(), spec.feature_dim());
  // Exactly at EOF now; anything else means a corrupt container.
  in.peek();
  if (!in.eof()) throw std::runtime_error("trailing bytes in weights: " + path);
  const auto errors = validate_weights(spec, ws);
  if (!errors.empty()) {
    throw std::runtime_error("invalid weights in " + path + ": " +
                             errors.front());
  }
  return ws;
}

}  // namespace liftnet
