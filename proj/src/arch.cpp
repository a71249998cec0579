#include "liftnet/arch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "liftnet/rng.hpp"
#include "liftnet/solvers.hpp"

namespace liftnet {

int ArchitectureSpec::lifted_dim() const {
  int d = 0;
  for (int k = 0; k <= num_hidden_layers; ++k) d += dims[k];
  return d;
}

std::vector<int> ArchitectureSpec::block_offsets() const {
  std::vector<int> off(static_cast<std::size_t>(num_hidden_layers) + 2, 0);
  for (int k = 0; k <= num_hidden_layers; ++k) off[k + 1] = off[k] + dims[k];
  return off;
}

std::vector<std::pair<int, int>> ArchitectureSpec::learnable_edges() const {
  std::vector<std::pair<int, int>> edges;
  for (int n = 1; n <= num_hidden_layers; ++n) {
    for (const auto& in : layer_inputs(n)) {
      if (in.kind == EdgeKind::Learnable) edges.emplace_back(n, in.source);
    }
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

std::vector<std::string> validate(const ArchitectureSpec& spec) {
  std::vector<std::string> errors;
  const int n_layers = spec.num_hidden_layers;
  if (n_layers < 1) {
    errors.push_back("num_hidden_layers must be >= 1");
    return errors;
  }
  if (static_cast<int>(spec.dims.size()) != n_layers + 2) {
    errors.push_back("dims must list d_0..d_{N+1} (" +
                     std::to_string(n_layers + 2) + " entries)");
    return errors;
  }
  for (std::size_t k = 0; k < spec.dims.size(); ++k) {
    if (spec.dims[k] < 1) {
      errors.push_back("dims[" + std::to_string(k) + "] must be positive");
    }
  }
  if (static_cast<int>(spec.inputs.size()) != n_layers) {
    errors.push_back("inputs must cover layers 1.." + std::to_string(n_layers));
    return errors;
  }
  for (int n = 1; n <= n_layers; ++n) {
    const auto& set = spec.layer_inputs(n);
    if (set.empty()) {
      errors.push_back("layer " + std::to_string(n) + ": empty input set");
      continue;
    }
    std::vector<int> seen;
    for (const auto& in : set) {
      if (in.source < 0 || in.source >= n) {
        errors.push_back("layer " + std::to_string(n) + ": cyclic reference (" +
                         std::to_string(in.source) + " >= " + std::to_string(n) +
                         " or negative)");
        continue;
      }
      if (std::find(seen.begin(), seen.end(), in.source) != seen.end()) {
        errors.push_back("layer " + std::to_string(n) + ": duplicate input " +
                         std::to_string(in.source));
      }
      seen.push_back(in.source);
      if (in.kind == EdgeKind::FixedIdentity &&
          spec.dims[n] != spec.dims[in.source]) {
        errors.push_back("layer " + std::to_string(n) + ": identity edge from " +
                         std::to_string(in.source) + " needs d_n = d_m (" +
                         std::to_string(spec.dims[n]) + " != " +
                         std::to_string(spec.dims[in.source]) + ")");
      }
    }
  }
  return errors;
}

void require_valid(const ArchitectureSpec& spec) {
  const auto errors = validate(spec);
  if (errors.empty()) return;
  std::string msg = "invalid architecture:";
  for (const auto& e : errors) msg += "\n  " + e;
  throw std::invalid_argument(msg);
}

WeightSet init_weights(const ArchitectureSpec& spec, std::uint64_t seed,
                       double scale, bool sparse) {
  require_valid(spec);
  if (scale < 0.0) throw std::invalid_argument("init scale must be >= 0");
  Rng rng(seed);
  WeightSet ws;
  for (const auto& [n, m] : spec.learnable_edges()) {
    Eigen::MatrixXd w(spec.dims[n], spec.dims[m]);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        w(r, c) = rng.uniform(-scale, scale);
      }
    }
    if (sparse) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        w.row(r) = project_l1_ball_row(w.row(r).transpose(), 1.0).transpose();
      }
    }
    ws.hidden.emplace(std::make_pair(n, m), std::move(w));
  }
  ws.classifier.resize(spec.num_classes(), spec.feature_dim());
  for (Eigen::Index r = 0; r < ws.classifier.rows(); ++r) {
    for (Eigen::Index c = 0; c < ws.classifier.cols(); ++c) {
      ws.classifier(r, c) = rng.uniform(-scale, scale);
    }
  }
  return ws;
}

std::vector<std::string> validate_weights(const ArchitectureSpec& spec,
                                          const WeightSet& weights) {
  std::vector<std::string> errors;
  const auto edges = spec.learnable_edges();
  if (weights.hidden.size() != edges.size()) {
    errors.push_back("weight set has " + std::to_string(weights.hidden.size()) +
                     " hidden matrices, expected " + std::to_string(edges.size()));
  }
  for (const auto& [n, m] : edges) {
    const auto it = weights.hidden.find({n, m});
    if (it == weights.hidden.end()) {
      errors.push_back("missing weight for edge (" + std::to_string(n) + "," +
                       std::to_string(m) + ")");
      continue;
    }
    if (it->second.rows() != spec.dims[n] || it->second.cols() != spec.dims[m]) {
      errors.push_back("edge (" + std::to_string(n) + "," + std::to_string(m) +
                       ") has wrong shape");
    }
    if (!it->second.allFinite()) {
      errors.push_back("edge (" + std::to_string(n) + "," + std::to_string(m) +
                       ") has non-finite entries");
    }
  }
  for (const auto& [key, w] : weights.hidden) {
    if (std::find(edges.begin(), edges.end(), key) == edges.end()) {
      errors.push_back("weight (" + std::to_string(key.first) + "," +
                       std::to_string(key.second) + ") has no learnable edge");
    }
    (void)w;
  }
  if (weights.classifier.rows() != spec.num_classes() ||
      weights.classifier.cols() != spec.feature_dim()) {
    errors.push_back("classifier has wrong shape");
  } else if (!weights.classifier.allFinite()) {
    errors.push_back("classifier has non-finite entries");
  }
  return errors;
}

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream iss(line);
  std::string tok;
  while (iss >> tok) {
    if (tok[0] == '#') break;
    tokens.push_back(tok);
  }
  return tokens;
}

int parse_int(const std::string& tok, int line_no) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument("trailing chars");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("arch config line " + std::to_string(line_no) +
                             ": expected integer, got '" + tok + "'");
  }
}

}  // namespace

ArchitectureSpec load_arch(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open arch config: " + path);

  ArchitectureSpec spec;
  bool have_layers = false;
  bool have_dims = false;
  std::map<int, std::vector<LayerInput>> input_lines;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    const std::string& key = tokens[0];
    if (key == "layers") {
      if (tokens.size() != 2) {
        throw std::runtime_error("arch config line " + std::to_string(line_no) +
                                 ": layers takes one value");
      }
      spec.num_hidden_layers = parse_int(tokens[1], line_no);
      have_layers = true;
    } else if (key == "dims") {
      spec.dims.clear();
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        spec.dims.push_back(parse_int(tokens[i], line_no));
      }
      have_dims = true;
    } else if (key == "inputs") {
      if (tokens.size() < 3) {
        throw std::runtime_error("arch config line " + std::to_string(line_no) +
                                 ": inputs needs a layer and at least one source");
      }
      const int layer = parse_int(tokens[1], line_no);
      std::vector<LayerInput> set;
      for (std::size_t i = 2; i < tokens.size(); ++i) {
        const std::string& tok = tokens[i];
        const auto colon = tok.find(':');
        LayerInput li;
        if (colon == std::string::npos) {
          li.source = parse_int(tok, line_no);
          li.kind = EdgeKind::Learnable;
        } else {
          li.source = parse_int(tok.substr(0, colon), line_no);
          const std::string kind = tok.substr(colon + 1);
          if (kind == "identity") {
            li.kind = EdgeKind::FixedIdentity;
          } else if (kind == "learnable") {
            li.kind = EdgeKind::Learnable;
          } else {
            throw std::runtime_error("arch config line " +
                                     std::to_string(line_no) +
                                     ": unknown edge kind '" + kind + "'");
          }
        }
        set.push_back(li);
      }
      if (input_lines.count(layer)) {
        throw std::runtime_error("arch config line " + std::to_string(line_no) +
                                 ": duplicate inputs for layer " +
                                 std::to_string(layer));
      }
      input_lines.emplace(layer, std::move(set));
    } else {
      throw std::runtime_error("arch config line " + std::to_string(line_no) +
                               ": unknown directive '" + key + "'");
    }
  }
  if (!have_layers || !have_dims) {
    throw std::runtime_error("arch config " + path +
                             ": missing 'layers' or 'dims'");
  }
  spec.inputs.resize(static_cast<std::size_t>(std::max(spec.num_hidden_layers, 0)));
  for (auto& [layer, set] : input_lines) {
    if (layer < 1 || layer > spec.num_hidden_layers) {
      throw std::runtime_error("arch config " + path + ": inputs for layer " +
                               std::to_string(layer) + " out of range");
    }
    spec.inputs[static_cast<std::size_t>(layer) - 1] = std::move(set);
  }
  require_valid(spec);
  return spec;
}

std::string arch_to_string(const ArchitectureSpec& spec) {
  std::ostringstream out;
  out << "layers " << spec.num_hidden_layers << "\n";
  out << "dims";
  for (int d : spec.dims) out << ' ' << d;
  out << "\n";
  for (int n = 1; n <= spec.num_hidden_layers; ++n) {
    out << "inputs " << n;
    for (const auto& in : spec.layer_inputs(n)) {
      out << ' ' << in.source;
      if (in.kind == EdgeKind::FixedIdentity) out << ":identity";
    }
    out << "\n";
  }
  return out.str();
}

void save_arch(const ArchitectureSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write arch config: " + path);
  out << arch_to_string(spec);
}

}  // namespace liftnet
