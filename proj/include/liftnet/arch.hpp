#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace liftnet {

enum class EdgeKind { Learnable, FixedIdentity };

struct LayerInput {
  int source = 0;
  EdgeKind kind = EdgeKind::Learnable;
};

// Layered DAG with multi-input ReLU units. Layer 0 is the input, layers
// 1..N are ReLU hidden layers, layer N+1 is the linear classifier output.
// Each hidden layer n sums contributions from its input set M_n, where an
// edge is either a learnable matrix or a structural identity skip (never
// materialized; requires matching dimensions).
struct ArchitectureSpec {
  int num_hidden_layers = 0;           // N
  std::vector<int> dims;               // d_0 .. d_{N+1}
  std::vector<std::vector<LayerInput>> inputs;  // inputs[n-1] = M_n, n in 1..N

  int N() const { return num_hidden_layers; }
  int input_dim() const { return dims.front(); }
  int feature_dim() const { return dims[num_hidden_layers]; }
  int num_classes() const { return dims.back(); }

  const std::vector<LayerInput>& layer_inputs(int n) const {
    return inputs[static_cast<std::size_t>(n) - 1];
  }

  // Dimension of the concatenated vector [u_0; ...; u_N].
  int lifted_dim() const;
  // Offsets of blocks 0..N inside the lifted vector (last entry = D).
  std::vector<int> block_offsets() const;
  // Learnable (n, m) pairs in canonical sorted order.
  std::vector<std::pair<int, int>> learnable_edges() const;
};

// Checks all ArchitectureSpec invariants; returns an empty list iff the
// spec is well formed (acyclic references m < n, nonempty input sets,
// identity edges with matching dims, positive dimensions).
std::vector<std::string> validate(const ArchitectureSpec& spec);

// Throws std::invalid_argument listing every violation.
void require_valid(const ArchitectureSpec& spec);

// Learnable weights, keyed by (layer, source) for hidden edges, plus the
// classifier matrix V (num_classes x feature_dim) stored separately.
struct WeightSet {
  std::map<std::pair<int, int>, Eigen::MatrixXd> hidden;
  Eigen::MatrixXd classifier;
};

// i.i.d. uniform [-scale, scale] entries, deterministic in seed. Under the
// sparse regime every row of every hidden matrix is additionally projected
// onto the unit l1 ball (the classifier is exempt).
WeightSet init_weights(const ArchitectureSpec& spec, std::uint64_t seed,
                       double scale, bool sparse = false);

// Checks weight shapes against the learnable edges and finiteness of all
// entries; returns violations (empty = ok).
std::vector<std::string> validate_weights(const ArchitectureSpec& spec,
                                          const WeightSet& weights);

// Plain-text architecture config. Grammar (one directive per line, '#'
// starts a comment):
//   layers N
//   dims d0 d1 ... d_{N+1}
//   inputs n m[:identity] [m2[:identity] ...]
// Every hidden layer 1..N needs exactly one `inputs` line; edges default
// to learnable unless tagged `:identity`.
ArchitectureSpec load_arch(const std::string& path);
void save_arch(const ArchitectureSpec& spec, const std::string& path);
std::string arch_to_string(const ArchitectureSpec& spec);

}  // namespace liftnet
