#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace liftnet {

// In-memory dataset: one sample per row, labels as class indices.
struct Dataset {
  Eigen::MatrixXd features;  // n x d
  std::vector<int> labels;   // values in 0..num_classes-1
  int num_classes = 0;
  std::string source;
  std::string normalization;  // "div255" after IDX load, "none" otherwise

  int n() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

// Parses the MNIST IDX pair (big-endian headers, image magic 0x00000803,
// label magic 0x00000801) and scales pixels to [0,1] by /255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Writes a dataset back to IDX (pixels quantized as round(p*255), clamped
// to [0,255]); shaped count x d x 1 unless d is 784, which round-trips as
// 28x28 images.
void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path);

// Gaussian class blobs with unit-separated means (sigma = 0.1, so the
// separation is 10 sigma), shifted so every feature is nonnegative.
// Labels are assigned round-robin. Deterministic in seed.
Dataset make_synthetic(int n, int d, int classes, std::uint64_t seed);

// Class-stratified random subset of size n (largest-remainder apportioning,
// so per-class counts are within one sample of proportional).
Dataset subset(const Dataset& ds, int n, std::uint64_t seed);

// Debug CSV export: label,feature0,feature1,...
void write_csv(const Dataset& ds, const std::string& path);

}  // namespace liftnet
