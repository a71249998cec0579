#include "liftnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "liftnet/rng.hpp"

namespace liftnet {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw std::runtime_error("truncated IDX file: " + path);
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char buf[4] = {
      static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
      static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("cannot open IDX images: " + images_path);
  std::ifstream lbl(labels_path, std::ios::binary);
  if (!lbl) throw std::runtime_error("cannot open IDX labels: " + labels_path);

  const std::uint32_t img_magic = read_be32(img, images_path);
  if (img_magic != kImageMagic) {
    char hex[16];
    std::snprintf(hex, sizeof(hex), "0x%08x", img_magic);
    throw std::runtime_error("bad magic in " + images_path + ": " + hex);
  }
  const std::uint32_t count = read_be32(img, images_path);
  const std::uint32_t rows = read_be32(img, images_path);
  const std::uint32_t cols = read_be32(img, images_path);
  const std::size_t d = std::size_t(rows) * std::size_t(cols);
  if (count == 0 || d == 0) {
    throw std::runtime_error("empty IDX image file: " + images_path);
  }

  const std::uint32_t lbl_magic = read_be32(lbl, labels_path);
  if (lbl_magic != kLabelMagic) {
    char hex[16];
    std::snprintf(hex, sizeof(hex), "0x%08x", lbl_magic);
    throw std::runtime_error("bad magic in " + labels_path + ": " + hex);
  }
  const std::uint32_t lbl_count = read_be32(lbl, labels_path);
  if (lbl_count != count) {
    throw std::runtime_error("image/label count mismatch: " +
                             std::to_string(count) + " vs " +
                             std::to_string(lbl_count));
  }

  std::vector<unsigned char> pixel_row(d);
  Dataset ds;
  ds.features.resize(count, static_cast<Eigen::Index>(d));
  for (std::uint32_t i = 0; i < count; ++i) {
    img.read(reinterpret_cast<char*>(pixel_row.data()),
             static_cast<std::streamsize>(d));
    if (!img) throw std::runtime_error("truncated IDX file: " + images_path);
    for (std::size_t j = 0; j < d; ++j) {
      ds.features(i, static_cast<Eigen::Index>(j)) =
          static_cast<double>(pixel_row[j]) / 255.0;
    }
  }

  std::vector<unsigned char> raw_labels(count);
  lbl.read(reinterpret_cast<char*>(raw_labels.data()), count);
  if (!lbl) throw std::runtime_error("truncated IDX file: " + labels_path);
  ds.labels.assign(raw_labels.begin(), raw_labels.end());
  ds.num_classes =
      1 + static_cast<int>(*std::max_element(ds.labels.begin(), ds.labels.end()));
  ds.source = images_path;
  ds.normalization = "div255";
  return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path) {
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("cannot write IDX images: " + images_path);
  std::ofstream lbl(labels_path, std::ios::binary);
  if (!lbl) throw std::runtime_error("cannot write IDX labels: " + labels_path);

  const int n = ds.n();
  const int d = ds.dim();
  const bool square = d == 784;
  write_be32(img, kImageMagic);
  write_be32(img, static_cast<std::uint32_t>(n));
  write_be32(img, square ? 28u : static_cast<std::uint32_t>(d));
  write_be32(img, square ? 28u : 1u);
  std::vector<unsigned char> row(static_cast<std::size_t>(d));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      const double v = std::round(ds.features(i, j) * 255.0);
      row[static_cast<std::size_t>(j)] =
          static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
    }
    img.write(reinterpret_cast<const char*>(row.data()), d);
  }

  write_be32(lbl, kLabelMagic);
  write_be32(lbl, static_cast<std::uint32_t>(n));
  for (int i = 0; i < n; ++i) {
    lbl.put(static_cast<char>(static_cast<unsigned char>(ds.labels[i])));
  }
}

Dataset make_synthetic(int n, int d, int classes, std::uint64_t seed) {
  if (n < 1 || d < 1 || classes < 1) {
    throw std::invalid_argument("make_synthetic: n, d, classes must be >= 1");
  }
  Rng rng(seed);
  Dataset ds;
  ds.features.resize(n, d);
  ds.labels.resize(static_cast<std::size_t>(n));
  ds.num_classes = classes;
  ds.source = "synthetic";
  ds.normalization = "none";

  // Class mean c sits at e_{c mod d} * (1 + floor(c/d)) / sqrt(2): for
  // classes <= d the means are pairwise exactly unit-separated. Noise is
  // sigma = 0.1, i.e. 10 sigma between neighbors.
  constexpr double kSigma = 0.1;
  const double base = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < n; ++i) {
    const int c = i % classes;
    ds.labels[static_cast<std::size_t>(i)] = c;
    for (int j = 0; j < d; ++j) {
      ds.features(i, j) = kSigma * rng.normal();
    }
    ds.features(i, c % d) += base * (1.0 + c / d);
  }
  const double min_v = ds.features.minCoeff();
  if (min_v < 0.0) ds.features.array() -= min_v;
  return ds;
}

Dataset subset(const Dataset& ds, int n, std::uint64_t seed) {
  if (n < 1 || n > ds.n()) {
    throw std::invalid_argument("subset: n out of range (" + std::to_string(n) +
                                " of " + std::to_string(ds.n()) + ")");
  }
  // Per-class quotas by largest remainder, then a seeded shuffle per class.
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(ds.num_classes));
  for (int i = 0; i < ds.n(); ++i) {
    by_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])]
        .push_back(i);
  }
  const double total = static_cast<double>(ds.n());
  std::vector<int> quota(by_class.size(), 0);
  std::vector<std::pair<double, int>> remainder;
  int assigned = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const double exact = n * static_cast<double>(by_class[c].size()) / total;
    quota[c] = static_cast<int>(std::floor(exact));
    quota[c] = std::min<int>(quota[c], static_cast<int>(by_class[c].size()));
    assigned += quota[c];
    remainder.emplace_back(exact - quota[c], static_cast<int>(c));
  }
  std::sort(remainder.begin(), remainder.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  for (std::size_t k = 0; assigned < n; k = (k + 1) % remainder.size()) {
    const auto c = static_cast<std::size_t>(remainder[k].second);
    if (quota[c] < static_cast<int>(by_class[c].size())) {
      ++quota[c];
      ++assigned;
    }
  }

  Rng rng(seed);
  std::vector<int> chosen;
  chosen.reserve(static_cast<std::size_t>(n));
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    for (std::size_t i = idx.size(); i > 1; --i) {  // Fisher-Yates, pinned RNG
      std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
    }
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + quota[c]);
  }

  Dataset out;
  out.features.resize(n, ds.dim());
  out.labels.resize(static_cast<std::size_t>(n));
  out.num_classes = ds.num_classes;
  out.source = ds.source;
  out.normalization = ds.normalization;
  for (int i = 0; i < n; ++i) {
    out.features.row(i) = ds.features.row(chosen[static_cast<std::size_t>(i)]);
    out.labels[static_cast<std::size_t>(i)] =
        ds.labels[static_cast<std::size_t>(chosen[static_cast<std::size_t>(i)])];
  }
  return out;
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CSV: " + path);
  out << "label";
  for (int j = 0; j < ds.dim(); ++j) out << ",x" << j;
  out << "\n";
  char buf[32];
  for (int i = 0; i < ds.n(); ++i) {
    out << ds.labels[static_cast<std::size_t>(i)];
    for (int j = 0; j < ds.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.features(i, j));
      out << ',' << buf;
    }
    out << "\n";
  }
}

}  // namespace liftnet
