#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gdt/error.hpp"
#include "gdt/format.hpp"
#include "gdt/linalg.hpp"
#include "gdt/loss.hpp"
#include "gdt/rng.hpp"

namespace gdt {

/// Feature vectors with integer class labels.
struct LabeledDataset {
  std::vector<Vector> features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return features.size(); }
  bool empty() const noexcept { return features.empty(); }
  std::size_t dim() const { return features.empty() ? 0 : features.front().size(); }

  std::size_t class_count() const { return std::set<int>(labels.begin(), labels.end()).size(); }

  void validate() const {
    if (features.size() != labels.size()) throw SchemaError("feature and label counts differ", 0);
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (features[i].size() != dim())
        throw SchemaError("sample " + std::to_string(i) + " has dimension " + std::to_string(features[i].size()) +
                              ", expected " + std::to_string(dim()),
                          i + 1);
      if (!all_finite(features[i])) throw InvalidInput("sample " + std::to_string(i) + " has non-finite features");
    }
  }

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

// ---- synthetic two-plane data ----------------------------------------------

struct SyntheticConfig {
  std::size_t embed_dim = 100;
  std::size_t train_per_class = 40;
  std::size_t test_per_class = 1000;
  std::uint64_t seed = 1;
};

/// The plane a latent point was drawn from: y_coeff * y + z = rhs.
struct PlaneConstraint {
  double y_coeff;
  double rhs;
};

/// Pre-embedding coordinates (x, y, z) of one synthetic sample.
struct LatentPoint {
  std::array<double, 3> v;
  PlaneConstraint plane;
};

struct TwoPlaneData {
  LabeledDataset train;
  LabeledDataset test;
  Matrix embedding;  // d x 3, shared by train and test
  std::vector<LatentPoint> train_latent;
  std::vector<LatentPoint> test_latent;
};

namespace detail {

inline double det3(const std::array<double, 9>& m) {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

/// d x 3 standard normal matrix with a well-conditioned Gram matrix.
inline Matrix draw_embedding(std::size_t d, Rng& rng) {
  for (;;) {
    Matrix u(d, 3);
    for (double& v : u.data()) v = rng.normal();
    std::array<double, 9> gram{};
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b) gram[a * 3 + b] += u(r, a) * u(r, b);
    const double scale = gram[0] * gram[4] * gram[8];
    if (std::abs(det3(gram)) > 1e-10 * scale) return u;
  }
}

/// Class 1 lives on -y+z=1 (z in [-3,0]) and y+z=1 (z in [0,3]); class 2
/// mirrors it with right-hand side -1. x is uniform in [-1,1] throughout.
inline LatentPoint draw_latent(int label, Rng& rng) {
  const double rhs = label == 1 ? 1.0 : -1.0;
  const bool lower = rng.coin();
  const double x = rng.uniform(-1.0, 1.0);
  LatentPoint p{};
  if (lower) {
    const double z = rng.uniform(-3.0, 0.0);
    p.v = {x, z - rhs, z};  // -y + z = rhs
    p.plane = {-1.0, rhs};
  } else {
    const double z = rng.uniform(0.0, 3.0);
    p.v = {x, rhs - z, z};  // y + z = rhs
    p.plane = {1.0, rhs};
  }
  return p;
}

inline void draw_split(std::size_t per_class, const Matrix& u, Rng& rng, LabeledDataset& out,
                       std::vector<LatentPoint>& latent) {
  for (int label : {1, 2}) {
    for (std::size_t k = 0; k < per_class; ++k) {
      LatentPoint p = draw_latent(label, rng);
      Vector x = matvec(u, p.v);
      const double len = norm(x);
      for (double& v : x) v /= len;
      out.features.push_back(std::move(x));
      out.labels.push_back(label);
      latent.push_back(p);
    }
  }
}

}  // namespace detail

/// Two interleaved planar classes embedded into R^d by a random U and normalized to the unit sphere.
inline TwoPlaneData gen_two_plane_dataset(const SyntheticConfig& cfg) {
  if (cfg.embed_dim < 3) throw ConfigError("synthetic embed_dim must be >= 3");
  Rng rng(cfg.seed);
  TwoPlaneData d;
  d.embedding = detail::draw_embedding(cfg.embed_dim, rng);
  detail::draw_split(cfg.train_per_class, d.embedding, rng, d.train, d.train_latent);
  detail::draw_split(cfg.test_per_class, d.embedding, rng, d.test, d.test_latent);
  return d;
}

// ---- CSV -------------------------------------------------------------------

/// One sample per row: `label,v_1,...,v_d`.
inline void save_dataset_csv(const LabeledDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.labels[i];
    for (double v : ds.features[i]) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

inline LabeledDataset parse_dataset_csv(std::istream& in) {
  LabeledDataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() < 2) throw ParseError("row needs a label and at least one value", line_no);
    int label = 0;
    if (!parse_int(fields[0], label)) throw ParseError("bad label '" + std::string(fields[0]) + "'", line_no);
    Vector x(fields.size() - 1);
    for (std::size_t k = 1; k < fields.size(); ++k)
      if (!parse_double(fields[k], x[k - 1]) || !std::isfinite(x[k - 1]))
        throw ParseError("bad value '" + std::string(fields[k]) + "' in column " + std::to_string(k + 1), line_no);
    if (!ds.empty() && x.size() != ds.dim())
      throw SchemaError("row has " + std::to_string(x.size()) + " values, expected " + std::to_string(ds.dim()),
                        line_no);
    ds.features.push_back(std::move(x));
    ds.labels.push_back(label);
  }
  return ds;
}

inline LabeledDataset load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_dataset_csv(in);
}

// ---- IDX -------------------------------------------------------------------

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct IdxImages {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::vector<std::uint8_t>> images;
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(what + ": truncated header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace detail

inline IdxImages read_idx_images(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::string name = path.string();
  const std::uint32_t magic = detail::read_be32(in, name);
  if (magic != kIdxImageMagic) throw FormatError(name + ": bad image magic number");
  const std::size_t count = detail::read_be32(in, name);
  IdxImages out;
  out.rows = detail::read_be32(in, name);
  out.cols = detail::read_be32(in, name);
  out.images.assign(count, std::vector<std::uint8_t>(out.rows * out.cols));
  for (auto& img : out.images)
    if (!in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(img.size())))
      throw FormatError(name + ": truncated image payload");
  return out;
}

inline std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::string name = path.string();
  if (detail::read_be32(in, name) != kIdxLabelMagic) throw FormatError(name + ": bad label magic number");
  std::vector<std::uint8_t> labels(detail::read_be32(in, name));
  if (!in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(labels.size())))
    throw FormatError(name + ": truncated label payload");
  return labels;
}

inline void write_idx(const IdxImages& images, const std::vector<std::uint8_t>& labels,
                      const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) throw Error("cannot open IDX output files");
  detail::write_be32(img, kIdxImageMagic);
  detail::write_be32(img, static_cast<std::uint32_t>(images.images.size()));
  detail::write_be32(img, static_cast<std::uint32_t>(images.rows));
  detail::write_be32(img, static_cast<std::uint32_t>(images.cols));
  for (const auto& im : images.images) img.write(reinterpret_cast<const char*>(im.data()), im.size());
  detail::write_be32(lab, kIdxLabelMagic);
  detail::write_be32(lab, static_cast<std::uint32_t>(labels.size()));
  lab.write(reinterpret_cast<const char*>(labels.data()), labels.size());
}

/// Exactly `per_class` images of every label present, picked by a seeded
/// shuffle. Pixels are scaled to [0, 1] and flattened row by row; samples
/// keep their file order.
inline LabeledDataset load_idx_subset(const std::filesystem::path& images_path,
                                      const std::filesystem::path& labels_path, std::size_t per_class,
                                      std::uint64_t seed) {
  const IdxImages images = read_idx_images(images_path);
  const std::vector<std::uint8_t> labels = read_idx_labels(labels_path);
  if (images.images.size() != labels.size())
    throw FormatError("image count " + std::to_string(images.images.size()) + " != label count " +
                      std::to_string(labels.size()));

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  for (auto& [label, idx] : by_class) {
    if (idx.size() < per_class)
      throw InvalidInput("class " + std::to_string(label) + " has only " + std::to_string(idx.size()) +
                         " images, " + std::to_string(per_class) + " requested");
    rng.shuffle(idx);
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(per_class));
  }
  std::sort(chosen.begin(), chosen.end());

  LabeledDataset ds;
  for (std::size_t i : chosen) {
    Vector x(images.images[i].size());
    std::transform(images.images[i].begin(), images.images[i].end(), x.begin(),
                   [](std::uint8_t p) { return p / 255.0; });
    ds.features.push_back(std::move(x));
    ds.labels.push_back(labels[i]);
  }
  return ds;
}

// ---- pairs -----------------------------------------------------------------

/// All unordered pairs i < j with pair labels and lambda-interpolated targets.
inline std::vector<PairTarget> enumerate_pairs(const LabeledDataset& ds, double lambda) {
  check_lambda(lambda);
  if (ds.empty()) throw InvalidInput("enumerate_pairs: empty dataset");
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (!(norm(ds.features[i]) > kNormEpsilon)) throw DegenerateVector(i);
  std::vector<PairTarget> pairs;
  pairs.reserve(ds.size() * (ds.size() - 1) / 2);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = i + 1; j < ds.size(); ++j) {
      const bool same = ds.labels[i] == ds.labels[j];
      pairs.push_back({i, j, same ? PairLabel::Positive : PairLabel::Negative,
                       gdt_target(ds.features[i], ds.features[j], same, lambda)});
    }
  }
  return pairs;
}

/// A labelled pair of raw feature vectors for verification.
struct VerificationPair {
  Vector a;
  Vector b;
  PairLabel label;
};

/// Random distinct-index positive and negative pairs drawn from `ds`.
inline std::vector<VerificationPair> sample_verification_pairs(const LabeledDataset& ds, std::size_t positives,
                                                               std::size_t negatives, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
  std::vector<int> pos_classes;
  for (const auto& [label, idx] : by_class)
    if (idx.size() >= 2) pos_classes.push_back(label);
  if (positives > 0 && pos_classes.empty()) throw InvalidInput("no class has two samples");
  if (negatives > 0 && by_class.size() < 2) throw InvalidInput("need two classes for negative pairs");

  Rng rng(seed);
  std::vector<VerificationPair> out;
  out.reserve(positives + negatives);
  for (std::size_t k = 0; k < positives; ++k) {
    const auto& idx = by_class[pos_classes[rng.below(pos_classes.size())]];
    const std::size_t a = rng.below(idx.size());
    std::size_t b = rng.below(idx.size() - 1);
    if (b >= a) ++b;
    out.push_back({ds.features[idx[a]], ds.features[idx[b]], PairLabel::Positive});
  }
  for (std::size_t k = 0; k < negatives; ++k) {
    std::size_t a = rng.below(ds.size());
    std::size_t b = rng.below(ds.size());
    while (ds.labels[a] == ds.labels[b]) b = rng.below(ds.size());
    out.push_back({ds.features[a], ds.features[b], PairLabel::Negative});
  }
  return out;
}

}  // namespace gdt
