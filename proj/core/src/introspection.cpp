// Copyright 2026 The hlmtc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hlmtc/introspection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "hlmtc/archive.hpp"
#include "hlmtc/error.hpp"

namespace hlmtc {
namespace {

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void check_layer(const LayerActivation& a, int layer) {
  if (layer < 1 || static_cast<std::size_t>(layer) > a.attentions.size()) {
    fail(Errc::kOutOfRange, "layer " + std::to_string(layer) + " outside 1.." +
                                std::to_string(a.attentions.size()));
  }
}

void normalize_in_place(std::vector<double>& p) {
  double total = 0.0;
  for (double x : p) total += x;
  if (!(total > 0.0)) fail(Errc::kInvalidArgument, "attention mass is zero");
  for (double& x : p) x /= total;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::kIo, "cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

double angular_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) fail(Errc::kShapeMismatch, "angular_distance: length mismatch");
  // Half-angle form: equals acos(u.v) for unit vectors but keeps full
  // precision near 0 and pi, where acos loses about half the digits.
  double diff = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    diff += (u[i] - v[i]) * (u[i] - v[i]);
    sum += (u[i] + v[i]) * (u[i] + v[i]);
  }
  return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum)) / std::numbers::pi;
}

std::vector<double> unit_normalize(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    fail(Errc::kInvalidArgument, "cannot normalize a zero-norm vector");
  }
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

ClsSnapshot ClsSnapshot::from_activations(std::span<const LayerActivation> activations) {
  ClsSnapshot s;
  for (const auto& a : activations) {
    std::vector<std::vector<double>> layers;
    for (const auto& c : a.cls_vectors) layers.push_back(unit_normalize(c));
    if (!s.vectors.empty() && layers.size() != s.layers()) {
      fail(Errc::kShapeMismatch, "documents have different layer counts");
    }
    s.vectors.push_back(std::move(layers));
  }
  return s;
}

Tensor cls_distance_matrix(const ClsSnapshot& snapshot) {
  if (snapshot.vectors.empty() || snapshot.layers() == 0) {
    fail(Errc::kInvalidArgument, "cls_distance_matrix: empty snapshot");
  }
  const std::size_t n = snapshot.layers();
  Tensor m({n, n}, 0.0);
  for (const auto& doc : snapshot.vectors) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = angular_distance(doc[i], doc[j]);
        m.at(i, j) += d;
        m.at(j, i) += d;
      }
    }
  }
  const double count = static_cast<double>(snapshot.vectors.size());
  for (double& x : m.data()) x /= count;
  return m;
}

double mean_off_diagonal(const Tensor& matrix) {
  if (matrix.rank() != 2 || matrix.rows() != matrix.cols() || matrix.rows() < 2) {
    fail(Errc::kShapeMismatch, "mean_off_diagonal needs a square matrix of size >= 2");
  }
  const std::size_t n = matrix.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) total += matrix.at(i, j);
    }
  }
  return total / static_cast<double>(n * (n - 1));
}

std::string_view reduction_name(Reduction r) {
  return r == Reduction::kAllQueries ? "all-queries" : "cls-query";
}

Reduction parse_reduction(std::string_view text) {
  if (text == "all-queries") return Reduction::kAllQueries;
  if (text == "cls-query") return Reduction::kClsQuery;
  fail(Errc::kInvalidArgument,
       "unknown reduction '" + std::string(text) + "'; valid: all-queries, cls-query");
}

std::vector<double> head_distribution(const LayerActivation& activation, int layer,
                                      std::size_t head, Reduction reduction) {
  check_layer(activation, layer);
  const auto& heads = activation.attentions[static_cast<std::size_t>(layer - 1)];
  if (head >= heads.size()) {
    fail(Errc::kOutOfRange, "head " + std::to_string(head) + " outside 0.." +
                                std::to_string(heads.size()));
  }
  const Tensor& a = heads[head];
  const std::size_t len = a.cols();
  std::vector<std::uint8_t> mask = activation.sequence_mask;
  if (mask.empty()) mask.assign(len, 1);
  if (mask.size() != len || a.rows() != len) {
    fail(Errc::kShapeMismatch, "attention matrix does not match the sequence mask");
  }
  std::vector<double> p;
  for (std::size_t k = 0; k < len; ++k) {
    if (!mask[k]) continue;
    double mass = 0.0;
    if (reduction == Reduction::kClsQuery) {
      mass = a.at(0, k);
    } else {
      for (std::size_t q = 0; q < len; ++q) {
        if (mask[q]) mass += a.at(q, k);
      }
    }
    p.push_back(mass);
  }
  normalize_in_place(p);
  return p;
}

std::vector<double> attention_distribution(const LayerActivation& activation, int layer,
                                           Reduction reduction) {
  check_layer(activation, layer);
  const std::size_t heads = activation.attentions[static_cast<std::size_t>(layer - 1)].size();
  std::vector<double> avg;
  for (std::size_t h = 0; h < heads; ++h) {
    const auto p = head_distribution(activation, layer, h, reduction);
    if (avg.empty()) avg.assign(p.size(), 0.0);
    for (std::size_t k = 0; k < p.size(); ++k) avg[k] += p[k];
  }
  for (double& x : avg) x /= static_cast<double>(heads);
  normalize_in_place(avg);
  return avg;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p) {
    if (x < 0.0 || !std::isfinite(x)) fail(Errc::kInvalidArgument, "entropy: negative or non-finite entry");
    if (x > 0.0) h -= x * std::log(x);
  }
  return std::max(h, 0.0);
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) {
    fail(Errc::kShapeMismatch, "kl_divergence: supports of size " + std::to_string(p.size()) +
                                   " and " + std::to_string(q.size()));
  }
  double q_total = 0.0;
  for (double x : q) {
    if (x < 0.0) fail(Errc::kInvalidArgument, "kl_divergence: negative entry");
    q_total += x + kKlSmoothing;
  }
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] < 0.0) fail(Errc::kInvalidArgument, "kl_divergence: negative entry");
    if (p[k] == 0.0) continue;
    const double qk = (q[k] + kKlSmoothing) / q_total;
    kl += p[k] * std::log(p[k] / qk);
  }
  return kl;
}

AttentionProfile attention_profile(const LayerActivation& activation, Reduction reduction) {
  AttentionProfile profile;
  for (std::size_t l = 0; l < activation.attentions.size(); ++l) {
    const int layer = static_cast<int>(l + 1);
    std::vector<std::vector<double>> heads;
    for (std::size_t h = 0; h < activation.attentions[l].size(); ++h) {
      heads.push_back(head_distribution(activation, layer, h, reduction));
    }
    std::vector<double> avg(heads.front().size(), 0.0);
    for (const auto& p : heads) {
      for (std::size_t k = 0; k < p.size(); ++k) avg[k] += p[k];
    }
    for (double& x : avg) x /= static_cast<double>(heads.size());
    normalize_in_place(avg);
    profile.layers.push_back(std::move(avg));
    profile.heads.push_back(std::move(heads));
  }
  return profile;
}

Tensor layer_kl_matrix(std::span<const AttentionProfile> profiles) {
  if (profiles.empty() || profiles.front().layers.empty()) {
    fail(Errc::kInvalidArgument, "layer_kl_matrix: no documents");
  }
  const std::size_t n = profiles.front().layers.size();
  Tensor m({n, n}, 0.0);
  for (const auto& prof : profiles) {
    if (prof.layers.size() != n) fail(Errc::kShapeMismatch, "documents have different layer counts");
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) m.at(i, j) += kl_divergence(prof.layers[i], prof.layers[j]);
      }
    }
  }
  const double count = static_cast<double>(profiles.size());
  for (double& x : m.data()) x /= count;
  return m;
}

double head_pair_kl(const AttentionProfile& profile, int layer) {
  if (layer < 1 || static_cast<std::size_t>(layer) > profile.heads.size()) {
    fail(Errc::kOutOfRange, "layer " + std::to_string(layer) + " outside the profile");
  }
  const auto& heads = profile.heads[static_cast<std::size_t>(layer - 1)];
  if (heads.size() < 2) fail(Errc::kInvalidArgument, "head_pair_kl needs at least two heads");
  double total = 0.0;
  for (std::size_t i = 0; i < heads.size(); ++i) {
    for (std::size_t j = 0; j < heads.size(); ++j) {
      if (i != j) total += kl_divergence(heads[i], heads[j]);
    }
  }
  return total / static_cast<double>(heads.size() * (heads.size() - 1));
}

double head_pair_kl(const LayerActivation& activation, int layer, Reduction reduction) {
  return head_pair_kl(attention_profile(activation, reduction), layer);
}

UtilizationReport analyze_utilization(std::span<const LayerActivation> activations,
                                      Reduction reduction) {
  if (activations.empty()) fail(Errc::kInvalidArgument, "analysis needs at least one document");
  UtilizationReport r;
  r.reduction = reduction;
  r.documents = activations.size();
  r.angular = cls_distance_matrix(ClsSnapshot::from_activations(activations));

  std::vector<AttentionProfile> profiles;
  for (const auto& a : activations) profiles.push_back(attention_profile(a, reduction));
  r.kl = layer_kl_matrix(profiles);

  const std::size_t layers = profiles.front().layers.size();
  r.entropy.assign(layers, 0.0);
  r.head_pair_kl.assign(layers, 0.0);
  const bool multi_head = profiles.front().heads.front().size() >= 2;
  for (const auto& p : profiles) {
    for (std::size_t l = 0; l < layers; ++l) {
      r.entropy[l] += entropy(p.layers[l]);
      if (multi_head) r.head_pair_kl[l] += head_pair_kl(p, static_cast<int>(l + 1));
    }
  }
  const double count = static_cast<double>(profiles.size());
  for (double& x : r.entropy) x /= count;
  for (double& x : r.head_pair_kl) x /= count;
  r.mean_off_diagonal_angular = layers >= 2 ? mean_off_diagonal(r.angular) : 0.0;
  return r;
}

void write_matrix_csv(std::ostream& out, const Tensor& matrix) {
  const std::size_t n = matrix.rows();
  out << "layer";
  for (std::size_t j = 0; j < matrix.cols(); ++j) out << ',' << j + 1;
  out << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << i + 1;
    for (std::size_t j = 0; j < matrix.cols(); ++j) out << ',' << g17(matrix.at(i, j));
    out << '\n';
  }
}

std::string heatmap_svg(const Tensor& matrix, std::string_view title) {
  constexpr int kCell = 40;
  constexpr int kMargin = 48;
  const std::size_t rows = matrix.rows();
  const std::size_t cols = matrix.cols();
  const int width = kMargin + static_cast<int>(cols) * kCell + 16;
  const int height = kMargin + static_cast<int>(rows) * kCell + 16;

  double lo = 0.0, hi = 0.0;
  if (!matrix.empty()) {
    const auto [mn, mx] = std::minmax_element(matrix.data().begin(), matrix.data().end());
    lo = *mn;
    hi = *mx;
  }
  // White (255,255,255) at the minimum to #08306b (8,48,107) at the maximum.
  auto colour = [&](double v, double* t_out) {
    const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
    *t_out = t;
    const auto mix = [t](int a, int b) {
      return static_cast<int>(std::lround(a + (b - a) * t));
    };
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mix(255, 8), mix(255, 48), mix(255, 107));
    return std::string(buf);
  };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
    << height << "\" font-family=\"sans-serif\">\n";
  s << "<!-- scale: linear, white=" << g17(lo) << " to #08306b=" << g17(hi) << " -->\n";
  s << "<text x=\"" << kMargin << "\" y=\"16\" font-size=\"12\">" << title << "</text>\n";
  for (std::size_t j = 0; j < cols; ++j) {
    s << "<text x=\"" << kMargin + static_cast<int>(j) * kCell + kCell / 2 << "\" y=\""
      << kMargin - 6 << "\" font-size=\"10\" text-anchor=\"middle\">" << j + 1 << "</text>\n";
  }
  for (std::size_t i = 0; i < rows; ++i) {
    const int y = kMargin + static_cast<int>(i) * kCell;
    s << "<text x=\"" << kMargin - 6 << "\" y=\"" << y + kCell / 2 + 4
      << "\" font-size=\"10\" text-anchor=\"end\">" << i + 1 << "</text>\n";
    for (std::size_t j = 0; j < cols; ++j) {
      const int x = kMargin + static_cast<int>(j) * kCell;
      double t = 0.0;
      const std::string fill = colour(matrix.at(i, j), &t);
      s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell << "\" height=\""
        << kCell << "\" fill=\"" << fill << "\" stroke=\"#cccccc\"/>\n";
      s << "<text x=\"" << x + kCell / 2 << "\" y=\"" << y + kCell / 2 + 3
        << "\" font-size=\"9\" text-anchor=\"middle\" fill=\"" << (t > 0.5 ? "#ffffff" : "#000000")
        << "\">" << f2(matrix.at(i, j)) << "</text>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

void emit_report(const UtilizationReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(Errc::kIo, "cannot create '" + out_dir.string() + "': " + ec.message());
  const std::string mode(reduction_name(report.reduction));

  {
    auto out = open_out(out_dir / "angular_distance.csv");
    write_matrix_csv(out, report.angular);
  }
  {
    auto out = open_out(out_dir / "kl_divergence.csv");
    write_matrix_csv(out, report.kl);
  }
  {
    auto out = open_out(out_dir / "angular_distance.svg");
    out << heatmap_svg(report.angular, "CLS angular distance between layers");
  }
  {
    auto out = open_out(out_dir / "kl_divergence.svg");
    out << heatmap_svg(report.kl, "KL divergence of attention between layers (reduction: " +
                                      mode + ")");
  }
  {
    auto out = open_out(out_dir / "attention_table.tsv");
    out << "# reduction: " << mode << "; units: nats; documents: " << report.documents << '\n';
    out << "layer\tentropy\thead_pair_kl\n";
    for (std::size_t l = 0; l < report.entropy.size(); ++l) {
      out << l + 1 << '\t' << g17(report.entropy[l]) << '\t' << g17(report.head_pair_kl[l]) << '\n';
    }
  }
  {
    auto out = open_out(out_dir / "summary.tsv");
    out << "key\tvalue\n";
    out << "reduction\t" << mode << '\n';
    out << "documents\t" << report.documents << '\n';
    out << "layers\t" << report.entropy.size() << '\n';
    out << "mean_off_diagonal_angular\t" << g17(report.mean_off_diagonal_angular) << '\n';
  }
}

namespace {
constexpr std::string_view kSnapshotKind = "hlmtc-snapshot";
}  // namespace

void save_snapshot(const std::filesystem::path& path, const ActivationSnapshot& snapshot) {
  if (snapshot.doc_ids.size() != snapshot.activations.size()) {
    fail(Errc::kShapeMismatch, "snapshot ids and activations differ in length");
  }
  Archive archive;
  nlohmann::json docs = nlohmann::json::array();
  for (std::size_t d = 0; d < snapshot.activations.size(); ++d) {
    const auto& a = snapshot.activations[d];
    const std::size_t layers = a.cls_vectors.size();
    const std::size_t hidden = layers ? a.cls_vectors.front().size() : 0;
    const std::size_t heads = a.attentions.empty() ? 0 : a.attentions.front().size();
    const std::size_t len = a.sequence_mask.size();
    docs.push_back({{"id", snapshot.doc_ids[d]}, {"layers", layers}, {"hidden", hidden},
                    {"heads", heads}, {"length", len}});
    const std::string base = "doc." + std::to_string(d);
    std::vector<double> cls;
    for (const auto& c : a.cls_vectors) cls.insert(cls.end(), c.begin(), c.end());
    archive.arrays.emplace_back(base + ".cls", Tensor({layers, hidden}, std::move(cls)));
    std::vector<double> att;
    for (const auto& layer : a.attentions) {
      for (const auto& h : layer) att.insert(att.end(), h.data().begin(), h.data().end());
    }
    archive.arrays.emplace_back(base + ".attention",
                                Tensor({layers, heads, len, len}, std::move(att)));
    std::vector<double> mask(a.sequence_mask.begin(), a.sequence_mask.end());
    archive.arrays.emplace_back(base + ".mask", Tensor({len}, std::move(mask)));
  }
  archive.meta = {{"kind", kSnapshotKind}, {"documents", docs}};
  write_archive(path, archive);
}

ActivationSnapshot load_snapshot(const std::filesystem::path& path) {
  const Archive archive = read_archive(path);
  if (archive.meta.value("kind", "") != kSnapshotKind) {
    fail(Errc::kFormat, "'" + path.string() + "' is not an activation snapshot");
  }
  ActivationSnapshot out;
  const auto& docs = archive.meta.at("documents");
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto& meta = docs[d];
    const auto layers = meta.at("layers").get<std::size_t>();
    const auto hidden = meta.at("hidden").get<std::size_t>();
    const auto heads = meta.at("heads").get<std::size_t>();
    const auto len = meta.at("length").get<std::size_t>();
    const std::string base = "doc." + std::to_string(d);
    LayerActivation a;
    const Tensor& cls = archive.array(base + ".cls");
    for (std::size_t l = 0; l < layers; ++l) {
      const auto row = cls.data().subspan(l * hidden, hidden);
      a.cls_vectors.emplace_back(row.begin(), row.end());
    }
    const Tensor& att = archive.array(base + ".attention");
    for (std::size_t l = 0; l < layers; ++l) {
      std::vector<Tensor> per_head;
      for (std::size_t h = 0; h < heads; ++h) {
        const auto block = att.data().subspan((l * heads + h) * len * len, len * len);
        per_head.emplace_back(Shape{len, len}, std::vector<double>(block.begin(), block.end()));
      }
      a.attentions.push_back(std::move(per_head));
    }
    for (double m : archive.array(base + ".mask").data()) {
      a.sequence_mask.push_back(static_cast<std::uint8_t>(m != 0.0));
    }
    out.doc_ids.push_back(meta.at("id").get<std::string>());
    out.activations.push_back(std::move(a));
  }
  return out;
}

}  // namespace hlmtc
