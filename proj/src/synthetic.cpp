#include "wmg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wmg/error.hpp"
#include "wmg/rng.hpp"

namespace wmg {

namespace {

constexpr int kFieldKernels = 8;
constexpr double kSubjectGainMean = 0.15;
constexpr double kSubjectGainStd = 0.05;

std::string cluster_name(int i) {
  std::string digits = std::to_string(i);
  return "cluster_" + std::string(digits.size() < 3 ? 3 - digits.size() : 0, '0') + digits;
}

std::string subject_name(int i) {
  std::string digits = std::to_string(i);
  return "sub_" + std::string(digits.size() < 4 ? 4 - digits.size() : 0, '0') + digits;
}

Point3 random_unit(Rng& rng) {
  Point3 v(rng.normal(), rng.normal(), rng.normal());
  while (v.norm() < 1e-12) v = Point3(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

}  // namespace

void SynthConfig::validate() const {
  if (n_subjects <= 0 || n_clusters <= 0 || streamlines_per_cluster <= 0 ||
      points_per_streamline < 2)
    throw ArgumentError("synthetic counts must be positive (points_per_streamline >= 2)");
  if (!(spatial_scale > 0.0) || !(value_smoothness > 0.0) || noise_std < 0.0)
    throw ArgumentError("synthetic scales must be positive and noise_std non-negative");
  auto rate = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!rate(fragile_missing_rate) || !rate(background_missing_rate) || !rate(noise_nugget))
    throw ArgumentError("synthetic rates must lie in [0, 1]");
  if (n_fragile_clusters < 0 || n_fragile_clusters > n_clusters)
    throw ArgumentError("n_fragile_clusters must lie in [0, n_clusters]");
  if (label_sparsity < 1 || label_sparsity > n_clusters)
    throw ArgumentError("label_sparsity must lie in [1, n_clusters]");
}

Atlas gen_atlas(const SynthConfig& cfg) {
  cfg.validate();
  auto rng = Rng::stream(cfg.seed, "synth-atlas");
  const double s = cfg.spatial_scale;
  Atlas atlas;
  atlas.clusters.reserve(static_cast<std::size_t>(cfg.n_clusters));
  for (int c = 0; c < cfg.n_clusters; ++c) {
    const Point3 centroid(rng.uniform(0, s), rng.uniform(0, s), rng.uniform(0, s));
    const Point3 dir = random_unit(rng);
    Point3 bend = random_unit(rng);
    bend = (bend - bend.dot(dir) * dir);
    if (bend.norm() < 1e-9) bend = dir.unitOrthogonal();
    bend.normalize();
    const double half_length = s * rng.uniform(0.08, 0.15);
    const double curvature = half_length * rng.uniform(0.1, 0.3);

    FiberCluster cluster;
    cluster.id = cluster_name(c);
    for (int k = 0; k < cfg.streamlines_per_cluster; ++k) {
      const Point3 jitter(rng.normal(0, 0.02 * s), rng.normal(0, 0.02 * s),
                          rng.normal(0, 0.02 * s));
      const double stretch = rng.uniform(0.9, 1.1);
      Streamline line;
      for (int i = 0; i < cfg.points_per_streamline; ++i) {
        const double u = -1.0 + 2.0 * i / (cfg.points_per_streamline - 1);
        line.points.push_back(centroid + jitter + (u * half_length * stretch) * dir +
                              (curvature * (u * u - 1.0 / 3.0)) * bend);
      }
      cluster.streamlines.push_back(std::move(line));
    }
    atlas.clusters.push_back(std::move(cluster));
  }
  return atlas;
}

std::vector<Point3> cluster_centroids(const Atlas& atlas) {
  std::vector<Point3> out;
  out.reserve(atlas.size());
  for (const auto& c : atlas.clusters) {
    Point3 sum = Point3::Zero();
    std::size_t n = 0;
    for (const auto& s : c.streamlines)
      for (const auto& p : s.points) {
        sum += p;
        ++n;
      }
    out.push_back(n > 0 ? Point3(sum / static_cast<double>(n)) : Point3(Point3::Zero()));
  }
  return out;
}

SyntheticFeatures gen_features(const Atlas& atlas, const SynthConfig& cfg) {
  cfg.validate();
  const auto centroids = cluster_centroids(atlas);
  const auto c = static_cast<Eigen::Index>(centroids.size());
  const auto n = static_cast<Eigen::Index>(cfg.n_subjects);
  const double ell = cfg.value_smoothness;

  // Shared field f, rescaled to zero mean and unit spread across clusters.
  auto field_rng = Rng::stream(cfg.seed, "synth-field");
  std::vector<Point3> centers;
  std::vector<double> weights;
  const double s = cfg.spatial_scale;
  for (int k = 0; k < kFieldKernels; ++k) {
    centers.emplace_back(field_rng.uniform(0, s), field_rng.uniform(0, s), field_rng.uniform(0, s));
    weights.push_back(field_rng.normal());
  }
  Eigen::VectorXd f(c);
  for (Eigen::Index j = 0; j < c; ++j) {
    double v = 0.0;
    for (int k = 0; k < kFieldKernels; ++k)
      v += weights[static_cast<std::size_t>(k)] *
           std::exp(-(centroids[static_cast<std::size_t>(j)] - centers[static_cast<std::size_t>(k)])
                         .squaredNorm() /
                    (2 * ell * ell));
    f(j) = v;
  }
  if (c > 1) {
    f.array() -= f.mean();
    const double sd = std::sqrt(f.squaredNorm() / static_cast<double>(c - 1));
    if (sd > 0.0) f /= sd;
  }

  // Correlation of the per-subject noise field.
  Eigen::MatrixXd corr(c, c);
  for (Eigen::Index i = 0; i < c; ++i)
    for (Eigen::Index j = 0; j < c; ++j) {
      const double d2 =
          (centroids[static_cast<std::size_t>(i)] - centroids[static_cast<std::size_t>(j)]).squaredNorm();
      corr(i, j) = (1.0 - cfg.noise_nugget) * std::exp(-d2 / (2 * ell * ell)) +
                   (i == j ? cfg.noise_nugget : 0.0);
    }
  corr.diagonal().array() += 1e-9;
  const Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success) throw NumericError("noise correlation is not positive definite");
  const Eigen::MatrixXd chol = llt.matrixL();

  Eigen::MatrixXd values(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto rng = Rng::stream(cfg.seed, "synth-subject", static_cast<std::uint64_t>(i));
    const double gain = rng.normal(kSubjectGainMean, kSubjectGainStd);
    Eigen::VectorXd z(c);
    for (Eigen::Index j = 0; j < c; ++j) z(j) = rng.normal();
    const Eigen::VectorXd eta = cfg.noise_std * (chol * z);
    for (Eigen::Index j = 0; j < c; ++j)
      values(i, j) = std::clamp(0.5 + gain * f(j) + eta(j), 0.0, 1.0);
  }

  std::vector<std::string> subjects;
  for (int i = 0; i < cfg.n_subjects; ++i) subjects.push_back(subject_name(i));

  SyntheticFeatures out{FeatureTable::fully_observed(subjects, atlas.cluster_ids(), values),
                        LabelSet{subjects, {}}, {}};

  auto label_rng = Rng::stream(cfg.seed, "synth-labels");
  std::vector<std::size_t> order(static_cast<std::size_t>(c));
  std::iota(order.begin(), order.end(), 0);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(cfg.label_sparsity), order.size());
  label_rng.partial_shuffle(order, k);
  out.label_clusters.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(out.label_clusters.begin(), out.label_clusters.end());

  Eigen::VectorXd score = Eigen::VectorXd::Zero(n);
  for (const auto j : out.label_clusters) {
    const auto col = values.col(static_cast<Eigen::Index>(j));
    const double mu = col.mean();
    const double sd = n > 1 ? std::sqrt((col.array() - mu).square().sum() / static_cast<double>(n - 1)) : 0.0;
    if (sd > 0.0) score += ((col.array() - mu) / sd).matrix();
  }
  score /= std::sqrt(static_cast<double>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-cfg.label_strength * score(i)));
    out.labels.labels.push_back(label_rng.uniform() < p ? 1 : 0);
  }
  return out;
}

std::vector<std::size_t> fragile_clusters(const SynthConfig& cfg, std::size_t n_clusters) {
  std::vector<std::size_t> order(n_clusters);
  std::iota(order.begin(), order.end(), 0);
  auto rng = Rng::stream(cfg.seed, "synth-fragile");
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(cfg.n_fragile_clusters), n_clusters);
  rng.partial_shuffle(order, k);
  std::vector<std::size_t> out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(out.begin(), out.end());
  return out;
}

FeatureTable inject_structured_missing(const FeatureTable& truth, const SynthConfig& cfg) {
  cfg.validate();
  const auto fragile = fragile_clusters(cfg, static_cast<std::size_t>(truth.cols()));
  std::vector<char> is_fragile(static_cast<std::size_t>(truth.cols()), 0);
  for (const auto j : fragile) is_fragile[j] = 1;
  FeatureTable out = truth;
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    auto rng = Rng::stream(cfg.seed, "synth-missing", static_cast<std::uint64_t>(i));
    for (Eigen::Index j = 0; j < truth.cols(); ++j) {
      const double rate = is_fragile[static_cast<std::size_t>(j)] != 0 ? cfg.fragile_missing_rate
                                                                        : cfg.background_missing_rate;
      if (rng.uniform() < rate) out.set_missing(i, j);
    }
  }
  return out;
}

SyntheticDataset generate_dataset(const SynthConfig& cfg) {
  SyntheticDataset ds;
  ds.atlas = gen_atlas(cfg);
  auto features = gen_features(ds.atlas, cfg);
  ds.truth = std::move(features.truth);
  ds.labels = std::move(features.labels);
  ds.corrupted = inject_structured_missing(ds.truth, cfg);
  ds.fragile = fragile_clusters(cfg, ds.atlas.size());
  return ds;
}

}  // namespace wmg
