#include "wmg/atlas_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "json.hpp"

#include "wmg/error.hpp"
#include "wmg/feature_table.hpp"
#include "wmg/parallel.hpp"

namespace wmg {

using nlohmann::json;

double Streamline::length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) total += (points[i] - points[i - 1]).norm();
  return total;
}

std::vector<std::string> Atlas::cluster_ids() const {
  std::vector<std::string> ids;
  ids.reserve(clusters.size());
  for (const auto& c : clusters) ids.push_back(c.id);
  return ids;
}

void Atlas::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& c : clusters) {
    if (!seen.insert(c.id).second) throw ValidationError("duplicate cluster id '" + c.id + "'");
    if (c.streamlines.empty()) throw ValidationError("cluster '" + c.id + "' has no streamlines");
    for (const auto& s : c.streamlines) {
      if (s.size() < 2)
        throw ValidationError("cluster '" + c.id + "' has a streamline with fewer than 2 points");
      for (const auto& p : s.points)
        if (!p.allFinite())
          throw ValidationError("cluster '" + c.id + "' has a non-finite coordinate");
    }
  }
}

Streamline resample_streamline(const Streamline& s, std::size_t m) {
  if (m < 2) throw ArgumentError("resample point count must be at least 2");
  if (s.points.empty()) throw ArgumentError("cannot resample an empty streamline");

  const std::size_t n = s.points.size();
  std::vector<double> cum(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) cum[i] = cum[i - 1] + (s.points[i] - s.points[i - 1]).norm();
  const double total = cum.back();

  Streamline out;
  out.points.reserve(m);
  if (total <= 0.0) {
    out.points.assign(m, s.points.front());
    return out;
  }
  out.points.push_back(s.points.front());
  std::size_t seg = 1;
  for (std::size_t k = 1; k + 1 < m; ++k) {
    const double target = total * static_cast<double>(k) / static_cast<double>(m - 1);
    while (seg + 1 < n && cum[seg] < target) ++seg;
    const double seg_len = cum[seg] - cum[seg - 1];
    const double frac = seg_len > 0.0 ? (target - cum[seg - 1]) / seg_len : 0.0;
    out.points.push_back(s.points[seg - 1] + frac * (s.points[seg] - s.points[seg - 1]));
  }
  out.points.push_back(s.points.back());
  return out;
}

double mdf_distance(const Streamline& a, const Streamline& b) {
  if (a.size() != b.size())
    throw ArgumentError("MDF distance needs equal point counts (" + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()) + ")");
  if (a.size() == 0) throw ArgumentError("MDF distance of empty streamlines");
  const std::size_t m = a.size();
  double direct = 0.0;
  double flipped = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    direct += (a.points[i] - b.points[i]).norm();
    flipped += (a.points[i] - b.points[m - 1 - i]).norm();
  }
  return std::min(direct, flipped) / static_cast<double>(m);
}

namespace {

std::vector<Streamline> resample_cluster(const FiberCluster& c, std::size_t m) {
  if (c.streamlines.empty())
    throw ArgumentError("cluster '" + c.id + "' has no streamlines");
  std::vector<Streamline> out;
  out.reserve(c.streamlines.size());
  for (const auto& s : c.streamlines) out.push_back(resample_streamline(s, m));
  return out;
}

double aggregate_distance(const std::vector<Streamline>& a, const std::vector<Streamline>& b,
                          ClusterAggregate aggregate) {
  double best = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const auto& s : a) {
    for (const auto& t : b) {
      const double d = mdf_distance(s, t);
      best = std::min(best, d);
      sum += d;
    }
  }
  if (aggregate == ClusterAggregate::min) return best;
  return sum / static_cast<double>(a.size() * b.size());
}

}  // namespace

double cluster_distance(const FiberCluster& a, const FiberCluster& b, std::size_t m,
                        ClusterAggregate aggregate) {
  return aggregate_distance(resample_cluster(a, m), resample_cluster(b, m), aggregate);
}

DistanceMatrix pairwise_distances(const Atlas& atlas, std::size_t m, ClusterAggregate aggregate) {
  const std::size_t c = atlas.size();
  std::vector<std::vector<Streamline>> resampled(c);
  parallel_for(c, [&](std::size_t i) { resampled[i] = resample_cluster(atlas.clusters[i], m); });

  DistanceMatrix out{atlas.cluster_ids(), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(c),
                                                               static_cast<Eigen::Index>(c))};
  parallel_for(c, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < c; ++j)
      out.d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          aggregate_distance(resampled[i], resampled[j], aggregate);
  });
  // Diagonal stays zero under both aggregates.
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < i; ++j)
      out.d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          out.d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
  return out;
}

std::vector<std::size_t> rank_by_distance(const DistanceMatrix& dist,
                                          const std::vector<std::size_t>& targets,
                                          const std::vector<std::size_t>& candidates,
                                          RankOrder order) {
  if (targets.empty() || candidates.empty())
    throw ArgumentError("rank_by_distance needs non-empty targets and candidates");
  const std::unordered_set<std::size_t> target_set(targets.begin(), targets.end());
  for (const auto c : candidates) {
    if (target_set.count(c) != 0)
      throw ArgumentError("cluster " + std::to_string(c) + " is both target and candidate");
    if (c >= dist.size()) throw ArgumentError("candidate index out of range");
  }
  for (const auto t : targets)
    if (t >= dist.size()) throw ArgumentError("target index out of range");

  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(candidates.size());
  for (const auto c : candidates) {
    double score = std::numeric_limits<double>::infinity();
    for (const auto t : targets) score = std::min(score, dist(c, t));
    scored.emplace_back(score, c);
  }
  if (order == RankOrder::nearest_first) {
    std::sort(scored.begin(), scored.end());
  } else {
    std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
      return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
  }
  std::vector<std::size_t> out;
  out.reserve(scored.size());
  for (const auto& [score, idx] : scored) out.push_back(idx);
  return out;
}

Atlas parse_atlas_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("atlas JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ValidationError("atlas JSON must be an array of clusters");
  Atlas atlas;
  try {
    for (const auto& jc : doc) {
      FiberCluster c;
      c.id = jc.at("id").get<std::string>();
      for (const auto& js : jc.at("streamlines")) {
        Streamline s;
        for (const auto& jp : js) {
          if (!jp.is_array() || jp.size() != 3)
            throw ValidationError("cluster '" + c.id + "': points must be [x,y,z]");
          s.points.emplace_back(jp[0].get<double>(), jp[1].get<double>(), jp[2].get<double>());
        }
        c.streamlines.push_back(std::move(s));
      }
      atlas.clusters.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("atlas JSON: ") + e.what());
  }
  atlas.validate();
  return atlas;
}

std::string format_atlas_json(const Atlas& atlas) {
  json doc = json::array();
  for (const auto& c : atlas.clusters) {
    json js = json::array();
    for (const auto& s : c.streamlines) {
      json pts = json::array();
      for (const auto& p : s.points) pts.push_back({p.x(), p.y(), p.z()});
      js.push_back(std::move(pts));
    }
    doc.push_back({{"id", c.id}, {"streamlines", std::move(js)}});
  }
  return doc.dump() + "\n";
}

Atlas load_atlas(const std::filesystem::path& path) {
  return parse_atlas_json(read_text_file(path));
}

void save_atlas(const Atlas& atlas, const std::filesystem::path& path) {
  write_text_file(path, format_atlas_json(atlas));
}

DistanceMatrix parse_distance_csv(const std::string& text) {
  // The table parser accepts the same shape; the corner cell is renamed.
  const auto nl = text.find('\n');
  const std::string header = text.substr(0, nl);
  if (header.rfind("cluster_id", 0) != 0)
    throw ParseError("first header cell must be 'cluster_id'", 1);
  const std::string rest = nl == std::string::npos ? std::string() : text.substr(nl);
  const auto table = parse_feature_table("subject_id" + header.substr(10) + rest);
  if (table.subject_ids() != table.cluster_ids())
    throw ValidationError("distance matrix row ids must equal its column ids");
  if (table.missing_count() != 0) throw ValidationError("distance matrix has empty cells");
  DistanceMatrix out{table.cluster_ids(), table.values()};
  for (Eigen::Index i = 0; i < out.d.rows(); ++i) {
    if (out.d(i, i) != 0.0) throw ValidationError("distance matrix diagonal must be zero");
    for (Eigen::Index j = 0; j < out.d.cols(); ++j) {
      if (out.d(i, j) < 0.0) throw ValidationError("distance matrix has a negative entry");
      if (out.d(i, j) != out.d(j, i)) throw ValidationError("distance matrix is not symmetric");
    }
  }
  return out;
}

std::string format_distance_csv(const DistanceMatrix& dist) {
  std::string out = "cluster_id";
  for (const auto& id : dist.cluster_ids) out += ',' + id;
  out += '\n';
  for (std::size_t i = 0; i < dist.size(); ++i) {
    out += dist.cluster_ids[i];
    for (std::size_t j = 0; j < dist.size(); ++j) out += ',' + format_double(dist(i, j));
    out += '\n';
  }
  return out;
}

DistanceMatrix load_distance_matrix(const std::filesystem::path& path) {
  return parse_distance_csv(read_text_file(path));
}

void save_distance_matrix(const DistanceMatrix& dist, const std::filesystem::path& path) {
  write_text_file(path, format_distance_csv(dist));
}

}  // namespace wmg
