#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace wmg {

using Point3 = Eigen::Vector3d;

/// Ordered polyline of 3D points in millimetres.
struct Streamline {
  std::vector<Point3> points;

  std::size_t size() const { return points.size(); }
  /// Sum of segment lengths.
  double length() const;
};

struct FiberCluster {
  std::string id;
  std::vector<Streamline> streamlines;
};

/// Cluster order is the canonical column order of feature tables and
/// distance matrices built from this atlas.
struct Atlas {
  std::vector<FiberCluster> clusters;

  std::size_t size() const { return clusters.size(); }
  std::vector<std::string> cluster_ids() const;
  /// Throws ValidationError on empty clusters, short or non-finite
  /// streamlines, or duplicate ids.
  void validate() const;
};

/// Symmetric clusters x clusters matrix of inter-cluster distances (mm).
struct DistanceMatrix {
  std::vector<std::string> cluster_ids;
  Eigen::MatrixXd d;

  std::size_t size() const { return cluster_ids.size(); }
  double operator()(std::size_t i, std::size_t j) const {
    return d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
};

/// How streamline-pair distances combine into one cluster distance.
enum class ClusterAggregate { min, mean };

enum class RankOrder { nearest_first, farthest_first };

constexpr std::size_t kDefaultResamplePoints = 15;

/// m points spaced uniformly by arc length; endpoints kept exactly.
Streamline resample_streamline(const Streamline& s, std::size_t m);

/// Minimum of the direct and flipped mean pointwise distance.
double mdf_distance(const Streamline& a, const Streamline& b);

double cluster_distance(const FiberCluster& a, const FiberCluster& b, std::size_t m,
                        ClusterAggregate aggregate = ClusterAggregate::min);

/// Whole-atlas distance matrix. The upper triangle is computed entry by entry
/// (in parallel when allowed) and mirrored, so the result is independent of
/// the worker count.
DistanceMatrix pairwise_distances(const Atlas& atlas, std::size_t m,
                                  ClusterAggregate aggregate = ClusterAggregate::min);

/// Candidates ordered by their minimum distance to any target. Ties go to the
/// lower cluster index in both orders.
std::vector<std::size_t> rank_by_distance(const DistanceMatrix& dist,
                                          const std::vector<std::size_t>& targets,
                                          const std::vector<std::size_t>& candidates,
                                          RankOrder order = RankOrder::nearest_first);

/// JSON array of {"id", "streamlines": [[[x,y,z], ...], ...]}.
Atlas parse_atlas_json(const std::string& text);
std::string format_atlas_json(const Atlas& atlas);
Atlas load_atlas(const std::filesystem::path& path);
void save_atlas(const Atlas& atlas, const std::filesystem::path& path);

/// CSV with a `cluster_id` corner cell, cluster ids as header row and first
/// column, and the full symmetric matrix.
DistanceMatrix parse_distance_csv(const std::string& text);
std::string format_distance_csv(const DistanceMatrix& dist);
DistanceMatrix load_distance_matrix(const std::filesystem::path& path);
void save_distance_matrix(const DistanceMatrix& dist, const std::filesystem::path& path);

}  // namespace wmg
