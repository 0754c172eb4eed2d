#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>

#include "wmg/atlas_geometry.hpp"
#include "wmg/error.hpp"
#include "wmg/parallel.hpp"
#include "wmg/rng.hpp"

using namespace wmg;

namespace {

Streamline line(std::initializer_list<Point3> pts) { return Streamline{std::vector<Point3>(pts)}; }

Streamline random_streamline(Rng& rng, std::size_t n) {
  Streamline s;
  Point3 p(rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(0, 50));
  for (std::size_t i = 0; i < n; ++i) {
    s.points.push_back(p);
    p += Point3(rng.normal(2, 1), rng.normal(0, 1), rng.normal(0, 1));
  }
  return s;
}

Atlas random_atlas(Rng& rng, std::size_t clusters, std::size_t per_cluster) {
  Atlas a;
  for (std::size_t c = 0; c < clusters; ++c) {
    FiberCluster fc{"c" + std::to_string(c), {}};
    for (std::size_t k = 0; k < per_cluster; ++k)
      fc.streamlines.push_back(random_streamline(rng, 3 + rng.uniform_index(10)));
    a.clusters.push_back(fc);
  }
  return a;
}

// Independent oracle: direct double loop, no shared helpers beyond resampling.
double brute_mdf(const Streamline& a, const Streamline& b) {
  const std::size_t m = a.size();
  double direct = 0, flipped = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double dx = a.points[i].x() - b.points[i].x(), dy = a.points[i].y() - b.points[i].y(),
                 dz = a.points[i].z() - b.points[i].z();
    direct += std::sqrt(dx * dx + dy * dy + dz * dz);
    const auto& q = b.points[m - 1 - i];
    const double fx = a.points[i].x() - q.x(), fy = a.points[i].y() - q.y(), fz = a.points[i].z() - q.z();
    flipped += std::sqrt(fx * fx + fy * fy + fz * fz);
  }
  return std::min(direct, flipped) / static_cast<double>(m);
}

double brute_cluster(const FiberCluster& a, const FiberCluster& b, std::size_t m) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : a.streamlines)
    for (const auto& t : b.streamlines)
      best = std::min(best, brute_mdf(resample_streamline(s, m), resample_streamline(t, m)));
  return best;
}

// Arc-length position of point p on polyline s (p assumed to lie on it).
double arc_position(const Streamline& s, const Point3& p) {
  double best_err = std::numeric_limits<double>::infinity(), pos = 0, acc = 0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const Point3 seg = s.points[i + 1] - s.points[i];
    const double len = seg.norm();
    const double u = len > 0 ? std::clamp((p - s.points[i]).dot(seg) / (len * len), 0.0, 1.0) : 0.0;
    const double err = (s.points[i] + u * seg - p).norm();
    if (err < best_err) {
      best_err = err;
      pos = acc + u * len;
    }
    acc += len;
  }
  return pos;
}

}  // namespace

TEST_CASE("resample straight segment") {
  const auto r = resample_streamline(line({{0, 0, 0}, {1, 0, 0}}), 3);
  REQUIRE(r.size() == 3);
  CHECK(r.points[0] == Point3(0, 0, 0));
  CHECK(r.points[1].isApprox(Point3(0.5, 0, 0)));
  CHECK(r.points[2] == Point3(1, 0, 0));
}

TEST_CASE("resample keeps an already uniform polyline") {
  const auto s = line({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {1, 1, 1}});
  const auto r = resample_streamline(s, 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK((r.points[i] - s.points[i]).norm() < 1e-12);
}

TEST_CASE("resample keeps endpoints exactly and handles degenerate input") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_streamline(rng, 2 + rng.uniform_index(20));
    const auto r = resample_streamline(s, 2 + rng.uniform_index(30));
    CHECK(r.points.front() == s.points.front());
    CHECK(r.points.back() == s.points.back());
  }
  const auto z = resample_streamline(line({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}), 5);
  REQUIRE(z.size() == 5);
  for (const auto& p : z.points) CHECK(p == Point3(1, 2, 3));
  CHECK_THROWS_AS(resample_streamline(line({{0, 0, 0}, {1, 0, 0}}), 1), ArgumentError);
}

TEST_CASE("resample to 50 on a smooth curve spaces points uniformly in arc length") {
  // Dense helix; the arc length of every resampled point is recovered by
  // projecting onto the dense polyline and compared to k L / (m - 1).
  Streamline helix;
  const int dense = 4000;
  for (int i = 0; i <= dense; ++i) {
    const double t = 4.0 * M_PI * i / dense;
    helix.points.emplace_back(10 * std::cos(t), 10 * std::sin(t), 3 * t);
  }
  double length = 0;
  for (std::size_t i = 0; i + 1 < helix.size(); ++i) length += (helix.points[i + 1] - helix.points[i]).norm();
  CHECK(std::abs(helix.length() - length) <= 1e-12 * length);

  constexpr std::size_t m = 50;
  const auto r = resample_streamline(helix, m);
  REQUIRE(r.size() == m);
  double covered = 0, prev = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const double pos = arc_position(helix, r.points[k]);
    CHECK(std::abs(pos - length * static_cast<double>(k) / (m - 1)) <= 1e-6 * length);
    covered += pos - prev;
    prev = pos;
  }
  CHECK(std::abs(covered - length) <= 1e-6 * length);
}

TEST_CASE("mdf basics") {
  const auto a = line({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}});
  const auto b = line({{3, 0, 0}, {4, 0, 0}, {5, 0, 0}});
  CHECK(mdf_distance(a, a) == 0.0);
  CHECK(mdf_distance(a, b) == doctest::Approx(3.0).epsilon(1e-15));
  const auto rev = line({{2, 0, 0}, {1, 0, 0}, {0, 0, 0}});
  CHECK(mdf_distance(a, rev) == 0.0);
  CHECK_THROWS_AS(mdf_distance(a, line({{0, 0, 0}, {1, 0, 0}})), ArgumentError);
}

TEST_CASE("mdf properties on random streamlines") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = resample_streamline(random_streamline(rng, 8), 12);
    const auto b = resample_streamline(random_streamline(rng, 8), 12);
    const double d = mdf_distance(a, b);
    CHECK(d >= 0.0);
    CHECK(d == mdf_distance(b, a));
    CHECK(d == doctest::Approx(brute_mdf(a, b)).epsilon(1e-12));
    Streamline ra = a;
    std::reverse(ra.points.begin(), ra.points.end());
    CHECK(mdf_distance(a, ra) == 0.0);
    const Point3 shift(rng.normal(0, 100), rng.normal(0, 100), rng.normal(0, 100));
    Streamline ta = a, tb = b;
    for (auto& p : ta.points) p += shift;
    for (auto& p : tb.points) p += shift;
    CHECK(mdf_distance(ta, tb) == doctest::Approx(d).epsilon(1e-9));
  }
}

TEST_CASE("cluster distance") {
  Rng rng(9);
  const auto atlas = random_atlas(rng, 2, 3);
  const auto& A = atlas.clusters[0];
  const auto& B = atlas.clusters[1];
  CHECK(cluster_distance(A, A, 15) == 0.0);
  CHECK(cluster_distance(A, B, 15) == doctest::Approx(brute_cluster(A, B, 15)).epsilon(1e-12));
  for (const auto& s : A.streamlines)
    for (const auto& t : B.streamlines)
      CHECK(cluster_distance(A, B, 15) <=
            mdf_distance(resample_streamline(s, 15), resample_streamline(t, 15)));

  const FiberCluster one_a{"a", {A.streamlines[0]}}, one_b{"b", {B.streamlines[1]}};
  CHECK(cluster_distance(one_a, one_b, 15) ==
        mdf_distance(resample_streamline(A.streamlines[0], 15), resample_streamline(B.streamlines[1], 15)));

  double mean = 0;
  for (const auto& s : A.streamlines)
    for (const auto& t : B.streamlines) mean += brute_mdf(resample_streamline(s, 15), resample_streamline(t, 15));
  CHECK(cluster_distance(A, B, 15, ClusterAggregate::mean) == doctest::Approx(mean / 9).epsilon(1e-12));

  CHECK_THROWS_AS(cluster_distance(FiberCluster{"e", {}}, B, 15), ArgumentError);
}

TEST_CASE("pairwise distances match brute force and are thread independent") {
  Rng rng(33);
  const auto atlas = random_atlas(rng, 5, 3);
  set_thread_limit(1);
  const auto d1 = pairwise_distances(atlas, 15);
  set_thread_limit(4);
  const auto d4 = pairwise_distances(atlas, 15);
  set_thread_limit(0);
  CHECK(d1.cluster_ids == atlas.cluster_ids());
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(std::abs(d1(i, j) - brute_cluster(atlas.clusters[i], atlas.clusters[j], 15)) <= 1e-6);
      CHECK(d1(i, j) == d1(j, i));
      CHECK(d1(i, j) == d4(i, j));
    }
  for (std::size_t i = 0; i < 5; ++i) CHECK(d1(i, i) == 0.0);
}

TEST_CASE("pairwise distances: single cluster and streamline order invariance") {
  Rng rng(2);
  auto atlas = random_atlas(rng, 1, 2);
  const auto d = pairwise_distances(atlas, 15);
  CHECK(d.size() == 1);
  CHECK(d(0, 0) == 0.0);

  auto many = random_atlas(rng, 4, 4);
  const auto before = pairwise_distances(many, 15);
  for (auto& c : many.clusters) std::reverse(c.streamlines.begin(), c.streamlines.end());
  const auto after = pairwise_distances(many, 15);
  CHECK((before.d.array() == after.d.array()).all());
}

TEST_CASE("rank by distance") {
  DistanceMatrix d;
  d.cluster_ids = {"t", "a", "b", "c"};
  d.d = Eigen::MatrixXd::Zero(4, 4);
  auto set = [&](int i, int j, double v) { d.d(i, j) = d.d(j, i) = v; };
  set(0, 1, 5);
  set(0, 2, 2);
  set(0, 3, 9);
  CHECK(rank_by_distance(d, {0}, {1, 2, 3}) == std::vector<std::size_t>{2, 1, 3});
  CHECK(rank_by_distance(d, {0}, {1, 2, 3}, RankOrder::farthest_first) == std::vector<std::size_t>{3, 1, 2});
  set(0, 3, 5);
  CHECK(rank_by_distance(d, {0}, {3, 1}) == std::vector<std::size_t>{1, 3});
  CHECK(rank_by_distance(d, {0}, {3, 1}, RankOrder::farthest_first) == std::vector<std::size_t>{1, 3});
  CHECK_THROWS_AS(rank_by_distance(d, {0, 1}, {1, 2}), ArgumentError);
}

TEST_CASE("rank by distance matches exhaustive oracle and is scale invariant") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 20;
    DistanceMatrix d;
    for (std::size_t i = 0; i < n; ++i) d.cluster_ids.push_back(std::to_string(i));
    d.d = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        d.d(i, j) = d.d(j, i) = std::floor(rng.uniform(0, 10));  // ties on purpose
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    const std::vector<std::size_t> targets(idx.begin(), idx.begin() + 4);
    const std::vector<std::size_t> cands(idx.begin() + 4, idx.end());

    std::vector<std::pair<double, std::size_t>> scored;
    for (const auto c : cands) {
      double s = std::numeric_limits<double>::infinity();
      for (const auto t : targets) s = std::min(s, d.d(c, t));
      scored.emplace_back(s, c);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<std::size_t> oracle;
    for (const auto& [s, c] : scored) oracle.push_back(c);
    const auto got = rank_by_distance(d, targets, cands);
    CHECK(got == oracle);

    DistanceMatrix scaled = d;
    scaled.d = (d.d.array() * 3.0 + 0.0).sqrt();
    CHECK(rank_by_distance(scaled, targets, cands) == got);
  }
}

TEST_CASE("atlas json and distance csv round trip") {
  Rng rng(5);
  const auto atlas = random_atlas(rng, 3, 2);
  const auto back = parse_atlas_json(format_atlas_json(atlas));
  REQUIRE(back.size() == 3);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(back.clusters[c].id == atlas.clusters[c].id);
    REQUIRE(back.clusters[c].streamlines.size() == atlas.clusters[c].streamlines.size());
    for (std::size_t s = 0; s < atlas.clusters[c].streamlines.size(); ++s)
      CHECK(back.clusters[c].streamlines[s].points == atlas.clusters[c].streamlines[s].points);
  }
  const auto d = pairwise_distances(atlas, 15);
  const auto d2 = parse_distance_csv(format_distance_csv(d));
  CHECK(d2.cluster_ids == d.cluster_ids);
  CHECK((d2.d.array() == d.d.array()).all());

  CHECK_THROWS_AS(parse_distance_csv("cluster_id,a,b\na,0,1\nb,2,0\n"), ValidationError);
  CHECK_THROWS_AS(parse_distance_csv("cluster_id,a,b\na,1,1\nb,1,0\n"), ValidationError);
  CHECK_THROWS_AS(parse_atlas_json("[{\"id\":\"a\",\"streamlines\":[]}]"), ValidationError);
  CHECK_THROWS(parse_atlas_json("not json"));
}
