#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "dpcc/error.hpp"
#include "dpcc/geometry/metrics.hpp"
#include "dpcc/geometry/point_cloud.hpp"
#include "dpcc/geometry/sampling.hpp"
#include "dpcc/geometry/spatial_grid.hpp"
#include "dpcc/io/ply.hpp"
#include "dpcc/random.hpp"
#include "oracles/geometry_oracles.hpp"

using namespace dpcc;

namespace {

std::vector<Vec3> random_points(std::size_t n, Rng& rng, double lo = -1.0,
                                double hi = 1.0) {
  std::vector<Vec3> out(n);
  for (Vec3& p : out) p = {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
  return out;
}

std::vector<Vec3> on_x(std::initializer_list<double> xs) {
  std::vector<Vec3> out;
  for (double x : xs) out.push_back({x, 0.0, 0.0});
  return out;
}

PointCloud cloud_of(std::vector<Vec3> pts) {
  PointCloud c;
  c.positions = std::move(pts);
  return c;
}

// Rotation about a skew axis plus translation.
Vec3 rigid(const Vec3& p) {
  const double c = std::cos(0.7), s = std::sin(0.7);
  const Vec3 q{c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]};
  const double c2 = std::cos(-0.3), s2 = std::sin(-0.3);
  return {q[0] + 0.25, c2 * q[1] - s2 * q[2] - 0.5, s2 * q[1] + c2 * q[2] + 1.0};
}

Vec3 rotate_only(const Vec3& p) { return rigid(p) - rigid({0, 0, 0}); }

std::vector<Vec3> sphere(std::size_t n) {
  // Fibonacci lattice, radius 0.5.
  std::vector<Vec3> out;
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double r = std::sqrt(1.0 - z * z);
    const double t = golden * static_cast<double>(i);
    out.push_back({0.5 * r * std::cos(t), 0.5 * r * std::sin(t), 0.5 * z});
  }
  return out;
}

}  // namespace

TEST_CASE("partition_blocks grid membership") {
  PointCloud c = cloud_of({{0.1, 0.1, 0.1}, {20, 20, 20}});
  const auto blocks = partition_blocks(c, 12.0);
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0].cloud.size() == 1);
  CHECK(blocks[1].cloud.size() == 1);
  CHECK(blocks[0].cloud.frame == Frame::kBlock);
}

TEST_CASE("partition_blocks single cell round trip") {
  Rng rng(3);
  PointCloud c = cloud_of(random_points(200, rng, 0.5, 11.5));
  const auto blocks = partition_blocks(c, 12.0);
  REQUIRE(blocks.size() == 1);
  const PointCloud back = denormalize(blocks[0].cloud, blocks[0]);
  for (std::size_t i = 0; i < c.size(); ++i)
    for (int a = 0; a < 3; ++a)
      CHECK(std::abs(back.positions[i][a] - c.positions[i][a]) <= 1e-9 * blocks[0].scale);
  for (const Vec3& p : blocks[0].cloud.positions)
    for (double x : p) CHECK(std::abs(x) <= 1.0 + 1e-9);
}

TEST_CASE("partition_blocks matches exhaustive cell assignment") {
  Rng rng(11);
  PointCloud c = cloud_of(random_points(1000, rng, 0.0, 24.0));
  const auto blocks = partition_blocks(c, 12.0);
  CHECK(blocks.size() == 8);
  std::size_t total = 0;
  for (const Block& b : blocks) {
    total += b.cloud.size();
    std::size_t expected = 0;
    for (const Vec3& p : c.positions) {
      bool inside = true;
      for (int a = 0; a < 3; ++a) {
        inside = inside && p[a] >= 12.0 * b.cell[a] && p[a] < 12.0 * (b.cell[a] + 1);
      }
      expected += inside;
    }
    CHECK(b.cloud.size() == expected);
  }
  CHECK(total == 1000);
}

TEST_CASE("partition_blocks rejects non-finite input") {
  PointCloud c = cloud_of({{NAN, 0, 0}});
  CHECK_THROWS_AS(partition_blocks(c, 12.0), ArgumentError);
}

TEST_CASE("farthest_point_sample examples") {
  const auto pts = on_x({0, 1, 2, 10});
  CHECK(farthest_point_sample(pts, 2, 0) == std::vector<std::size_t>{0, 3});
  CHECK(farthest_point_sample(pts, 3, 0) == oracle::fps(pts, 3, 0));
  CHECK(farthest_point_sample(pts, 3, 0) == std::vector<std::size_t>{0, 3, 2});
  auto all = farthest_point_sample(pts, 4);
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK_THROWS_AS(farthest_point_sample(pts, 5), ArgumentError);
  CHECK_THROWS_AS(farthest_point_sample(pts, 0), ArgumentError);
}

TEST_CASE("farthest_point_sample default seed is nearest the centroid") {
  const auto pts = on_x({0, 1, 2, 10});  // centroid 3.25
  CHECK(farthest_point_sample(pts, 1)[0] == 2);
}

TEST_CASE("farthest_point_sample agrees with the linear-scan oracle") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const auto pts = random_points(60, rng);
    const auto got = farthest_point_sample(pts, 20);
    CHECK(got == oracle::fps(pts, 20, got[0]));
  }
}

TEST_CASE("fps covering radius is non-increasing in m") {
  Rng rng(5);
  const auto pts = random_points(100, rng);
  double prev = INFINITY;
  for (std::size_t m = 1; m <= 100; m += 3) {
    const auto s = farthest_point_sample(pts, m);
    double cover = 0.0;
    for (const Vec3& p : pts) {
      double md = INFINITY;
      for (std::size_t i : s) md = std::min(md, squared_distance(p, pts[i]));
      cover = std::max(cover, md);
    }
    CHECK(cover <= prev);
    prev = cover;
  }
}

TEST_CASE("knn examples") {
  std::vector<Vec3> grid;
  for (int y = -1; y <= 1; ++y)
    for (int x = -1; x <= 1; ++x) grid.push_back({double(x), double(y), 0.0});
  CHECK(knn(grid, std::vector<Vec3>{grid[7]}, 1) == std::vector<std::size_t>{7});
  const auto five = knn(grid, std::vector<Vec3>{{0, 0, 0}}, 5);
  CHECK(five == oracle::knn_row(grid, {0, 0, 0}, 5));
  CHECK(std::set<std::size_t>(five.begin(), five.end()) ==
        std::set<std::size_t>{1, 3, 4, 5, 7});
  const auto all = knn(grid, std::vector<Vec3>{{0.3, 0.1, 0}}, grid.size());
  CHECK(all == oracle::knn_row(grid, {0.3, 0.1, 0}, grid.size()));
  CHECK_THROWS_AS(knn(grid, std::vector<Vec3>{{0, 0, 0}}, 10), ArgumentError);
}

TEST_CASE("knn equals the full-sort oracle") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const std::size_t n = 1 + rng.below(256);
    const auto pts = random_points(n, rng);
    const auto qs = random_points(8, rng, -1.5, 1.5);
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(n, 20));
    const auto got = knn(pts, qs, k);
    for (std::size_t q = 0; q < qs.size(); ++q) {
      const auto want = oracle::knn_row(pts, qs[q], k);
      CHECK(std::vector<std::size_t>(got.begin() + q * k, got.begin() + (q + 1) * k) == want);
    }
  }
}

TEST_CASE("knn breaks ties toward the lower index") {
  // Duplicated points and a lattice full of equal distances.
  std::vector<Vec3> pts;
  for (int i = 0; i < 4; ++i)
    for (int x = -2; x <= 2; ++x)
      for (int y = -2; y <= 2; ++y) pts.push_back({0.1 * x, 0.1 * y, 0.0});
  const auto got = knn(pts, std::vector<Vec3>{{0, 0, 0}}, 30);
  CHECK(got == oracle::knn_row(pts, {0, 0, 0}, 30));
}

TEST_CASE("knn stays exact and quick for queries far from a tight cluster") {
  Rng rng(12);
  std::vector<Vec3> pts = random_points(500, rng, -1e-3, 1e-3);
  std::vector<Vec3> queries{{50, 0, 0}, {3, -4, 12}, {1e-3, 0.02, 0}, {0.5, 0.5, 0.5}};
  for (int i = 0; i < 20; ++i) queries.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
  const auto got = knn(pts, queries, 3);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const std::vector<std::size_t> row(got.begin() + 3 * q, got.begin() + 3 * q + 3);
    CHECK(row == oracle::knn_row(pts, queries[q], 3));
  }
}

TEST_CASE("radius search returns exactly the ball") {
  Rng rng(9);
  const auto pts = random_points(300, rng);
  const SpatialGrid grid(pts, 0.15);
  for (int t = 0; t < 20; ++t) {
    const Vec3 q{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    std::vector<std::size_t> want;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (squared_distance(q, pts[i]) <= 0.15 * 0.15) want.push_back(i);
    CHECK(grid.radius(q, 0.15) == want);
  }
}

TEST_CASE("collapse_assign examples") {
  const auto pts = on_x({0, 1, 9, 10});
  const std::vector<std::size_t> sampled{0, 3};
  const auto map = collapse_assign(pts, sampled);
  CHECK(map.collapsed[0] == std::vector<std::size_t>{0, 1});
  CHECK(map.collapsed[1] == std::vector<std::size_t>{2, 3});
  CHECK(map.factors == std::vector<double>{2, 2});

  const std::vector<std::size_t> every{0, 1, 2, 3};
  const auto id = collapse_assign(pts, every);
  for (std::size_t s = 0; s < 4; ++s) {
    CHECK(id.collapsed[s] == std::vector<std::size_t>{s});
    CHECK(id.factors[s] == 1.0);
  }
}

TEST_CASE("collapse_assign tie goes to the lower sample index") {
  const auto pts = on_x({0, 5, 10});
  // Listed high index first so slot order and index order disagree.
  const std::vector<std::size_t> sampled{2, 0};
  const auto map = collapse_assign(pts, sampled);
  CHECK(map.owner[1] == 1);  // slot holding parent index 0
  CHECK(map.collapsed[1] == std::vector<std::size_t>{0, 1});
  CHECK_THROWS_AS(collapse_assign(pts, std::vector<std::size_t>{}), ArgumentError);
}

TEST_CASE("collapse_assign partition property") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed);
    const std::size_t n = 2 + rng.below(120);
    auto pts = random_points(n, rng);
    // Coarse lattice produces plenty of exact ties.
    if (seed % 3 == 0)
      for (Vec3& p : pts)
        for (double& x : p) x = std::round(x * 4.0) / 4.0;
    const std::size_t m = downsampled_count(n, 0.25);
    const auto sampled = farthest_point_sample(pts, m);
    const auto map = collapse_assign(pts, sampled);
    const auto want = oracle::collapse_owner(pts, sampled);
    CHECK(map.owner == want);
    std::vector<int> seen(n, 0);
    double total = 0.0;
    for (std::size_t s = 0; s < map.size(); ++s) {
      total += map.factors[s];
      CHECK(std::find(map.collapsed[s].begin(), map.collapsed[s].end(), sampled[s]) !=
            map.collapsed[s].end());
      for (std::size_t i : map.collapsed[s]) ++seen[i];
    }
    CHECK(total == static_cast<double>(n));
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  }
}

TEST_CASE("downsampled_count rounding") {
  CHECK(downsampled_count(10, 0.25) == 3);  // 2.5 rounds up
  CHECK(downsampled_count(3, 0.1) == 1);
  CHECK(downsampled_count(7, 1.0) == 7);
  CHECK_THROWS_AS(downsampled_count(7, 0.0), ArgumentError);
}

TEST_CASE("chamfer_distance") {
  Rng rng(4);
  const auto p = random_points(30, rng);
  CHECK(chamfer_distance(cloud_of(p), cloud_of(p)) == 0.0);
  CHECK(chamfer_distance(cloud_of({{0, 0, 0}}), cloud_of({{3, 0, 0}})) == doctest::Approx(18.0));
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng r(seed);
    const auto a = random_points(10, r);
    const auto b = random_points(7, r);
    CHECK(chamfer_distance(cloud_of(a), cloud_of(b)) ==
          doctest::Approx(oracle::chamfer(a, b)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(chamfer_distance(PointCloud{}, cloud_of(p)), ArgumentError);
}

TEST_CASE("density_metric") {
  MetricConfig cfg;
  Rng rng(8);
  const auto p = random_points(80, rng);
  CHECK(density_metric(cloud_of(p), cloud_of(p), cfg) == 0.0);

  auto permuted = p;
  std::reverse(permuted.begin(), permuted.end());
  CHECK(density_metric(cloud_of(p), cloud_of(permuted), cfg) == doctest::Approx(0.0));

  const auto gt = on_x({-0.1, -0.05, 0.0, 0.05, 0.1});
  const auto rec = on_x({-0.2, -0.1, 0.0, 0.1, 0.2});
  const double dm = density_metric(cloud_of(gt), cloud_of(rec), cfg);
  CHECK(dm > 0.0);
  CHECK(dm == doctest::Approx(oracle::density(gt, rec, 0.15, 1e-4)).epsilon(1e-12));

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng r(seed);
    const auto a = random_points(40, r, -0.5, 0.5);
    const auto b = random_points(25, r, -0.5, 0.5);
    CHECK(density_metric(cloud_of(a), cloud_of(b), cfg) ==
          doctest::Approx(oracle::density(a, b, 0.15, 1e-4)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(density_metric(cloud_of(p), PointCloud{}, cfg), ArgumentError);
}

TEST_CASE("density_metric isolated points use the guard") {
  // Both clouds isolated at r=0.15: counts 1 and mean r on each side.
  const auto a = on_x({0.0, 1.0});
  const auto b = on_x({0.0, 0.5, 1.0});
  MetricConfig cfg;
  CHECK(density_metric(cloud_of(a), cloud_of(b), cfg) == 0.0);
}

TEST_CASE("density_metric stays finite on duplicated points") {
  // gt: a pair of copies at 0, |K| = 1 at distance 0. rec: 0 and 0.1,
  // |K| = 1 at 0.1. Count terms vanish; each gt point pays mu * 0.1 / r, and
  // each rec point mu * 0.1 / 0.1.
  const auto gt = on_x({0.0, 0.0});
  const auto rec = on_x({0.0, 0.1});
  MetricConfig cfg;
  const double dm = density_metric(cloud_of(gt), cloud_of(rec), cfg);
  CHECK(std::isfinite(dm));
  CHECK(dm == doctest::Approx(cfg.dm_weight * (0.1 / cfg.dm_radius + 1.0)).epsilon(1e-12));
  CHECK(dm == doctest::Approx(oracle::density(gt, rec, cfg.dm_radius, cfg.dm_weight)).epsilon(1e-12));
}

TEST_CASE("p2plane_psnr") {
  PointCloud gt = cloud_of(sphere(20));
  gt.normals = gt.positions;
  for (Vec3& n : gt.normals) n = (1.0 / norm(n)) * n;
  CHECK(p2plane_psnr(gt, gt, 1.0) == kPsnrCapDb);

  PointCloud one = cloud_of({{0, 0, 0}});
  one.normals = {{0, 0, 1}};
  CHECK(p2plane_psnr(one, cloud_of({{1, 0, 0}}), 1.0) == kPsnrCapDb);

  PointCloud rec = cloud_of(gt.positions);
  for (std::size_t i = 0; i < rec.size(); ++i)
    rec.positions[i] = rec.positions[i] + 0.01 * gt.normals[i];
  const double got = p2plane_psnr(gt, rec, 0.7);
  CHECK(got == doctest::Approx(oracle::psnr(gt.positions, gt.normals, rec.positions, 0.7)));
  CHECK(got == doctest::Approx(10.0 * std::log10(3.0 * 0.49 / 1e-4)));

  CHECK_THROWS_AS(p2plane_psnr(cloud_of({{0, 0, 0}}), rec, 1.0), ArgumentError);
}

TEST_CASE("f1_score") {
  Rng rng(12);
  PointCloud gt = cloud_of(random_points(10, rng));
  gt.normals = estimate_normals(gt.positions, 4);
  CHECK(f1_score(gt, gt, 0.05, 0.2) == 1.0);

  PointCloud far = gt;
  for (Vec3& p : far.positions) p = p + Vec3{0.1, 0, 0};
  CHECK(f1_score(gt, far, 0.05, 0.2) == 0.0);

  // Half the points within both thresholds.
  PointCloud half = gt;
  for (std::size_t i = 0; i < 5; ++i) half.positions[i] = half.positions[i] + Vec3{0, 0, 3};
  const double f = f1_score(gt, half, 0.05, 0.2);
  CHECK(f == doctest::Approx(oracle::f1(gt.positions, gt.normals, half.positions,
                                         half.normals, 0.05, 0.2)));
  CHECK(f == doctest::Approx(0.5));

  // A cluster on one gt point scores a single true positive.
  PointCloud cluster = cloud_of(std::vector<Vec3>(4, gt.positions[0]));
  cluster.normals.assign(4, gt.normals[0]);
  CHECK(f1_score(gt, cluster, 0.05, 0.2) == doctest::Approx(2.0 / 14.0));

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng r(seed);
    PointCloud a = cloud_of(random_points(30, r, -0.3, 0.3));
    PointCloud b = cloud_of(random_points(20, r, -0.3, 0.3));
    a.normals = estimate_normals(a.positions, 6);
    b.normals = estimate_normals(b.positions, 6);
    CHECK(f1_score(a, b, 0.15, 0.8) ==
          doctest::Approx(oracle::f1(a.positions, a.normals, b.positions, b.normals, 0.15, 0.8)));
  }
}

TEST_CASE("metrics are invariant under a rigid transform") {
  Rng rng(21);
  PointCloud a = cloud_of(random_points(50, rng, -0.4, 0.4));
  PointCloud b = cloud_of(random_points(40, rng, -0.4, 0.4));
  a.normals = estimate_normals(a.positions, 8);
  b.normals = estimate_normals(b.positions, 8);
  PointCloud ta = a, tb = b;
  for (Vec3& p : ta.positions) p = rigid(p);
  for (Vec3& p : tb.positions) p = rigid(p);
  for (Vec3& n : ta.normals) n = rotate_only(n);
  for (Vec3& n : tb.normals) n = rotate_only(n);
  MetricConfig cfg;
  CHECK(std::abs(chamfer_distance(a, b) - chamfer_distance(ta, tb)) < 1e-9);
  CHECK(std::abs(density_metric(a, b, cfg) - density_metric(ta, tb, cfg)) < 1e-9);
  CHECK(std::abs(f1_score(a, b, 0.2, 1.0) - f1_score(ta, tb, 0.2, 1.0)) < 1e-9);
}

TEST_CASE("bits_per_point") {
  CHECK(bits_per_point(125, 1000) == 1.0);
  CHECK(bits_per_point(20, 16) == 10.0);
  CHECK(bits_per_point(20 + 200, 16) - bits_per_point(20, 16) ==
        doctest::Approx(2.0 * (bits_per_point(20 + 100, 16) - bits_per_point(20, 16))));
  CHECK_THROWS_AS(bits_per_point(10, 0), ArgumentError);
}

TEST_CASE("estimate_normals on a plane") {
  Rng rng(2);
  std::vector<Vec3> pts;
  for (int i = 0; i < 100; ++i) pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), 0.3});
  for (const Vec3& n : estimate_normals(pts)) {
    CHECK(n[2] == doctest::Approx(1.0));
    CHECK(std::abs(norm(n) - 1.0) < 1e-9);
  }
}

TEST_CASE("ply and dpcl round trips") {
  Rng rng(6);
  PointCloud c = cloud_of(random_points(25, rng));
  c.normals = estimate_normals(c.positions, 6);
  const auto dir = std::filesystem::temp_directory_path() / "dpcc_test_geometry";
  std::filesystem::create_directories(dir);
  for (auto enc : {PlyEncoding::kAscii, PlyEncoding::kBinaryLittleEndian}) {
    const PointCloud back = parse_ply(format_ply(c, enc));
    REQUIRE(back.size() == c.size());
    REQUIRE(back.has_normals());
    for (std::size_t i = 0; i < c.size(); ++i)
      for (int a = 0; a < 3; ++a) {
        CHECK(back.positions[i][a] == doctest::Approx(c.positions[i][a]).epsilon(1e-15));
        CHECK(back.normals[i][a] == doctest::Approx(c.normals[i][a]).epsilon(1e-12));
      }
  }
  const std::string path = (dir / "c.ply").string();
  write_cloud(path, c);
  CHECK(read_cloud(path).size() == 25);

  const PointCloud d = parse_dpcl(format_dpcl(c));
  REQUIRE(d.size() == 25);
  CHECK(d.positions[3][1] == doctest::Approx(c.positions[3][1]).epsilon(1e-6));
  CHECK_THROWS_AS(parse_dpcl(std::string("DPCL\x05\0\0\0", 8)), FormatError);
  CHECK_THROWS_AS(parse_ply("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\n"
                            "property float y\nproperty float z\nend_header\n1 2 3\n"),
                  FormatError);
}

TEST_CASE("ply reader accepts foreign float layouts") {
  std::string s =
      "ply\nformat binary_little_endian 1.0\ncomment x\nelement vertex 1\n"
      "property float x\nproperty float y\nproperty float z\nproperty uchar red\n"
      "element face 0\nproperty list uchar int vertex_indices\nend_header\n";
  const float xyz[3] = {1.5f, -2.0f, 0.25f};
  s.append(reinterpret_cast<const char*>(xyz), 12);
  s.push_back('\x7f');
  const PointCloud c = parse_ply(s);
  REQUIRE(c.size() == 1);
  CHECK(c.positions[0] == Vec3{1.5, -2.0, 0.25});
  CHECK_FALSE(c.has_normals());
}
