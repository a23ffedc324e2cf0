#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Geometry>

#include <random>
#include <sstream>

#include "opendisc/segment_table.hpp"

using namespace opendisc;

namespace {

Points3<double> ellipsoid_samples(double a, double b, double c, int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  Points3<double> pts(3, n);
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d d(g(rng), g(rng), g(rng));
    d.normalize();
    pts.col(i) = Eigen::Vector3d(a * d.x(), b * d.y(), c * d.z());
  }
  return pts;
}

Eigen::Matrix3d random_rotation(std::mt19937& rng) {
  std::normal_distribution<double> g;
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  return q.normalized().toRotationMatrix();
}

Eigen::VectorXd unit(int dim, int axis) { return Eigen::VectorXd::Unit(dim, axis); }

// Plain-loop replay of the per-pixel recurrences, kept independent of the
// library's Eigen expressions.
struct Replay {
  std::vector<double> f;
  double e = 0;
  double gamma = 0;

  void step(const std::vector<double>& x, double ex) {
    double norm = 0;
    std::vector<double> b(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      b[i] = (gamma * (f.empty() ? 0.0 : f[i]) + x[i]) / (gamma + 1);
      norm += b[i] * b[i];
    }
    norm = std::sqrt(norm);
    if (norm > 0) {
      f = b;
      for (double& v : f) v /= norm;
    }
    e = (gamma * e + ex) / (gamma + 1);
    gamma += 1;
  }
};

}  // namespace

TEST_CASE("LRF of an axis-aligned ellipsoid recovers its axes") {
  const auto pts = ellipsoid_samples(0.5, 0.25, 0.1, 4000, 1);
  const auto lrf = estimate_lrf(pts);
  CHECK(std::abs(lrf.axes.col(0).dot(Eigen::Vector3d::UnitX())) > 0.99);
  CHECK(std::abs(lrf.axes.col(1).dot(Eigen::Vector3d::UnitY())) > 0.99);
  CHECK(std::abs(lrf.axes.col(2).dot(Eigen::Vector3d::UnitZ())) > 0.99);
  CHECK(lrf.eigenvalues(0) >= lrf.eigenvalues(1));
  CHECK(lrf.eigenvalues(1) >= lrf.eigenvalues(2));
  CHECK(lrf.axes.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK((lrf.axes.transpose() * lrf.axes - Eigen::Matrix3d::Identity()).norm() < 1e-9);
}

TEST_CASE("LRF is translation invariant") {
  const auto pts = ellipsoid_samples(0.4, 0.3, 0.05, 500, 2);
  const Eigen::Vector3d shift(1.5, -2.0, 0.7);
  const auto a = estimate_lrf(pts);
  const auto b = estimate_lrf(Points3<double>(pts.colwise() + shift));
  CHECK((a.axes - b.axes).norm() < 1e-9);
  CHECK((a.eigenvalues - b.eigenvalues).norm() < 1e-12);
  CHECK((b.origin - a.origin - shift).norm() < 1e-12);
}

TEST_CASE("degenerate point sets are rejected") {
  Points3<double> line = Points3<double>::Zero(3, 20);
  for (int i = 0; i < 20; ++i) line(0, i) = 0.1 * i;
  CHECK_THROWS_AS(estimate_lrf(line), DegenerateGeometry);
  CHECK_THROWS_AS(estimate_lrf(Points3<double>(Points3<double>::Random(3, 9))), DegenerateGeometry);
}

TEST_CASE("GOOD has 75 entries, unit mass per plane") {
  const auto pts = ellipsoid_samples(0.3, 0.2, 0.1, 300, 3);
  const auto d = good_descriptor(pts, estimate_lrf(pts));
  REQUIRE(d.size() == 75);
  for (int p = 0; p < 3; ++p) CHECK(d.segment(p * 25, 25).sum() == doctest::Approx(1.0));
  CHECK((d.array() >= 0).all());
}

TEST_CASE("planar cloud collapses into one row of the side projections") {
  // points in the LRF xy plane: z = 0 so z-bin is the middle one
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  Points3<double> pts(3, 400);
  for (int i = 0; i < 400; ++i) pts.col(i) = Eigen::Vector3d(2.0 * u(rng), u(rng), 0.0);
  const auto lrf = estimate_lrf(pts);
  const auto d = good_descriptor(pts, lrf);
  // yz plane: index bin(y)*5 + bin(z); xz plane: bin(x)*5 + bin(z). z -> bin 2.
  for (int plane = 0; plane < 2; ++plane) {
    double in_row = 0;
    for (int a = 0; a < 5; ++a) in_row += d(plane * 25 + a * 5 + 2);
    CHECK(in_row == doctest::Approx(1.0));
  }
}

TEST_CASE("property: GOOD invariant to rigid motion") {
  std::mt19937 rng(5);
  const auto pts = ellipsoid_samples(0.35, 0.2, 0.08, 800, 6);
  const auto ref = good_descriptor(pts, estimate_lrf(pts));
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Matrix3d r = random_rotation(rng);
    const Eigen::Vector3d t(u(rng), u(rng), u(rng));
    const Points3<double> moved = (r * pts).colwise() + t;
    const auto d = good_descriptor(moved, estimate_lrf(moved));
    CHECK((d - ref).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("geometric update examples") {
  SegmentRecord<double> r(0, 4, 2);
  update_geo(r, Eigen::Vector4d(0, 3, 0, 4));
  CHECK((r.f_geo - Eigen::Vector4d(0, 0.6, 0, 0.8)).norm() < 1e-12);
  CHECK(r.geo_count == 1);

  SegmentRecord<double> fixed(0, 4, 2);
  for (int i = 0; i < 10; ++i) update_geo(fixed, Eigen::Vector4d(1, 0, 0, 0));
  CHECK((fixed.f_geo - Eigen::Vector4d(1, 0, 0, 0)).norm() < 1e-12);

  SegmentRecord<double> two(0, 4, 2);
  update_geo(two, Eigen::Vector4d(1, 0, 0, 0));
  update_geo(two, Eigen::Vector4d(0, 1, 0, 0));
  const double h = std::sqrt(2.0) / 2;
  CHECK((two.f_geo - Eigen::Vector4d(h, h, 0, 0)).norm() < 1e-12);

  SegmentRecord<double> zero(0, 4, 2);
  update_geo(zero, Eigen::Vector4d::Zero());
  CHECK(zero.geo_count == 1);
  CHECK(zero.f_geo.isZero());
}

TEST_CASE("deep feature and entropy updates match a step-by-step replay") {
  SegmentRecord<double> r(0, 4, 3);
  observe_pixel(r, unit(3, 0), 0.0);
  CHECK((r.f_cnn - unit(3, 0)).norm() < 1e-12);
  CHECK(r.cnn_count == 1);
  observe_pixel(r, unit(3, 1), std::log(9.0));
  CHECK(r.entropy == doctest::Approx(std::log(9.0) / 2).epsilon(1e-12));
  CHECK(r.cnn_count == 2);

  std::mt19937 rng(8);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> ue(0, std::log(9.0));
  SegmentRecord<double> lib(0, 4, 5);
  Replay oracle;
  for (int i = 0; i < 300; ++i) {
    std::vector<double> x(5);
    for (double& v : x) v = g(rng);
    const double e = ue(rng);
    observe_pixel(lib, Eigen::Map<Eigen::VectorXd>(x.data(), 5), e);
    oracle.step(x, e);
  }
  for (int i = 0; i < 5; ++i) CHECK(lib.f_cnn(i) == doctest::Approx(oracle.f[i]).epsilon(1e-9));
  CHECK(lib.entropy == doctest::Approx(oracle.e).epsilon(1e-12));
  CHECK(lib.cnn_count == 300);

  SegmentRecord<double> constant(0, 4, 2);
  for (int i = 0; i < 7; ++i) observe_pixel(constant, Eigen::Vector2d(0, 2), 1.25);
  CHECK(constant.entropy == doctest::Approx(1.25));
  CHECK((constant.f_cnn - Eigen::Vector2d(0, 1)).norm() < 1e-12);
  CHECK(constant.cnn_count == 7);
}

TEST_CASE("record merging") {
  SegmentRecord<double> a(0, 2, 2), b(1, 2, 2), empty(2, 2, 2);
  a.f_geo = Eigen::Vector2d(1, 0);
  a.geo_count = 3;
  a.f_cnn = Eigen::Vector2d(0, 1);
  a.cnn_count = 4;
  a.entropy = 1.0;
  b.f_geo = Eigen::Vector2d(0, 1);
  b.geo_count = 1;

  const auto id = merge_records(a, empty);
  CHECK((id.f_geo - a.f_geo).norm() < 1e-12);
  CHECK((id.f_cnn - a.f_cnn).norm() < 1e-12);
  CHECK(id.entropy == 1.0);

  const auto m = merge_records(a, b);
  CHECK(m.f_geo(1) / m.f_geo(0) == doctest::Approx(1.0 / 3.0));
  CHECK(m.f_geo.norm() == doctest::Approx(1.0));
  CHECK(m.geo_count == 4);
  CHECK(m.cnn_count == 4);

  b.f_cnn = Eigen::Vector2d(0, 1);
  b.cnn_count = 4;
  b.entropy = 0.5;
  const auto same = merge_records(a, b);
  CHECK((same.f_cnn - a.f_cnn).norm() < 1e-12);
  CHECK(same.entropy == doctest::Approx(0.75));

  const auto none = merge_records(empty, empty);
  CHECK(none.f_geo.isZero());
  CHECK(none.cnn_count == 0);
}

TEST_CASE("segment weight") {
  SegmentRecord<double> r(0, 2, 2);
  r.cnn_count = 5;
  r.entropy = 0;
  CHECK(segment_weight(r, 9) == 0.0);
  r.entropy = std::log(9.0);
  CHECK(segment_weight(r, 9) == doctest::Approx(1.0));
  r.entropy = std::log(9.0) / 2;
  CHECK(segment_weight(r, 9) == doctest::Approx(0.5));
  r.entropy = std::log(9.0) * (1 + 1e-9);
  CHECK(segment_weight(r, 9) == 1.0);
  r.cnn_count = 0;
  CHECK(segment_weight(r, 9) == 1.0);
  CHECK_THROWS_AS(segment_weight(r, 1), std::invalid_argument);
}

TEST_CASE("pairwise similarity examples") {
  SegmentRecord<double> a(0, 3, 3), b(1, 3, 3);
  a.f_cnn = unit(3, 0);
  b.f_cnn = unit(3, 1);
  a.cnn_count = b.cnn_count = 1;
  a.f_geo = unit(3, 2);
  b.f_geo = unit(3, 0);
  a.geo_count = b.geo_count = 1;
  CHECK(pairwise_similarity(a, a, 9, 6.0) == doctest::Approx(1.0));
  CHECK(pairwise_similarity(a, b, 9, 6.0) ==
        doctest::Approx(std::exp(-6.0 * std::sqrt(2.0))).epsilon(1e-9));
  CHECK(std::exp(-6.0 * std::sqrt(2.0)) == doctest::Approx(2.03e-4).epsilon(5e-3));

  // w = 1 on both sides: deep term vanishes
  a.entropy = b.entropy = std::log(9.0);
  b.f_geo = unit(3, 2);
  CHECK(segment_distance(a, b, 9) == doctest::Approx(0.0));
  b.f_geo = unit(3, 1);
  CHECK(segment_distance(a, b, 9) == doctest::Approx(std::sqrt(2.0)));

  // missing geometry
  b.geo_count = 0;
  b.entropy = std::log(9.0) / 2;
  b.f_cnn = unit(3, 0);
  CHECK(segment_distance(a, b, 9) == doctest::Approx(0.5 + std::sqrt(2.0) * 0.5));
}

TEST_CASE("property: similarity symmetric, bounded, eta scaling") {
  std::mt19937 rng(9);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> ue(0, std::log(9.0));
  auto random_record = [&](int label) {
    SegmentRecord<double> r(label, 6, 5);
    r.f_geo = Eigen::VectorXd::NullaryExpr(6, [&] { return g(rng); }).normalized();
    r.f_cnn = Eigen::VectorXd::NullaryExpr(5, [&] { return g(rng); }).normalized();
    r.geo_count = r.cnn_count = 1;
    r.entropy = ue(rng);
    return r;
  };
  for (int i = 0; i < 200; ++i) {
    const auto a = random_record(0), b = random_record(1);
    const double s = pairwise_similarity(a, b, 9, 6.0);
    CHECK(s > 0.0);
    CHECK(s <= 1.0);
    CHECK(s == doctest::Approx(pairwise_similarity(b, a, 9, 6.0)).epsilon(1e-12));
    const double d = segment_distance(a, b, 9);
    CHECK(pairwise_similarity(a, b, 9, 12.0) == doctest::Approx(std::exp(-6.0 * 2.0 * d)));
  }
}

TEST_CASE("segment table bookkeeping and checkpoint") {
  SegmentTable t(4, 9);
  const int a = t.create(), b = t.create(), c = t.create();
  CHECK(a == 0);
  CHECK(c == 2);
  update_geo(t.at(a), Eigen::VectorXf::Unit(kGeoDim, 0));
  update_geo(t.at(b), Eigen::VectorXf::Unit(kGeoDim, 1));
  observe_pixel(t.at(b), Eigen::Vector4f(1, 0, 0, 0), 0.5f);
  t.at(a).surfel_count = 10;
  t.at(b).surfel_count = 5;
  t.merge(a, b);
  CHECK(t.size() == 2);
  CHECK_FALSE(t.contains(b));
  CHECK(t.at(a).surfel_count == 15);
  CHECK(t.at(a).geo_count == 2);
  CHECK(t.at(a).f_geo.norm() == doctest::Approx(1.0f));

  const auto m = t.footprint(5000);
  CHECK(m.segment_bytes == 2 * ((4 + 75 + 1) * 4 + SegmentTable::kCounterBytes));
  CHECK(m.element_bytes == 5000ull * (4 + 75 + 1) * 4);

  const auto path = std::filesystem::temp_directory_path() / "opendisc_table.bin";
  t.save(path);
  const SegmentTable u = SegmentTable::load(path);
  CHECK(u.labels() == t.labels());
  CHECK(u.next_label() == 3);
  CHECK(u.at(a).f_geo == t.at(a).f_geo);
  CHECK(u.at(a).f_cnn == t.at(a).f_cnn);
  CHECK(u.at(a).entropy == t.at(a).entropy);

  std::ostringstream csv;
  t.write_csv(csv);
  const std::string s = csv.str();
  CHECK(std::count(s.begin(), s.end(), '\n') == 3);
  CHECK(s.rfind("label,omega,gamma,entropy,surfels,geo0", 0) == 0);
}
