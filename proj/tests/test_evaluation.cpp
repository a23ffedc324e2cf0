#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "opendisc/evaluation.hpp"

using namespace opendisc;

namespace {

using Gt = Image<std::uint8_t>;

Image<int> row(std::initializer_list<int> v) {
  Image<int> out(static_cast<int>(v.size()), 1);
  int i = 0;
  for (int x : v) out[i++] = x;
  return out;
}

Gt gt_row(std::initializer_list<int> v) {
  Gt out(static_cast<int>(v.size()), 1);
  int i = 0;
  for (int x : v) out[i++] = static_cast<std::uint8_t>(x);
  return out;
}

Gt to_gt(const Image<int>& classes) {
  Gt out(classes.width(), classes.height());
  for (std::size_t i = 0; i < classes.size(); ++i) out[i] = static_cast<std::uint8_t>(classes[i]);
  return out;
}

Frame plane(const Intrinsics& k, float depth) {
  return make_frame(Image<Rgb8>(k.width, k.height, Rgb8(50, 50, 50)), Image<float>(k.width, k.height, depth), k,
                    Pose::identity(), 0);
}

}  // namespace

TEST_CASE("compute_iou examples") {
  const Gt truth = gt_row({1, 1, 0, 0});
  CHECK(*compute_iou(row({1, 1, 0, 0}), truth, 1) == 1.0);
  CHECK(*compute_iou(row({0, 0, 1, 1}), truth, 1) == 0.0);
  CHECK(*compute_iou(row({0, 1, 1, 0}), truth, 1) == doctest::Approx(1.0 / 3.0));
  CHECK_FALSE(compute_iou(row({0, 0, 0, 0}), gt_row({0, 0, 0, 0}), 1).has_value());
  CHECK_THROWS_AS(compute_iou(row({1}), truth, 1), std::invalid_argument);
}

TEST_CASE("void ground truth is not evaluated") {
  const Gt truth = gt_row({1, kVoidClass, kVoidClass, 0});
  CHECK(*compute_iou(row({1, 1, 1, 0}), truth, 1) == 1.0);
  Contingency table;
  table.add(row({5, 6, 6, 5}), truth);
  const auto m = table.plurality();
  CHECK(m.size() == 1);
  CHECK(m.at(5) == 0);  // one pixel each of class 1 and 0: tie to the smaller class
}

TEST_CASE("clusters identical to classes give an identity mapping") {
  const Image<int> pred = row({0, 0, 1, 2, 2, 2});
  Contingency table;
  table.add(pred, to_gt(pred));
  const auto m = table.plurality();
  CHECK(m == std::map<int, int>{{0, 0}, {1, 1}, {2, 2}});
  IouAccumulator acc(3);
  acc.add(apply_mapping(pred, m), to_gt(pred));
  for (int c = 0; c < 3; ++c) CHECK(*acc.iou(c) == 1.0);
}

TEST_CASE("plurality: 60/40 split and many-to-one") {
  Image<int> pred(100, 1, 7);
  Gt truth(100, 1, 2);
  for (int i = 60; i < 100; ++i) truth[i] = 4;
  Contingency table;
  table.add(pred, truth);
  CHECK(table.plurality().at(7) == 2);

  Contingency two;
  two.add(row({3, 3, 3, 9, 9, 9}), gt_row({5, 5, 1, 5, 5, 0}));
  const auto m = two.plurality();
  CHECK(m.at(3) == 5);
  CHECK(m.at(9) == 5);
}

TEST_CASE("unmapped clusters render void after mapping") {
  const Image<int> mapped = apply_mapping(row({kVoidPrediction, 4, 8}), {{4, 1}});
  CHECK(mapped[0] == kVoidPrediction);
  CHECK(mapped[1] == 1);
  CHECK(mapped[2] == kVoidPrediction);
}

TEST_CASE("property: plurality assignment is idempotent") {
  std::mt19937 rng(4);
  std::uniform_int_distribution<int> cluster(0, 11), cls(0, 5);
  for (int trial = 0; trial < 20; ++trial) {
    Image<int> pred(30, 20);
    Gt truth(30, 20);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] = cluster(rng);
      truth[i] = static_cast<std::uint8_t>(cls(rng));
    }
    Contingency first;
    first.add(pred, truth);
    const Image<int> mapped = apply_mapping(pred, first.plurality());
    Contingency second;
    second.add(mapped, truth);
    for (const auto& [id, c] : second.plurality()) CHECK(id == c);
  }
}

TEST_CASE("property: IoU is symmetric, bounded and monotone") {
  std::mt19937 rng(9);
  std::uniform_int_distribution<int> cls(0, 3);
  for (int trial = 0; trial < 30; ++trial) {
    Image<int> a(16, 8), b(16, 8);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = cls(rng);
      b[i] = cls(rng);
    }
    for (int c = 0; c < 4; ++c) {
      const auto ab = compute_iou(a, to_gt(b), c);
      const auto ba = compute_iou(b, to_gt(a), c);
      REQUIRE(ab.has_value() == ba.has_value());
      if (!ab) continue;
      CHECK(*ab == doctest::Approx(*ba));
      CHECK(*ab >= 0.0);
      CHECK(*ab <= 1.0);

      // relabelling a wrong pixel of class c correctly never lowers IoU
      Image<int> better = a;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (b[i] == c && a[i] != c) {
          better[i] = c;
          break;
        }
      }
      CHECK(*compute_iou(better, to_gt(b), c) >= *ab - 1e-12);
    }
  }
}

TEST_CASE("pooled IoU accumulates counts before dividing") {
  IouAccumulator acc(2);
  acc.add(row({1, 1, 1, 1}), gt_row({1, 1, 1, 1}));  // 4 / 4
  acc.add(row({0, 0, 0, 1}), gt_row({1, 1, 1, 1}));  // 1 / 4
  CHECK(*acc.iou(1) == doctest::Approx(5.0 / 8.0));
  CHECK(*acc.iou(0) == 0.0);  // predicted but never true

  IouAccumulator single(4);
  const Image<int> p = row({0, 2, 2, 1, kVoidPrediction});
  const Gt t = gt_row({0, 2, 1, 1, 3});
  single.add(p, t);
  for (int c = 0; c < 4; ++c) CHECK(single.iou(c) == compute_iou(p, t, c));
  CHECK_THROWS_AS(single.add(row({0, 0, 0, 0, 9}), t), std::out_of_range);
}

TEST_CASE("mean IoU skips classes without a value") {
  CHECK(mean_iou({1.0, std::nullopt, 0.5}) == doctest::Approx(0.75));
  CHECK(mean_iou({std::nullopt}) == 0.0);
}

TEST_CASE("render_prediction: empty map and single cluster") {
  const Intrinsics k{60.0, 60.0, 20.0, 15.0, 40, 30};
  const SurfelMap empty;
  const Image<int> none = render_prediction(empty, ClusterMap{}, Pose::identity(), k);
  for (std::size_t i = 0; i < none.size(); ++i) CHECK(none[i] == kVoidPrediction);

  SurfelMap map;
  map.fuse(plane(k, 1.2f));
  for (Surfel& s : map.surfels()) s.label = 3;
  ClusterMap clusters;
  clusters.cluster_of[3] = 0;
  clusters.cluster_count = 1;
  const Image<int> one = render_prediction(map, clusters, Pose::identity(), k);
  std::set<int> ids;
  int covered = 0;
  for (std::size_t i = 0; i < one.size(); ++i) {
    ids.insert(one[i]);
    covered += one[i] == 0;
  }
  CHECK(ids.count(0) == 1);
  CHECK(covered >= static_cast<int>(0.9 * one.size()));
  for (int id : ids) CHECK((id == 0 || id == kVoidPrediction));
}

TEST_CASE("evaluate_clusters maps, scores and reports") {
  const Intrinsics k{60.0, 60.0, 20.0, 15.0, 40, 30};
  SurfelMap map;
  map.fuse(plane(k, 1.2f));
  // segment 0 left of the principal point, segment 1 right of it
  for (Surfel& s : map.surfels()) s.label = s.position.x() < 0.0f ? 0 : 1;

  ClusterMap clusters;
  clusters.cluster_of = {{0, 4}, {1, 4}};  // one cluster over both halves
  clusters.cluster_count = 5;

  ClassList classes;
  classes.names = {"left", "right"};
  classes.trained = {true, false};
  const TruthSource truth = [&](int) {
    Gt g(k.width, k.height, 0);
    for (int y = 0; y < k.height; ++y)
      for (int x = 0; x < k.width; ++x) g(x, y) = x < 20 ? 0 : 1;
    return g;
  };
  const std::vector<Pose> poses{Pose::identity(), Pose::identity()};

  const EvalReport merged = evaluate_clusters(map, clusters, k, poses, truth, classes);
  CHECK(merged.frames == 2);
  REQUIRE(merged.cluster_to_class.size() == 1);
  CHECK(merged.evaluated_classes == 2);
  CHECK(merged.iou[1] == std::optional<double>(0.0));
  CHECK(*merged.iou[0] == doctest::Approx(0.5).epsilon(0.1));

  clusters.cluster_of = {{0, 0}, {1, 1}};
  clusters.cluster_count = 2;
  const EvalReport split = evaluate_clusters(map, clusters, k, poses, truth, classes, {.per_frame_average = true});
  CHECK(split.per_frame_average);
  CHECK(split.cluster_to_class == std::map<int, int>{{0, 0}, {1, 1}});
  CHECK(split.mean_iou > 0.9);

  const auto seg_class = segment_majority_class(map, k, poses, truth);
  CHECK(seg_class == std::map<int, int>{{0, 0}, {1, 1}});
}
