#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "opendisc/clustering.hpp"
#include "mcl_reference.hpp"

using namespace opendisc;

namespace {

Eigen::SparseMatrix<double> sparse_from(const std::vector<std::vector<double>>& a) {
  Eigen::MatrixXd d(a.size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) d(i, j) = a[i][j];
  return d.sparseView();
}

std::vector<std::vector<double>> two_cliques() {
  std::vector<std::vector<double>> a(6, std::vector<double>(6, 0.0));
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a[3 * c + i][3 * c + j] = 1.0;
  a[2][3] = a[3][2] = 0.01;
  return a;
}

SegmentTable grouped_table(int per_group, double noise, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> g(0.0f, static_cast<float>(noise));
  SegmentTable t(8, 9);
  for (int group = 0; group < 2; ++group) {
    for (int k = 0; k < per_group; ++k) {
      auto& r = t.at(t.create());
      Eigen::VectorXf f = Eigen::VectorXf::Unit(8, group);
      for (int i = 0; i < 8; ++i) f(i) += g(rng);
      observe_pixel(r, f, 0.0f);
      update_geo(r, Eigen::VectorXf::Unit(kGeoDim, k % kGeoDim));
    }
  }
  return t;
}

}  // namespace

TEST_CASE("two cliques joined by a weak edge give two clusters") {
  const auto a = two_cliques();
  MclParams p;
  const MclResult r = mcl(sparse_from(a), p);
  CHECK(r.cluster_count == 2);
  CHECK(r.assignment == std::vector<int>{0, 0, 0, 1, 1, 1});
  const auto ref = reference_mcl(a, p);
  CHECK(ref.assignment == r.assignment);
}

TEST_CASE("isolated nodes stay singletons; complete graph is one cluster") {
  std::vector<std::vector<double>> id(5, std::vector<double>(5, 0.0));
  for (int i = 0; i < 5; ++i) id[i][i] = 1.0;
  const MclResult r = mcl(sparse_from(id), MclParams{});
  CHECK(r.cluster_count == 5);
  CHECK(r.assignment == std::vector<int>{0, 1, 2, 3, 4});

  std::vector<std::vector<double>> full(7, std::vector<double>(7, 0.4));
  for (int i = 0; i < 7; ++i) full[i][i] = 1.0;
  CHECK(mcl(sparse_from(full), MclParams{}).cluster_count == 1);
}

TEST_CASE("non-symmetric input is rejected") {
  auto a = two_cliques();
  a[0][5] = 0.3;
  CHECK_THROWS_AS(mcl(sparse_from(a), MclParams{}), std::invalid_argument);
  MclParams bad;
  bad.inflation = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("sparse MCL without pruning matches the dense reference") {
  std::mt19937 rng(21);
  MclParams p;
  p.prune = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto a = random_similarity(rng, 4 + trial % 30);
    const MclResult s = mcl(sparse_from(a), p);
    const auto d = reference_mcl(a, p);
    CHECK(s.assignment == d.assignment);
    CHECK(s.iterations == d.iterations);
    double diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < a.size(); ++j) diff = std::max(diff, std::abs(s.flow(i, j) - d.flow[i][j]));
    CHECK(diff < 1e-9);
  }
}

TEST_CASE("property: permuting nodes permutes the clustering") {
  std::mt19937 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_similarity(rng, 20);
    std::vector<int> perm(a.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<double>> b(a.size(), std::vector<double>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < a.size(); ++j) b[i][j] = a[perm[i]][perm[j]];
    const auto ra = mcl(sparse_from(a), MclParams{}).assignment;
    const auto rb = mcl(sparse_from(b), MclParams{}).assignment;
    // same partition: i~j in b iff perm[i]~perm[j] in a
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < a.size(); ++j)
        CHECK((rb[i] == rb[j]) == (ra[perm[i]] == ra[perm[j]]));
  }
}

TEST_CASE("recluster separates two confident feature groups") {
  const SegmentTable t = grouped_table(6, 0.05, 4);
  SegmentGraph g;
  const ClusterMap c = recluster(t, 6.0, MclParams{}, &g);
  CHECK(c.cluster_count == 2);
  for (int l = 0; l < 6; ++l) CHECK(c.at(l) == 0);
  for (int l = 6; l < 12; ++l) CHECK(c.at(l) == 1);

  CHECK(g.similarity.rows() == 12);
  for (int i = 0; i < 12; ++i) CHECK(g.similarity.coeff(i, i) == 1.0);
  CHECK((Eigen::MatrixXd(g.similarity) - Eigen::MatrixXd(g.similarity).transpose()).norm() == 0.0);

  std::ostringstream gcsv, ccsv;
  write_graph_csv(gcsv, g);
  write_clusters_csv(ccsv, c);
  CHECK(gcsv.str().rfind("i,j,s\n0,0,1\n", 0) == 0);
  CHECK(ccsv.str().rfind("label,cluster\n0,0\n", 0) == 0);
}

TEST_CASE("single segment forms one cluster") {
  SegmentTable t(4, 9);
  t.create();
  const ClusterMap c = recluster(t, 6.0, MclParams{});
  CHECK(c.cluster_count == 1);
  CHECK(c.at(0) == 0);
}

TEST_CASE("cluster CSV round trip and malformed input") {
  ClusterMap m;
  m.cluster_of = {{0, 1}, {3, 0}, {7, 2}};
  m.cluster_count = 3;
  std::stringstream ss;
  write_clusters_csv(ss, m);
  CHECK(ss.str() == "label,cluster\n0,1\n3,0\n7,2\n");
  const ClusterMap back = read_clusters_csv(ss);
  CHECK(back.cluster_of == m.cluster_of);
  CHECK(back.cluster_count == 3);
  CHECK(back.at(5) == -1);

  std::istringstream no_header("0,1\n");
  CHECK_THROWS_AS(read_clusters_csv(no_header), std::runtime_error);
  std::istringstream bad_row("label,cluster\n0;1\n");
  CHECK_THROWS_AS(read_clusters_csv(bad_row), std::runtime_error);
  std::istringstream negative("label,cluster\n0,-2\n");
  CHECK_THROWS_AS(read_clusters_csv(negative), std::runtime_error);
}
