#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <iosfwd>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "opendisc/segment_table.hpp"

namespace opendisc {

struct MclParams {
  double inflation = 1.6;
  double prune = 1e-5;
  int max_iters = 100;
  double tolerance = 1e-6;
  /// Diagonal mass above which a node counts as an attractor.
  double attractor_threshold = 1e-2;

  void validate() const;
};

/// Cluster index per node, numbered 0.. in order of each cluster's smallest
/// node, plus how many iterations MCL ran.
struct MclResult {
  std::vector<int> assignment;
  int cluster_count = 0;
  int iterations = 0;
  bool converged = false;
  Eigen::MatrixXd flow;  // final column-stochastic matrix
};

namespace detail {

template <typename Scalar>
void normalize_columns(Eigen::SparseMatrix<Scalar>& m) {
  for (Eigen::Index c = 0; c < m.outerSize(); ++c) {
    Scalar sum = 0;
    for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(m, c); it; ++it) sum += it.value();
    if (sum <= Scalar(0)) continue;
    for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(m, c); it; ++it) it.valueRef() /= sum;
  }
}

template <typename Scalar>
Scalar max_abs_difference(const Eigen::SparseMatrix<Scalar>& a, const Eigen::SparseMatrix<Scalar>& b) {
  const Eigen::SparseMatrix<Scalar> d = a - b;
  Scalar m = 0;
  for (Eigen::Index c = 0; c < d.outerSize(); ++c) {
    for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(d, c); it; ++it) {
      m = std::max(m, std::abs(it.value()));
    }
  }
  return m;
}

}  // namespace detail

/// Reads clusters off a converged flow matrix given as a coefficient
/// accessor `at(row, col)`. Attractors are nodes whose diagonal exceeds the
/// threshold; attractors reaching each other above it share a cluster, and
/// every other node joins the cluster of the attractor sending it the most
/// flow (ties to the lower index). Nodes with no attractor flow stay alone.
template <typename Accessor>
std::vector<int> extract_clusters(int n, Accessor at, double threshold, int* cluster_count) {
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<int> attractors;
  for (int i = 0; i < n; ++i) {
    if (at(i, i) > threshold) attractors.push_back(i);
  }
  for (std::size_t a = 0; a < attractors.size(); ++a) {
    for (std::size_t b = a + 1; b < attractors.size(); ++b) {
      const int i = attractors[a], k = attractors[b];
      if (at(i, k) > threshold || at(k, i) > threshold) {
        const int ri = find(i), rk = find(k);
        parent[std::max(ri, rk)] = std::min(ri, rk);
      }
    }
  }
  std::vector<int> root(n);
  for (int j = 0; j < n; ++j) {
    int best = -1;
    double best_flow = 0;
    for (int a : attractors) {
      const double f = at(a, j);
      if (f > best_flow) {
        best_flow = f;
        best = a;
      }
    }
    root[j] = best < 0 ? j : find(best);
  }
  std::vector<int> id_of_root(n, -1), out(n);
  int next = 0;
  for (int j = 0; j < n; ++j) {
    int& id = id_of_root[root[j]];
    if (id < 0) id = next++;
    out[j] = id;
  }
  if (cluster_count) *cluster_count = next;
  return out;
}

/// Markov clustering on a symmetric nonnegative similarity matrix whose
/// diagonal already carries the self-loops.
template <typename Scalar>
MclResult mcl(const Eigen::SparseMatrix<Scalar>& similarity, const MclParams& params) {
  params.validate();
  using Sparse = Eigen::SparseMatrix<Scalar>;
  const Eigen::Index n = similarity.rows();
  if (similarity.cols() != n) throw std::invalid_argument("mcl: matrix must be square");
  MclResult result;
  if (n == 0) return result;

  const Sparse transposed = similarity.transpose();
  const Scalar asym = detail::max_abs_difference(similarity, transposed);
  if (asym > Scalar(1e-12)) throw std::invalid_argument("mcl: similarity matrix is not symmetric");
  for (Eigen::Index c = 0; c < n; ++c) {
    for (typename Sparse::InnerIterator it(similarity, c); it; ++it) {
      if (!(it.value() >= Scalar(0)) || !std::isfinite(static_cast<double>(it.value()))) {
        throw std::invalid_argument("mcl: entries must be finite and nonnegative");
      }
    }
  }

  const Scalar eps = static_cast<Scalar>(params.prune);
  const Scalar r = static_cast<Scalar>(params.inflation);
  auto prune = [&](Sparse& m) {
    if (eps > Scalar(0)) m.prune([&](Eigen::Index, Eigen::Index, const Scalar& v) { return v >= eps; });
    else m.prune(Scalar(0), Scalar(0));
  };

  Sparse m = similarity;
  m.makeCompressed();
  detail::normalize_columns(m);
  for (int iter = 0; iter < params.max_iters; ++iter) {
    Sparse next = m * m;
    for (Eigen::Index c = 0; c < next.outerSize(); ++c) {
      for (typename Sparse::InnerIterator it(next, c); it; ++it) it.valueRef() = std::pow(it.value(), r);
    }
    detail::normalize_columns(next);
    prune(next);
    detail::normalize_columns(next);
    const Scalar change = detail::max_abs_difference(next, m);
    m = std::move(next);
    result.iterations = iter + 1;
    if (change < Scalar(params.tolerance)) {
      result.converged = true;
      break;
    }
  }

  result.flow = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>(m).template cast<double>();
  result.assignment = extract_clusters(
      static_cast<int>(n), [&](int i, int j) { return result.flow(i, j); },
      params.attractor_threshold, &result.cluster_count);
  return result;
}

/// Similarity graph over the live segments of a table, nodes in label order.
struct SegmentGraph {
  std::vector<int> labels;
  Eigen::SparseMatrix<double> similarity;
};

/// All-pairs similarity with unit self-loops; entries below `prune` dropped.
SegmentGraph build_graph(const SegmentTable& table, double eta, double prune);

struct ClusterMap {
  std::map<int, int> cluster_of;  // segment label -> cluster id
  int cluster_count = 0;
  int iterations = 0;

  int at(int label) const {
    auto it = cluster_of.find(label);
    return it == cluster_of.end() ? -1 : it->second;
  }
};

ClusterMap recluster(const SegmentTable& table, double eta, const MclParams& params,
                     SegmentGraph* graph_out = nullptr);

/// Triplets i,j,s with segment labels for i and j (upper triangle and diagonal).
void write_graph_csv(std::ostream& os, const SegmentGraph& graph);
void write_clusters_csv(std::ostream& os, const ClusterMap& clusters);
/// Inverse of write_clusters_csv; the iteration count is not stored.
ClusterMap read_clusters_csv(std::istream& is);

}  // namespace opendisc
