#pragma once

// Dense textbook MCL on nested vectors, shared by the unit and acceptance
// tests as the oracle for the sparse implementation.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "opendisc/clustering.hpp"

struct ReferenceMcl {
  std::vector<std::vector<double>> flow;
  std::vector<int> assignment;
  int iterations = 0;
};

inline ReferenceMcl reference_mcl(const std::vector<std::vector<double>>& a,
                                  const opendisc::MclParams& p) {
  using Mat = std::vector<std::vector<double>>;
  const std::size_t n = a.size();
  auto colnorm = [&](Mat& m) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) s += m[i][j];
      if (s > 0)
        for (std::size_t i = 0; i < n; ++i) m[i][j] /= s;
    }
  };
  Mat m = a;
  colnorm(m);
  ReferenceMcl out;
  for (int it = 0; it < p.max_iters; ++it) {
    Mat next(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < n; ++j) next[i][j] += m[i][k] * m[k][j];
    for (auto& row : next)
      for (double& v : row) v = std::pow(v, p.inflation);
    colnorm(next);
    for (auto& row : next)
      for (double& v : row)
        if (v < p.prune) v = 0.0;
    colnorm(next);
    double change = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) change = std::max(change, std::abs(next[i][j] - m[i][j]));
    m = std::move(next);
    out.iterations = it + 1;
    if (change < p.tolerance) break;
  }
  out.flow = m;
  int count = 0;
  out.assignment = opendisc::extract_clusters(
      static_cast<int>(n), [&](int i, int j) { return m[i][j]; }, p.attractor_threshold, &count);
  return out;
}

/// Random symmetric similarity matrix with unit diagonal: a few planted
/// groups with strong internal links plus sparse weak noise.
inline std::vector<std::vector<double>> random_similarity(std::mt19937& rng, int n) {
  std::uniform_int_distribution<int> groups(1, std::max(1, n / 3));
  std::uniform_real_distribution<double> u(0, 1);
  const int k = groups(rng);
  std::vector<int> g(n);
  for (int& x : g) x = std::uniform_int_distribution<int>(0, k - 1)(rng);
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    a[i][i] = 1.0;
    for (int j = i + 1; j < n; ++j) {
      double s = 0;
      if (g[i] == g[j]) s = 0.3 + 0.7 * u(rng);
      else if (u(rng) < 0.15) s = 0.2 * u(rng);
      a[i][j] = a[j][i] = s;
    }
  }
  return a;
}
