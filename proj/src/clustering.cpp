#include "opendisc/clustering.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace opendisc {

void MclParams::validate() const {
  if (!(inflation > 1.0)) throw std::invalid_argument("mcl inflation must exceed 1");
  if (!(prune >= 0.0 && prune < 1.0)) throw std::invalid_argument("mcl prune must lie in [0, 1)");
  if (max_iters <= 0) throw std::invalid_argument("mcl max_iters must be positive");
  if (!(tolerance > 0.0)) throw std::invalid_argument("mcl tolerance must be positive");
  if (!(attractor_threshold > 0.0 && attractor_threshold < 1.0)) {
    throw std::invalid_argument("mcl attractor threshold must lie in (0, 1)");
  }
}

SegmentGraph build_graph(const SegmentTable& table, double eta, double prune) {
  SegmentGraph g;
  g.labels = table.labels();
  const int n = static_cast<int>(g.labels.size());
  std::vector<const SegmentTable::Record*> recs;
  recs.reserve(n);
  for (const auto& [l, r] : table.records()) recs.push_back(&r);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) * 8);
  for (int i = 0; i < n; ++i) {
    triplets.emplace_back(i, i, 1.0);
    for (int j = i + 1; j < n; ++j) {
      const double d = segment_distance(*recs[i], *recs[j], table.class_count());
      const double s = std::exp(-eta * d);
      if (s < prune) continue;
      triplets.emplace_back(i, j, s);
      triplets.emplace_back(j, i, s);
    }
  }
  g.similarity.resize(n, n);
  g.similarity.setFromTriplets(triplets.begin(), triplets.end());
  return g;
}

ClusterMap recluster(const SegmentTable& table, double eta, const MclParams& params,
                     SegmentGraph* graph_out) {
  SegmentGraph g = build_graph(table, eta, params.prune);
  const MclResult r = mcl(g.similarity, params);
  ClusterMap out;
  out.cluster_count = r.cluster_count;
  out.iterations = r.iterations;
  for (std::size_t i = 0; i < g.labels.size(); ++i) out.cluster_of[g.labels[i]] = r.assignment[i];
  if (graph_out) *graph_out = std::move(g);
  return out;
}

void write_graph_csv(std::ostream& os, const SegmentGraph& graph) {
  os << "i,j,s\n";
  for (Eigen::Index c = 0; c < graph.similarity.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(graph.similarity, c); it; ++it) {
      if (it.row() > it.col()) continue;
      os << graph.labels[it.row()] << ',' << graph.labels[it.col()] << ',' << it.value() << '\n';
    }
  }
}

void write_clusters_csv(std::ostream& os, const ClusterMap& clusters) {
  os << "label,cluster\n";
  for (const auto& [l, c] : clusters.cluster_of) os << l << ',' << c << '\n';
}

ClusterMap read_clusters_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("label,cluster", 0) != 0) {
    throw std::runtime_error("clusters csv: missing 'label,cluster' header");
  }
  ClusterMap out;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    int label = 0, cluster = 0;
    char comma = 0;
    if (!(ls >> label >> comma >> cluster) || comma != ',' || cluster < 0) {
      throw std::runtime_error("clusters csv line " + std::to_string(line_no) + ": expected 'label,cluster'");
    }
    out.cluster_of[label] = cluster;
    out.cluster_count = std::max(out.cluster_count, cluster + 1);
  }
  return out;
}

}  // namespace opendisc
