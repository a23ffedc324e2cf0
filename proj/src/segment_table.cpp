#include "opendisc/segment_table.hpp"

#include <fstream>
#include <ostream>

#include "opendisc/binary_io.hpp"

namespace opendisc {

namespace {
constexpr char kTableMagic[4] = {'S', 'T', 'B', '1'};
}

SegmentTable::SegmentTable(int cnn_dim, int class_count)
    : cnn_dim_(cnn_dim), class_count_(class_count) {
  if (cnn_dim <= 0) throw std::invalid_argument("SegmentTable: feature dimension must be positive");
  if (class_count < 2) throw std::invalid_argument("SegmentTable: need at least two classes");
}

int SegmentTable::create() {
  const int label = next_label_++;
  records_.emplace(label, Record(label, kGeoDim, cnn_dim_));
  return label;
}

SegmentTable::Record& SegmentTable::at(int label) {
  auto it = records_.find(label);
  if (it == records_.end()) throw std::out_of_range("no segment " + std::to_string(label));
  return it->second;
}

const SegmentTable::Record& SegmentTable::at(int label) const {
  auto it = records_.find(label);
  if (it == records_.end()) throw std::out_of_range("no segment " + std::to_string(label));
  return it->second;
}

void SegmentTable::merge(int winner, int loser) {
  if (winner == loser) return;
  Record merged = merge_records(at(winner), at(loser));
  merged.label = winner;
  records_.at(winner) = std::move(merged);
  records_.erase(loser);
}

std::vector<int> SegmentTable::labels() const {
  std::vector<int> out;
  out.reserve(records_.size());
  for (const auto& [l, r] : records_) out.push_back(l);
  return out;
}

MemoryFootprint SegmentTable::footprint(std::uint64_t surfel_count) const {
  MemoryFootprint m;
  m.segment_count = records_.size();
  m.element_count = surfel_count;
  const std::uint64_t payload = scalars_per_record() * sizeof(float);
  m.segment_bytes = m.segment_count * (payload + kCounterBytes);
  m.element_bytes = m.element_count * payload;
  return m;
}

void SegmentTable::write_csv(std::ostream& os) const {
  os << "label,omega,gamma,entropy,surfels";
  for (int i = 0; i < kGeoDim; ++i) os << ",geo" << i;
  for (int i = 0; i < cnn_dim_; ++i) os << ",cnn" << i;
  os << '\n';
  for (const auto& [l, r] : records_) {
    os << l << ',' << r.geo_count << ',' << r.cnn_count << ',' << r.entropy << ',' << r.surfel_count;
    for (Eigen::Index i = 0; i < r.f_geo.size(); ++i) os << ',' << r.f_geo(i);
    for (Eigen::Index i = 0; i < r.f_cnn.size(); ++i) os << ',' << r.f_cnn(i);
    os << '\n';
  }
}

void SegmentTable::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(kTableMagic, 4);
  binio::put<std::int32_t>(os, cnn_dim_);
  binio::put<std::int32_t>(os, class_count_);
  binio::put<std::int32_t>(os, next_label_);
  binio::put<std::uint64_t>(os, records_.size());
  for (const auto& [l, r] : records_) {
    binio::put<std::int32_t>(os, l);
    binio::put<std::uint64_t>(os, r.geo_count);
    binio::put<std::uint64_t>(os, r.cnn_count);
    binio::put<std::uint64_t>(os, r.surfel_count);
    binio::put<float>(os, r.entropy);
    binio::put_span(os, r.f_geo.data(), r.f_geo.size());
    binio::put_span(os, r.f_cnn.data(), r.f_cnn.size());
  }
}

SegmentTable SegmentTable::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  binio::expect_magic(is, kTableMagic, path);
  const int cnn_dim = binio::get<std::int32_t>(is);
  const int classes = binio::get<std::int32_t>(is);
  SegmentTable table(cnn_dim, classes);
  table.next_label_ = binio::get<std::int32_t>(is);
  const auto count = binio::get<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    Record r(binio::get<std::int32_t>(is), kGeoDim, cnn_dim);
    r.geo_count = binio::get<std::uint64_t>(is);
    r.cnn_count = binio::get<std::uint64_t>(is);
    r.surfel_count = binio::get<std::uint64_t>(is);
    r.entropy = binio::get<float>(is);
    binio::get_span(is, r.f_geo.data(), r.f_geo.size());
    binio::get_span(is, r.f_cnn.data(), r.f_cnn.size());
    if (r.label < 0 || r.label >= table.next_label_) {
      throw std::runtime_error(path.string() + ": label out of range");
    }
    table.records_.emplace(r.label, std::move(r));
  }
  return table;
}

}  // namespace opendisc
