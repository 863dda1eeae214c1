#include "rsbeam/dataset_io.hpp"

#include <cstring>
#include <fstream>

namespace rsbeam {
namespace {

constexpr char kDatasetMagic[8] = {'R', 'S', 'B', 'E', 'A', 'M', 'v', '1'};
constexpr char kDualMagic[8] = {'R', 'S', 'L', 'B', 'L', '_', 'v', '1'};
constexpr char kBeamMagic[8] = {'R', 'S', 'P', 'L', 'B', 'L', 'v', '1'};

class Writer {
 public:
  explicit Writer(const std::string& path)
      : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw FileFormatError("cannot open for writing: " + path);
  }
  template <typename T>
  void put(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_bytes(const char* p, std::size_t n) { out_.write(p, n); }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path)
      : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw FileFormatError("cannot open: " + path);
    in_.seekg(0, std::ios::end);
    size_ = static_cast<std::size_t>(in_.tellg());
    in_.seekg(0);
  }
  template <typename T>
  T get() {
    T v{};
    need(sizeof(T));
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    offset_ += sizeof(T);
    return v;
  }
  void get_bytes(char* p, std::size_t n) {
    need(n);
    in_.read(p, n);
    offset_ += n;
  }
  void need(std::size_t n) const {
    if (offset_ + n > size_)
      throw FileFormatError(path_ + ": truncated, need " +
                            std::to_string(offset_ + n) + " bytes but file has " +
                            std::to_string(size_));
  }
  std::size_t offset() const { return offset_; }
  const std::string& path() const { return path_; }

 private:
  std::ifstream in_;
  std::string path_;
  std::size_t size_ = 0;
  std::size_t offset_ = 0;
};

void check_magic(Reader& r, const char (&magic)[8], const char* what) {
  char buf[8];
  r.get_bytes(buf, 8);
  if (std::memcmp(buf, magic, 8) != 0)
    throw FileFormatError(r.path() + ": bad " + std::string(what) +
                          " magic at byte 0");
}

}  // namespace

void write_dataset(const std::string& path, const Dataset& ds) {
  Writer w(path);
  w.put_bytes(kDatasetMagic, 8);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.cfg.num_users));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.cfg.num_tx_antennas));
  w.put<std::uint64_t>(ds.samples.size());
  w.put<double>(ds.cfg.snr_db);
  w.put<std::uint64_t>(ds.seed);
  w.put<double>(ds.params.cell_radius);
  w.put<double>(ds.params.ref_distance);
  w.put<double>(ds.params.pathloss_exponent);
  w.put<double>(ds.params.min_distance);
  for (const ChannelSample& s : ds.samples) {
    // Re of H user-major row-major (user k, then antenna), then Im.
    for (int k = 0; k < ds.cfg.num_users; ++k)
      for (int a = 0; a < ds.cfg.num_tx_antennas; ++a)
        w.put<double>(s.channels(a, k).real());
    for (int k = 0; k < ds.cfg.num_users; ++k)
      for (int a = 0; a < ds.cfg.num_tx_antennas; ++a)
        w.put<double>(s.channels(a, k).imag());
    for (int k = 0; k < ds.cfg.num_users; ++k) w.put<double>(s.distances(k));
    for (int k = 0; k < ds.cfg.num_users; ++k)
      w.put<double>(s.large_scale_gains(k));
  }
}

Dataset read_dataset(const std::string& path) {
  Reader r(path);
  check_magic(r, kDatasetMagic, "dataset");
  Dataset ds;
  const auto k_users = r.get<std::uint32_t>();
  const auto nt = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  ds.cfg.snr_db = r.get<double>();
  ds.seed = r.get<std::uint64_t>();
  ds.params.cell_radius = r.get<double>();
  ds.params.ref_distance = r.get<double>();
  ds.params.pathloss_exponent = r.get<double>();
  ds.params.min_distance = r.get<double>();
  if (k_users == 0 || nt == 0 || count == 0)
    throw FileFormatError(path + ": header with zero K, N_t or sample_count");
  ds.cfg = SystemConfig::from_snr(static_cast<int>(nt),
                                  static_cast<int>(k_users), ds.cfg.snr_db);
  ds.samples.resize(count);
  for (auto& s : ds.samples) {
    s.channels.resize(nt, k_users);
    s.distances.resize(k_users);
    s.large_scale_gains.resize(k_users);
    std::vector<double> re(static_cast<std::size_t>(nt) * k_users);
    std::vector<double> im(re.size());
    for (auto& v : re) v = r.get<double>();
    for (auto& v : im) v = r.get<double>();
    std::size_t idx = 0;
    for (std::uint32_t k = 0; k < k_users; ++k)
      for (std::uint32_t a = 0; a < nt; ++a, ++idx)
        s.channels(a, k) = std::complex<double>(re[idx], im[idx]);
    for (std::uint32_t k = 0; k < k_users; ++k) s.distances(k) = r.get<double>();
    for (std::uint32_t k = 0; k < k_users; ++k)
      s.large_scale_gains(k) = r.get<double>();
  }
  return ds;
}

void write_dual_labels(const std::string& path, const DualLabels& labels) {
  Writer w(path);
  w.put_bytes(kDualMagic, 8);
  w.put<std::uint32_t>(labels.num_users);
  w.put<std::uint64_t>(labels.entries.size());
  w.put<std::uint64_t>(labels.dataset_seed);
  for (const DualLabel& e : labels.entries) {
    w.put<std::uint8_t>(e.valid ? 1 : 0);
    for (int i = 0; i <= static_cast<int>(labels.num_users); ++i)
      w.put<double>(e.valid ? e.xi_first(i) : 0.0);
    for (int i = 0; i <= static_cast<int>(labels.num_users); ++i)
      w.put<double>(e.valid ? e.xi_last(i) : 0.0);
  }
}

DualLabels read_dual_labels(const std::string& path) {
  Reader r(path);
  check_magic(r, kDualMagic, "dual-label");
  DualLabels labels;
  labels.num_users = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  labels.dataset_seed = r.get<std::uint64_t>();
  if (labels.num_users == 0 || count == 0)
    throw FileFormatError(path + ": header with zero K or sample_count");
  labels.entries.resize(count);
  const int dim = static_cast<int>(labels.num_users) + 1;
  for (auto& e : labels.entries) {
    e.valid = r.get<std::uint8_t>() != 0;
    e.xi_first.resize(dim);
    e.xi_last.resize(dim);
    for (int i = 0; i < dim; ++i) e.xi_first(i) = r.get<double>();
    for (int i = 0; i < dim; ++i) e.xi_last(i) = r.get<double>();
  }
  return labels;
}

void write_beam_labels(const std::string& path, const BeamLabels& labels) {
  Writer w(path);
  w.put_bytes(kBeamMagic, 8);
  w.put<std::uint32_t>(labels.num_users);
  w.put<std::uint32_t>(labels.num_tx_antennas);
  w.put<std::uint64_t>(labels.entries.size());
  w.put<std::uint64_t>(labels.dataset_seed);
  const std::size_t n =
      static_cast<std::size_t>(labels.num_tx_antennas) * (labels.num_users + 1);
  for (const BeamLabel& e : labels.entries) {
    w.put<std::uint8_t>(e.valid ? 1 : 0);
    for (std::size_t i = 0; i < n; ++i)
      w.put<double>(e.valid ? e.beams.reshaped()(static_cast<Eigen::Index>(i)).real()
                            : 0.0);
    for (std::size_t i = 0; i < n; ++i)
      w.put<double>(e.valid ? e.beams.reshaped()(static_cast<Eigen::Index>(i)).imag()
                            : 0.0);
  }
}

BeamLabels read_beam_labels(const std::string& path) {
  Reader r(path);
  check_magic(r, kBeamMagic, "beam-label");
  BeamLabels labels;
  labels.num_users = r.get<std::uint32_t>();
  labels.num_tx_antennas = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  labels.dataset_seed = r.get<std::uint64_t>();
  if (labels.num_users == 0 || labels.num_tx_antennas == 0 || count == 0)
    throw FileFormatError(path + ": header with zero dimensions");
  labels.entries.resize(count);
  const Eigen::Index nt = labels.num_tx_antennas;
  const Eigen::Index cols = labels.num_users + 1;
  for (auto& e : labels.entries) {
    e.valid = r.get<std::uint8_t>() != 0;
    e.beams.resize(nt, cols);
    std::vector<double> re(static_cast<std::size_t>(nt * cols));
    std::vector<double> im(re.size());
    for (auto& v : re) v = r.get<double>();
    for (auto& v : im) v = r.get<double>();
    std::size_t idx = 0;
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index a = 0; a < nt; ++a, ++idx)
        e.beams(a, c) = std::complex<double>(re[idx], im[idx]);
  }
  return labels;
}

}  // namespace rsbeam
