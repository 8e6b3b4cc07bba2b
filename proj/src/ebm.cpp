#include "cate_ebm/ebm.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <boost/crc.hpp>

#include "cate_ebm/error.hpp"

namespace cate_ebm {
namespace {

constexpr char kMagic[4] = {'P', 'R', 'E', 'B'};

enum class Section : std::uint8_t { partition = 1, b_matrix = 2, net = 3, stats = 4, fingerprint = 5 };

class Writer {
public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const std::string& s) { buf_ += s; }
  std::string& str() { return buf_; }

private:
  std::string buf_;
};

class Reader {
public:
  Reader(const std::string& s, std::size_t begin, std::size_t end) : s_(&s), pos_(begin), end_(end) {}
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>((*s_)[pos_++]);
  }
  std::uint16_t u16() { return static_cast<std::uint16_t>(little(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(little(4)); }
  std::uint64_t u64() { return little(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return end_ - pos_; }
  void need(std::size_t n) const {
    if (end_ - pos_ < n) throw truncated_file_error("model file is truncated");
  }

private:
  std::uint64_t little(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>((*s_)[pos_++])) << (8 * i);
    return v;
  }
  const std::string* s_;
  std::size_t pos_;
  std::size_t end_;
};

void write_matrix(Writer& w, const Eigen::Ref<const Eigen::MatrixXd>& m) {
  w.u64(static_cast<std::uint64_t>(m.rows()));
  w.u64(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
}

Eigen::MatrixXd read_matrix(Reader& r) {
  const std::uint64_t rows = r.u64();
  const std::uint64_t cols = r.u64();
  if (rows != 0 && cols > r.remaining() / 8 / rows) throw truncated_file_error("model file is truncated");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f64();
  return m;
}

void write_section(Writer& out, Section id, Writer& body) {
  out.u8(static_cast<std::uint8_t>(id));
  out.u64(body.str().size());
  out.bytes(body.str());
}

std::uint32_t crc32_of(const std::string& s, std::size_t len) {
  boost::crc_32_type crc;
  crc.process_bytes(s.data(), len);
  return crc.checksum();
}

} // namespace

std::string ModelFingerprint::hex() const {
  std::uint64_t h = splitmix64(input_dim);
  h = splitmix64(h ^ k);
  h = splitmix64(h ^ corruption_hash);
  h = splitmix64(h ^ seed);
  h = splitmix64(h ^ b_hash);
  h = splitmix64(h ^ config_hash);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t hash_orthogonal(const OrthogonalMatrix& b) {
  std::uint64_t h = splitmix64(b.k());
  const auto& m = b.matrix();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) h = splitmix64(h ^ std::bit_cast<std::uint64_t>(m(r, c)));
  return h;
}

void EbmModel::validate() const {
  const std::size_t kk = b_matrix.k();
  if (kk == 0) throw dimension_error("EbmModel has no B matrix");
  if (net.output_width() != kk)
    throw dimension_error("network output width does not match B dimension");
  if (partition.k() != kk) throw dimension_error("partition size does not match B dimension");
  if (partition.dim() != net.input_width())
    throw dimension_error("partition dimension does not match network input width");
  if (has_repr_stats()) {
    if (static_cast<std::size_t>(repr_mean.size()) != kk || static_cast<std::size_t>(repr_std.size()) != kk)
      throw dimension_error("representation statistics do not match k");
    if ((repr_std.array() <= 0.0).any()) throw numeric_error("representation std must be positive");
  }
}

double energy(const EbmModel& model, const Eigen::Ref<const Vector>& x, std::size_t subset) {
  if (subset >= model.k())
    throw dimension_error("energy: subset index " + std::to_string(subset) + " out of range");
  const Vector f = model.net.forward(Vector(x));
  return model.b_matrix.column(subset).dot(f);
}

Matrix represent(const EbmModel& model, const Matrix& x, bool use_train_stats) {
  if (static_cast<std::size_t>(x.cols()) != model.input_dim())
    throw dimension_error("represent: data has " + std::to_string(x.cols()) +
                          " columns, model expects " + std::to_string(model.input_dim()));
  if (use_train_stats && !model.has_repr_stats())
    throw untrained_model_error("represent: model has no standardization statistics");
  Matrix raw = model.net.forward(x);
  if (!use_train_stats) return raw;
  return apply_standardization(raw, model.repr_mean, model.repr_std);
}

std::string encode_model(const EbmModel& model) {
  model.validate();
  Writer out;
  for (char c : kMagic) out.u8(static_cast<std::uint8_t>(c));
  out.u16(kModelFormatVersion);

  Writer part;
  write_matrix(part, model.partition.centroids);
  part.f64(model.partition.inertia);
  write_section(out, Section::partition, part);

  Writer bm;
  write_matrix(bm, model.b_matrix.matrix());
  write_section(out, Section::b_matrix, bm);

  Writer net;
  const auto& widths = model.net.widths();
  net.u64(widths.size());
  for (std::size_t w : widths) net.u64(w);
  for (double p : model.net.params()) net.f64(p);
  write_section(out, Section::net, net);

  Writer stats;
  stats.u64(static_cast<std::uint64_t>(model.repr_mean.size()));
  for (Eigen::Index i = 0; i < model.repr_mean.size(); ++i) stats.f64(model.repr_mean(i));
  for (Eigen::Index i = 0; i < model.repr_std.size(); ++i) stats.f64(model.repr_std(i));
  write_section(out, Section::stats, stats);

  Writer fp;
  fp.u64(model.fingerprint.input_dim);
  fp.u64(model.fingerprint.k);
  fp.u64(model.fingerprint.corruption_hash);
  fp.u64(model.fingerprint.seed);
  fp.u64(model.fingerprint.b_hash);
  fp.u64(model.fingerprint.config_hash);
  write_section(out, Section::fingerprint, fp);

  out.u32(crc32_of(out.str(), out.str().size()));
  return out.str();
}

EbmModel decode_model(const std::string& bytes) {
  Reader head(bytes, 0, bytes.size());
  for (char c : kMagic)
    if (head.u8() != static_cast<std::uint8_t>(c)) throw model_file_error("not a model file (bad magic)");
  const std::uint16_t version = head.u16();
  if (version != kModelFormatVersion)
    throw version_mismatch_error("model file version " + std::to_string(version) + ", expected " +
                                 std::to_string(kModelFormatVersion));

  // Walk the section table first so that truncation is reported as such
  // rather than as a checksum failure.
  struct Span {
    std::size_t begin, end;
  };
  Span spans[6] = {};
  for (int s = 1; s <= 5; ++s) {
    const std::uint8_t id = head.u8();
    if (id != s) throw model_file_error("unexpected section id " + std::to_string(id));
    const std::uint64_t len = head.u64();
    head.need(len);
    spans[s] = {head.pos(), head.pos() + len};
    head = Reader(bytes, spans[s].end, bytes.size());
  }
  const std::size_t payload_end = head.pos();
  const std::uint32_t stored = head.u32();
  if (head.remaining() != 0) throw model_file_error("trailing bytes after checksum");
  if (crc32_of(bytes, payload_end) != stored) throw checksum_error("model file checksum mismatch");

  EbmModel model;
  {
    Reader r(bytes, spans[1].begin, spans[1].end);
    model.partition.centroids = read_matrix(r);
    model.partition.inertia = r.f64();
  }
  {
    Reader r(bytes, spans[2].begin, spans[2].end);
    model.b_matrix = OrthogonalMatrix(read_matrix(r));
  }
  {
    Reader r(bytes, spans[3].begin, spans[3].end);
    const std::uint64_t count = r.u64();
    if (count < 2 || count > 64) throw model_file_error("implausible layer count");
    std::vector<std::size_t> widths(count);
    for (auto& w : widths) w = static_cast<std::size_t>(r.u64());
    model.net = MlpNet(widths);
    for (double& p : model.net.params()) p = r.f64();
  }
  {
    Reader r(bytes, spans[4].begin, spans[4].end);
    const std::uint64_t k = r.u64();
    model.repr_mean.resize(static_cast<Eigen::Index>(k));
    model.repr_std.resize(static_cast<Eigen::Index>(k));
    for (std::uint64_t i = 0; i < k; ++i) model.repr_mean(static_cast<Eigen::Index>(i)) = r.f64();
    for (std::uint64_t i = 0; i < k; ++i) model.repr_std(static_cast<Eigen::Index>(i)) = r.f64();
  }
  {
    Reader r(bytes, spans[5].begin, spans[5].end);
    model.fingerprint.input_dim = r.u64();
    model.fingerprint.k = r.u64();
    model.fingerprint.corruption_hash = r.u64();
    model.fingerprint.seed = r.u64();
    model.fingerprint.b_hash = r.u64();
    model.fingerprint.config_hash = r.u64();
  }
  model.validate();
  return model;
}

void save_model(const EbmModel& model, const std::filesystem::path& path) {
  const std::string bytes = encode_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw input_error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw input_error("failed writing " + path.string());
}

EbmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw model_file_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_model(buf.str());
}

} // namespace cate_ebm
