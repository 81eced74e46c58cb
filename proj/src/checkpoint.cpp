#include "stackptr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "stackptr/error.hpp"

namespace stackptr {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'K', 'P', 'T', 'R', 'C', 'K'};

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    out_.append(s);
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_) throw DataError("checkpoint: truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t get(int bytes) {
    need(static_cast<std::uint64_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

void write_table(Writer& w, const SymbolTable& t) {
  w.u64(t.reserved());
  w.u64(t.size());
  for (const auto& name : t.names()) w.str(name);
}

SymbolTable read_table(Reader& r, const char* what) {
  const std::uint64_t reserved = r.u64();
  const std::uint64_t count = r.u64();
  if (reserved > count) throw DataError(std::string("checkpoint: bad ") + what + " table header");
  std::vector<std::string> names;
  for (std::uint64_t i = 0; i < count; ++i) names.push_back(r.str());
  SymbolTable t(std::vector<std::string>(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(reserved)));
  for (std::size_t i = reserved; i < names.size(); ++i) t.add(names[i]);
  if (t.size() != count) throw DataError(std::string("checkpoint: duplicate entries in ") + what + " table");
  t.freeze();
  return t;
}

}  // namespace

std::string serialize_checkpoint(const Model& model) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.u32(model.kind() == ModelKind::stackptr ? 0 : 1);
  w.str(config_to_json(model.config()));
  const Vocabulary& v = model.vocab();
  w.u32(v.pos_column == PosColumn::upos ? 0 : 1);
  write_table(w, v.words);
  write_table(w, v.chars);
  write_table(w, v.pos);
  write_table(w, v.labels);
  const ag::ParameterSet& ps = model.params();
  w.u64(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const ag::Parameter& p = ps[i];
    w.str(p.name);
    w.u64(p.shape.rows);
    w.u64(p.shape.cols);
    for (double x : p.value) w.f64(x);
  }
  return w.take();
}

std::unique_ptr<Model> deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.raw(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
    throw DataError("checkpoint: not a stackptr checkpoint (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t kind_tag = r.u32();
  if (kind_tag > 1) throw DataError("checkpoint: unknown model kind " + std::to_string(kind_tag));
  ModelConfig config;
  try {
    config = config_from_json(r.str());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint: bad config: ") + e.what());
  }
  Vocabulary vocab;
  vocab.pos_column = r.u32() == 0 ? PosColumn::upos : PosColumn::xpos;
  vocab.words = read_table(r, "word");
  vocab.chars = read_table(r, "char");
  vocab.pos = read_table(r, "pos");
  vocab.labels = read_table(r, "label");

  auto model = make_model(kind_tag == 0 ? ModelKind::stackptr : ModelKind::biaf, config, vocab);
  ag::ParameterSet& ps = model->params();
  const std::uint64_t count = r.u64();
  if (count != ps.size()) {
    throw DataError("checkpoint: holds " + std::to_string(count) + " parameters, model expects " +
                    std::to_string(ps.size()));
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    ag::Parameter& p = ps[i];
    const std::string name = r.str();
    const std::uint64_t rows = r.u64(), cols = r.u64();
    if (name != p.name || rows != p.shape.rows || cols != p.shape.cols) {
      throw DataError("checkpoint: parameter " + std::to_string(i) + " is " + name + " [" + std::to_string(rows) +
                      "x" + std::to_string(cols) + "], expected " + p.name + " " + ag::to_string(p.shape));
    }
    for (double& x : p.value) x = r.f64();
  }
  if (!r.at_end()) throw DataError("checkpoint: trailing bytes");
  return model;
}

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  const std::string bytes = serialize_checkpoint(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path);
}

std::unique_ptr<Model> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace stackptr
