#include "mob2vec/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mob2vec/version.hpp"

namespace mob2vec {

namespace {

using nlohmann::json;
using Code = ModelFormatError::Code;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }

  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  void need(std::size_t n, const char* what) const {
    if (data_.size() - pos_ < n) throw ModelFormatError(Code::kTruncated, std::string("model: truncated in ") + what);
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::int64_t i64(const char* what) { return static_cast<std::int64_t>(u64(what)); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::string str(const char* what) { return bytes(count(1, what), what); }

  /// Element count whose payload of `width` bytes each must still fit.
  std::size_t count(std::size_t width, const char* what) {
    const std::uint64_t n = u64(what);
    if (width > 0 && n > (data_.size() - pos_) / width) {
      throw ModelFormatError(Code::kTruncated, std::string("model: truncated in ") + what);
    }
    return static_cast<std::size_t>(n);
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

json training_json(const TrainingConfig& c) {
  return {{"dim", c.dim},
          {"epochs", c.epochs},
          {"initial_lr", c.initial_lr},
          {"final_lr", c.final_lr},
          {"negatives", c.negatives},
          {"noise_exponent", c.noise_exponent},
          {"window", c.window},
          {"seed", c.seed},
          {"mode", c.mode == Architecture::kDbow ? "dbow" : "dm"},
          {"fusion", c.fusion == Fusion::kSep ? "sep" : "sim"},
          {"threads", c.threads}};
}

TrainingConfig training_from(const json& j) {
  TrainingConfig c;
  c.dim = j.at("dim").get<std::size_t>();
  c.epochs = j.at("epochs").get<int>();
  c.initial_lr = j.at("initial_lr").get<double>();
  c.final_lr = j.at("final_lr").get<double>();
  c.negatives = j.at("negatives").get<int>();
  c.noise_exponent = j.at("noise_exponent").get<double>();
  c.window = j.at("window").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto mode = j.at("mode").get<std::string>();
  const auto fusion = j.at("fusion").get<std::string>();
  if ((mode != "dbow" && mode != "dm") || (fusion != "sep" && fusion != "sim")) {
    throw ModelFormatError(Code::kCorrupt, "model: unknown training mode or fusion");
  }
  c.mode = mode == "dbow" ? Architecture::kDbow : Architecture::kDm;
  c.fusion = fusion == "sep" ? Fusion::kSep : Fusion::kSim;
  c.threads = j.at("threads").get<int>();
  return c;
}

json umap_json(const UmapParams& p) {
  return {{"n_neighbors", p.n_neighbors},
          {"min_dist", p.min_dist},
          {"spread", p.spread},
          {"epochs", p.epochs},
          {"transform_epochs", p.transform_epochs},
          {"negative_sample_rate", p.negative_sample_rate},
          {"learning_rate", p.learning_rate},
          {"out_dim", p.out_dim},
          {"seed", p.seed},
          {"init", p.init == UmapInit::kPca ? "pca" : "random"},
          {"threads", p.threads}};
}

UmapParams umap_from(const json& j) {
  UmapParams p;
  p.n_neighbors = j.at("n_neighbors").get<std::size_t>();
  p.min_dist = j.at("min_dist").get<double>();
  p.spread = j.at("spread").get<double>();
  p.epochs = j.at("epochs").get<int>();
  p.transform_epochs = j.at("transform_epochs").get<int>();
  p.negative_sample_rate = j.at("negative_sample_rate").get<int>();
  p.learning_rate = j.at("learning_rate").get<double>();
  p.out_dim = j.at("out_dim").get<std::size_t>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.init = j.at("init").get<std::string>() == "random" ? UmapInit::kRandom : UmapInit::kPca;
  p.threads = j.at("threads").get<int>();
  return p;
}

void write_floats(Writer& w, const Matrix& m) {
  w.u64(m.rows());
  w.u64(m.cols());
  for (const float v : m.data()) w.f32(v);
}

Matrix read_floats(Reader& r, const char* what) {
  const std::size_t rows = r.count(0, what);
  const std::size_t cols = r.count(0, what);
  if (cols != 0 && rows > std::numeric_limits<std::size_t>::max() / 4 / cols) {
    throw ModelFormatError(Code::kCorrupt, std::string("model: oversized table in ") + what);
  }
  r.need(rows * cols * 4, what);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = r.f32(what);
  return m;
}

void write_doubles(Writer& w, const Eigen::MatrixXd& m) {
  w.u64(static_cast<std::uint64_t>(m.rows()));
  w.u64(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
  }
}

Eigen::MatrixXd read_doubles(Reader& r, const char* what) {
  const std::size_t rows = r.count(0, what);
  const std::size_t cols = r.count(0, what);
  if (cols != 0 && rows > std::numeric_limits<std::size_t>::max() / 8 / cols) {
    throw ModelFormatError(Code::kCorrupt, std::string("model: oversized table in ") + what);
  }
  r.need(rows * cols * 8, what);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f64(what);
  }
  return m;
}

void write_embedding(Writer& w, const EmbeddingModel& m) {
  w.u64(m.vocabulary.size());
  for (std::size_t i = 0; i < m.vocabulary.size(); ++i) {
    w.i64(m.vocabulary.token(i));
    w.u64(m.vocabulary.count(i));
  }
  w.u64(m.sequence_ids.size());
  for (const auto& id : m.sequence_ids) w.str(id);
  write_floats(w, m.sequence_vectors);
  write_floats(w, m.token_input);
  write_floats(w, m.token_output);
  w.u64(m.epoch_loss.size());
  for (const double l : m.epoch_loss) w.f64(l);
  w.u64(m.skipped_empty);
}

EmbeddingModel read_embedding(Reader& r, const TrainingConfig& config) {
  EmbeddingModel m;
  m.config = config;
  const std::size_t vocab = r.count(16, "vocabulary");
  for (std::size_t i = 0; i < vocab; ++i) {
    const Token t = r.i64("vocabulary");
    const std::uint64_t c = r.u64("vocabulary");
    if (m.vocabulary.add(t, c) != i) throw ModelFormatError(Code::kCorrupt, "model: duplicate vocabulary token");
  }
  const std::size_t ids = r.count(8, "sequence ids");
  m.sequence_ids.reserve(ids);
  for (std::size_t i = 0; i < ids; ++i) m.sequence_ids.push_back(r.str("sequence ids"));
  m.sequence_vectors = read_floats(r, "sequence vectors");
  m.token_input = read_floats(r, "token input vectors");
  m.token_output = read_floats(r, "token output vectors");
  const std::size_t losses = r.count(8, "epoch loss");
  for (std::size_t i = 0; i < losses; ++i) m.epoch_loss.push_back(r.f64("epoch loss"));
  m.skipped_empty = static_cast<std::size_t>(r.u64("epoch loss"));

  const auto shape_ok = [&](const Matrix& t, std::size_t rows) {
    return t.rows() == rows && (rows == 0 || t.cols() == config.dim);
  };
  if (!shape_ok(m.sequence_vectors, ids) || !shape_ok(m.token_output, vocab) ||
      !(m.token_input.rows() == 0 || shape_ok(m.token_input, vocab))) {
    throw ModelFormatError(Code::kCorrupt, "model: table shape disagrees with header");
  }
  return m;
}

}  // namespace

void save_model(std::ostream& out, const ModelBundle& bundle) {
  const auto& model = bundle.model;
  json header;
  header["tool"] = "mob2vec";
  header["version"] = kToolVersion;
  header["training"] = training_json(model.config);
  header["symbols"] = training_json(model.symbols.config);
  header["patterns"] = model.patterns ? training_json(model.patterns->config) : json(nullptr);
  header["pattern_gap"] = model.vocabulary.gap();
  if (std::holds_alternative<PcaReducer>(bundle.reducer)) {
    header["reducer"] = {{"kind", "pca"}};
  } else if (const auto* u = std::get_if<UmapReducer>(&bundle.reducer)) {
    header["reducer"] = {{"kind", "umap"}, {"params", umap_json(u->params())}};
  } else {
    header["reducer"] = {{"kind", "none"}};
  }
  const std::string text = header.dump();

  Writer w(out);
  w.bytes(kModelMagic, sizeof kModelMagic);
  w.u32(kModelFormatVersion);
  w.str(text);

  write_embedding(w, model.symbols);
  if (model.patterns) write_embedding(w, *model.patterns);

  const auto& patterns = model.vocabulary.patterns();
  w.u64(patterns.size());
  for (const auto& p : patterns) {
    w.u64(p.symbols.size());
    for (const auto s : p.symbols) w.i64(s);
  }

  if (const auto* p = std::get_if<PcaReducer>(&bundle.reducer)) {
    write_doubles(w, p->mean());
    write_doubles(w, p->components());
    write_doubles(w, p->explained_variance());
  } else if (const auto* u = std::get_if<UmapReducer>(&bundle.reducer)) {
    write_doubles(w, u->training_data());
    write_doubles(w, u->layout());
    w.u64(u->graph().size());
    for (const auto& e : u->graph()) {
      w.u64(e.head);
      w.u64(e.tail);
      w.f64(e.weight);
    }
  }
  if (!out) throw DataError("model: write failed");
}

void save_model(const std::string& path, const ModelBundle& bundle) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("model: cannot open '" + path + "' for writing");
  save_model(out, bundle);
}

ModelBundle load_model(std::istream& in) {
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));
  const std::string magic = r.bytes(sizeof kModelMagic, "magic");
  if (std::memcmp(magic.data(), kModelMagic, sizeof kModelMagic) != 0) {
    throw ModelFormatError(Code::kVersion, "model: not a mob2vec model container");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kModelFormatVersion) {
    throw ModelFormatError(Code::kVersion, "model: unsupported format version " + std::to_string(version));
  }

  ModelBundle bundle;
  auto& model = bundle.model;
  try {
    const json header = json::parse(r.str("header"));
    model.config = training_from(header.at("training"));
    const TrainingConfig symbols_config = training_from(header.at("symbols"));
    const json& patterns_header = header.at("patterns");
    const int gap = header.at("pattern_gap").get<int>();
    const std::string kind = header.at("reducer").at("kind").get<std::string>();

    model.symbols = read_embedding(r, symbols_config);
    if (!patterns_header.is_null()) model.patterns = read_embedding(r, training_from(patterns_header));

    const std::size_t n = r.count(8, "pattern vocabulary");
    std::vector<GapPattern> patterns;
    patterns.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      GapPattern p;
      p.id = i;
      const std::size_t len = r.count(8, "pattern vocabulary");
      for (std::size_t k = 0; k < len; ++k) p.symbols.push_back(r.i64("pattern vocabulary"));
      patterns.push_back(std::move(p));
    }
    model.vocabulary = PatternVocabulary(std::move(patterns), gap);

    if (kind == "pca") {
      Eigen::VectorXd mean = read_doubles(r, "pca mean");
      Eigen::MatrixXd components = read_doubles(r, "pca components");
      Eigen::VectorXd variance = read_doubles(r, "pca variance");
      bundle.reducer = PcaReducer::from_state(std::move(mean), std::move(components), std::move(variance));
    } else if (kind == "umap") {
      const UmapParams params = umap_from(header.at("reducer").at("params"));
      PointMatrix data = read_doubles(r, "umap data");
      PointMatrix layout = read_doubles(r, "umap layout");
      if (data.rows() != layout.rows()) throw ModelFormatError(Code::kCorrupt, "model: umap data and layout differ");
      const std::size_t edges = r.count(24, "umap graph");
      std::vector<Edge> graph;
      graph.reserve(edges);
      for (std::size_t i = 0; i < edges; ++i) {
        Edge e{};
        e.head = static_cast<std::size_t>(r.u64("umap graph"));
        e.tail = static_cast<std::size_t>(r.u64("umap graph"));
        e.weight = r.f64("umap graph");
        graph.push_back(e);
      }
      bundle.reducer = UmapReducer::from_state(params, std::move(data), std::move(layout), std::move(graph));
    } else if (kind != "none") {
      throw ModelFormatError(Code::kCorrupt, "model: unknown reducer kind '" + kind + "'");
    }
  } catch (const json::exception& e) {
    throw ModelFormatError(Code::kCorrupt, std::string("model: bad header: ") + e.what());
  } catch (const ConfigError& e) {
    throw ModelFormatError(Code::kCorrupt, std::string("model: bad stored parameters: ") + e.what());
  }
  if (!r.done()) throw ModelFormatError(Code::kCorrupt, "model: trailing bytes after the last section");
  return bundle;
}

ModelBundle load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("model: cannot open '" + path + "'");
  return load_model(in);
}

}  // namespace mob2vec
