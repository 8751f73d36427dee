#include "selfcrowd/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "selfcrowd/errors.hpp"
#include "selfcrowd/text_util.hpp"

namespace selfcrowd {

namespace {

constexpr const char* kMagic = "selfcrowd-checkpoint";
constexpr int kVersion = 1;

template <typename M>
void write_tensor(std::ostream& out, const std::string& name, const M& m) {
  out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << text::format_double(m(i, j));
    }
    out << '\n';
  }
}

class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  std::string next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++lineno_;
      if (!text::trim(line).empty()) return line;
    }
    fail("unexpected end of file");
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, lineno_, what); }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t lineno_ = 0;
};

template <typename M>
void read_tensor(LineReader& r, const std::string& name, M& m) {
  std::istringstream head(r.next());
  std::string word, got;
  Eigen::Index rows = 0, cols = 0;
  head >> word >> got >> rows >> cols;
  if (word != "tensor" || got != name) r.fail("expected tensor " + name);
  if (rows != m.rows() || cols != m.cols()) {
    throw DimensionError("tensor " + name + " is " + std::to_string(rows) + "x" + std::to_string(cols) +
                         ", expected " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    const std::string line = r.next();
    const auto fields = text::split(line, ',');
    if (static_cast<Eigen::Index>(fields.size()) != cols) r.fail("row of tensor " + name + " has wrong width");
    for (Eigen::Index j = 0; j < cols; ++j) {
      double v = 0.0;
      if (!text::parse_double(fields[static_cast<std::size_t>(j)], v)) r.fail("bad number in tensor " + name);
      m(i, j) = v;
    }
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const auto& m = ckpt.model;
  const auto& t = ckpt.train_config;
  out << kMagic << ' ' << kVersion << '\n';
  out << "dims " << m.feature_dim() << ' ' << m.hidden_units() << ' ' << m.num_classes() << ' '
      << m.num_workers() << '\n';
  out << "train learning_rate=" << text::format_double(t.learning_rate) << '\n'
      << "train epochs=" << t.epochs << '\n'
      << "train batch_size=" << t.batch_size << '\n'
      << "train weight_decay=" << text::format_double(t.weight_decay) << '\n'
      << "train hidden_units=" << t.hidden_units << '\n'
      << "train dropout_rate=" << text::format_double(t.dropout_rate) << '\n'
      << "train adam_beta1=" << text::format_double(t.adam_beta1) << '\n'
      << "train adam_beta2=" << text::format_double(t.adam_beta2) << '\n'
      << "train adam_epsilon=" << text::format_double(t.adam_epsilon) << '\n'
      << "train seed=" << t.seed << '\n';
  write_tensor(out, "hidden_weights", m.hidden_weights);
  write_tensor(out, "hidden_bias", m.hidden_bias);
  write_tensor(out, "output_weights", m.output_weights);
  write_tensor(out, "output_bias", m.output_bias);
  for (std::size_t r = 0; r < m.worker_matrices.size(); ++r) {
    write_tensor(out, "worker_" + std::to_string(r), m.worker_matrices[r]);
  }
  out << "end\n";
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint read_checkpoint(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  {
    std::istringstream head(r.next());
    std::string magic;
    int version = 0;
    head >> magic >> version;
    if (magic != kMagic) r.fail("not a selfcrowd checkpoint");
    if (version != kVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  }
  int d = 0, h = 0, c = 0, w = 0;
  {
    std::istringstream dims(r.next());
    std::string word;
    dims >> word >> d >> h >> c >> w;
    if (word != "dims" || d < 1 || h < 1 || c < 2 || w < 1) r.fail("bad dims line");
  }
  Checkpoint ckpt;
  auto& t = ckpt.train_config;
  for (int k = 0; k < 10; ++k) {
    const std::string line = r.next();
    if (line.rfind("train ", 0) != 0) r.fail("expected a train line");
    const auto kv = std::string_view(line).substr(6);
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) r.fail("expected train key=value");
    const auto key = kv.substr(0, eq);
    const auto val = kv.substr(eq + 1);
    long long n = 0;
    bool ok = true;
    if (key == "learning_rate") ok = text::parse_double(val, t.learning_rate);
    else if (key == "weight_decay") ok = text::parse_double(val, t.weight_decay);
    else if (key == "dropout_rate") ok = text::parse_double(val, t.dropout_rate);
    else if (key == "adam_beta1") ok = text::parse_double(val, t.adam_beta1);
    else if (key == "adam_beta2") ok = text::parse_double(val, t.adam_beta2);
    else if (key == "adam_epsilon") ok = text::parse_double(val, t.adam_epsilon);
    else if (key == "epochs") { ok = text::parse_int(val, n); t.epochs = static_cast<int>(n); }
    else if (key == "batch_size") { ok = text::parse_int(val, n); t.batch_size = static_cast<int>(n); }
    else if (key == "hidden_units") { ok = text::parse_int(val, n); t.hidden_units = static_cast<int>(n); }
    else if (key == "seed") {
      std::istringstream s{std::string(val)};
      ok = static_cast<bool>(s >> t.seed);
    } else r.fail("unknown train key '" + std::string(key) + "'");
    if (!ok) r.fail("bad value for train " + std::string(key));
  }
  ckpt.model = CrowdModel::zeros(d, h, c, w);
  auto& m = ckpt.model;
  read_tensor(r, "hidden_weights", m.hidden_weights);
  read_tensor(r, "hidden_bias", m.hidden_bias);
  read_tensor(r, "output_weights", m.output_weights);
  read_tensor(r, "output_bias", m.output_bias);
  for (std::size_t k = 0; k < m.worker_matrices.size(); ++k) {
    read_tensor(r, "worker_" + std::to_string(k), m.worker_matrices[k]);
  }
  if (text::trim(r.next()) != "end") r.fail("expected end");
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return read_checkpoint(in, path.string());
}

}  // namespace selfcrowd
