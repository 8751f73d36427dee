#include "selfcrowd/dataset_io.hpp"

#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "selfcrowd/errors.hpp"
#include "selfcrowd/text_util.hpp"

namespace selfcrowd {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  return in;
}

struct Meta {
  long long num_classes = 0, num_workers = 0, num_instances = 0, feature_dim = 0;
  bool has_truth = false;
};

Meta read_meta(const fs::path& p) {
  auto in = open_in(p);
  std::map<std::string, std::string, std::less<>> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError(p.string(), lineno, "expected key=value");
    kv.emplace(std::string(text::trim(t.substr(0, eq))), std::string(text::trim(t.substr(eq + 1))));
  }
  auto get = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError(p.string() + ": missing key '" + key + "'");
    long long v = 0;
    if (!text::parse_int(it->second, v)) throw DataError(p.string() + ": bad integer for '" + key + "'");
    return v;
  };
  if (auto it = kv.find("format"); it != kv.end() && it->second != kBundleFormat) {
    throw DataError(p.string() + ": unsupported format '" + it->second + "'");
  }
  Meta m;
  m.num_classes = get("num_classes");
  m.num_workers = get("num_workers");
  m.num_instances = get("num_instances");
  m.feature_dim = get("feature_dim");
  m.has_truth = kv.contains("has_truth") ? get("has_truth") != 0 : fs::exists(p.parent_path() / "truth.csv");
  return m;
}

bool is_header(std::string_view line, std::string_view first_field) {
  return text::trim(line).substr(0, first_field.size()) == first_field;
}

}  // namespace

void save_dataset(const CrowdDataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "meta");
    out << "format=" << kBundleFormat << '\n'
        << "num_classes=" << ds.num_classes << '\n'
        << "num_workers=" << ds.num_workers << '\n'
        << "num_instances=" << ds.num_instances() << '\n'
        << "feature_dim=" << ds.feature_dim() << '\n'
        << "has_truth=" << (ds.ground_truth ? 1 : 0) << '\n';
  }
  {
    auto out = open_out(dir / "features.csv");
    std::string row;
    for (int i = 0; i < ds.num_instances(); ++i) {
      row.clear();
      for (int k = 0; k < ds.feature_dim(); ++k) {
        if (k) row += ',';
        row += text::format_double(ds.features(i, k));
      }
      row += '\n';
      out << row;
    }
  }
  {
    auto out = open_out(dir / "annotations.csv");
    out << "instance,worker,label\n";
    for (const auto& a : ds.annotations) out << a.instance << ',' << a.worker << ',' << a.label + 1 << '\n';
  }
  const auto truth_path = dir / "truth.csv";
  if (ds.ground_truth) {
    auto out = open_out(truth_path);
    out << "instance,label\n";
    for (std::size_t i = 0; i < ds.ground_truth->size(); ++i) out << i << ',' << (*ds.ground_truth)[i] + 1 << '\n';
  } else if (fs::exists(truth_path)) {
    fs::remove(truth_path);
  }
}

CrowdDataset read_dataset(const fs::path& dir) {
  const Meta meta = read_meta(dir / "meta");
  CrowdDataset ds;
  ds.num_classes = static_cast<int>(meta.num_classes);
  ds.num_workers = static_cast<int>(meta.num_workers);

  {
    const auto path = dir / "features.csv";
    auto in = open_in(path);
    std::vector<double> values;
    std::string line;
    std::size_t lineno = 0;
    long long rows = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      const auto fields = text::split(line, ',');
      if (static_cast<long long>(fields.size()) != meta.feature_dim) {
        throw DimensionError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(meta.feature_dim) + " columns, got " + std::to_string(fields.size()));
      }
      for (auto f : fields) {
        double v = 0.0;
        if (!text::parse_double(f, v)) throw ParseError(path.string(), lineno, "bad number '" + std::string(f) + "'");
        values.push_back(v);
      }
      ++rows;
    }
    if (rows != meta.num_instances) {
      throw DimensionError(path.string() + ": meta says " + std::to_string(meta.num_instances) + " rows, found " +
                           std::to_string(rows));
    }
    ds.features = Eigen::Map<FeatureMatrix>(values.data(), rows, meta.feature_dim);
  }

  {
    const auto path = dir / "annotations.csv";
    auto in = open_in(path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      if (lineno == 1 && is_header(line, "instance")) continue;
      const auto f = text::split(line, ',');
      long long i = 0, r = 0, label = 0;
      if (f.size() != 3 || !text::parse_int(f[0], i) || !text::parse_int(f[1], r) || !text::parse_int(f[2], label)) {
        throw ParseError(path.string(), lineno, "expected 'instance,worker,label'");
      }
      if (label < 1) throw ParseError(path.string(), lineno, "label must be >= 1 (0 marks a missing annotation)");
      ds.annotations.push_back({static_cast<int>(i), static_cast<int>(r), static_cast<int>(label - 1)});
    }
  }

  if (meta.has_truth) {
    const auto path = dir / "truth.csv";
    auto in = open_in(path);
    std::vector<int> truth(static_cast<std::size_t>(meta.num_instances), -1);
    std::vector<char> seen(truth.size(), 0);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      if (lineno == 1 && is_header(line, "instance")) continue;
      const auto f = text::split(line, ',');
      long long i = 0, label = 0;
      if (f.size() != 2 || !text::parse_int(f[0], i) || !text::parse_int(f[1], label)) {
        throw ParseError(path.string(), lineno, "expected 'instance,label'");
      }
      if (label < 1) throw ParseError(path.string(), lineno, "label must be >= 1");
      if (i < 0 || i >= meta.num_instances) throw DimensionError(path.string() + ":" + std::to_string(lineno) + ": instance out of range");
      if (seen[static_cast<std::size_t>(i)]) throw ParseError(path.string(), lineno, "instance listed twice");
      seen[static_cast<std::size_t>(i)] = 1;
      truth[static_cast<std::size_t>(i)] = static_cast<int>(label - 1);
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
      if (!seen[i]) throw DimensionError(path.string() + ": no label for instance " + std::to_string(i));
    }
    ds.ground_truth = std::move(truth);
  }
  return ds;
}

CrowdDataset load_dataset(const fs::path& dir) {
  auto ds = read_dataset(dir);
  require_valid(ds);
  return ds;
}

std::vector<Annotation> read_answer_matrix(const fs::path& path) {
  auto in = open_in(path);
  std::vector<Annotation> out;
  std::string line;
  std::size_t lineno = 0;
  int instance = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    std::istringstream row(line);
    std::string tok;
    std::size_t col = 0;
    for (; row >> tok; ++col) {
      long long v = 0;
      if (!text::parse_int(tok, v) || v < -1 || v > std::numeric_limits<int>::max()) throw ParseError(path.string(), lineno, "bad entry '" + tok + "'");
      if (v >= 0) out.push_back({instance, static_cast<int>(col), static_cast<int>(v)});
    }
    if (width == 0) width = col;
    if (col != width) {
      throw ParseError(path.string(), lineno,
                       "expected " + std::to_string(width) + " columns, got " + std::to_string(col));
    }
    ++instance;
  }
  return out;
}

std::vector<int> read_label_list(const fs::path& path) {
  auto in = open_in(path);
  std::vector<int> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = text::trim(line);
    if (t.empty()) continue;
    long long v = 0;
    if (!text::parse_int(t, v) || v < 0 || v > std::numeric_limits<int>::max()) throw ParseError(path.string(), lineno, "bad label '" + std::string(t) + "'");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

}  // namespace selfcrowd
