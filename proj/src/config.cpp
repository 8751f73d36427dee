#include "selfcrowd/config.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "selfcrowd/errors.hpp"
#include "selfcrowd/rng.hpp"
#include "selfcrowd/text_util.hpp"

namespace selfcrowd {

namespace pt = boost::property_tree;

namespace {

enum SeedStream : std::uint64_t { kSynthSeed = 21, kSparsitySeed = 22, kSelfTrainSeed = 23, kSweepSeed = 24 };

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"run", {"seed", "dataset", "output_dir"}},
      {"synth",
       {"num_classes", "num_instances", "num_test_instances", "feature_dim", "class_priors", "class_skew",
        "cluster_separation", "num_workers", "worker_accuracy_mean", "worker_accuracy_std",
        "annotations_per_instance_mean", "seed"}},
      {"sparsity", {"removal_fraction", "seed"}},
      {"train",
       {"learning_rate", "epochs", "batch_size", "weight_decay", "hidden_units", "dropout_rate", "adam_beta1",
        "adam_beta2", "adam_epsilon"}},
      {"selftrain", {"strategy", "pseudo_per_iteration", "num_iterations", "retrain_mode", "seed"}},
      {"sweep", {"removal_fractions", "repeats", "methods", "seed", "jobs"}},
  };
  return keys;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  std::optional<std::string> raw(const std::string& path) const {
    auto v = tree_.get_optional<std::string>(pt::ptree::path_type(path, '.'));
    if (!v) return std::nullopt;
    return std::string(text::trim(*v));
  }

  template <typename Int>
  void integer(const std::string& path, Int& out) const {
    auto v = raw(path);
    if (!v) return;
    long long n = 0;
    if (!text::parse_int(*v, n)) throw ConfigError(path, "expected an integer, got '" + *v + "'");
    out = static_cast<Int>(n);
  }

  void seed(const std::string& path, std::uint64_t& out) const {
    auto v = raw(path);
    if (!v) return;
    std::uint64_t n = 0;
    std::istringstream s(*v);
    if (!(s >> n) || !s.eof()) throw ConfigError(path, "expected an unsigned 64-bit seed, got '" + *v + "'");
    out = n;
  }

  void real(const std::string& path, double& out) const {
    auto v = raw(path);
    if (!v) return;
    if (!text::parse_double(*v, out)) throw ConfigError(path, "expected a number, got '" + *v + "'");
  }

  void reals(const std::string& path, std::vector<double>& out) const {
    auto v = raw(path);
    if (!v) return;
    out.clear();
    if (v->empty()) return;
    for (auto f : text::split(*v, ',')) {
      double x = 0.0;
      if (!text::parse_double(f, x)) throw ConfigError(path, "expected a comma-separated list of numbers");
      out.push_back(x);
    }
  }

  void words(const std::string& path, std::vector<std::string>& out) const {
    auto v = raw(path);
    if (!v) return;
    out.clear();
    for (auto f : text::split(*v, ',')) {
      auto w = text::trim(f);
      if (!w.empty()) out.emplace_back(w);
    }
  }

 private:
  const pt::ptree& tree_;
};

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (k) s += ',';
    s += text::format_double(xs[k]);
  }
  return s;
}

std::string join(const std::vector<std::string>& xs) {
  std::string s;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (k) s += ',';
    s += xs[k];
  }
  return s;
}

}  // namespace

void RunConfig::validate() const {
  synth.validate();
  sparsity.validate();
  selftrain.validate();
  sweep.validate();
}

RunConfig parse_run_config(std::string_view ini_text, const std::vector<std::string>& overrides,
                           const std::optional<std::string>& env_output_dir) {
  pt::ptree tree;
  {
    std::istringstream in{std::string(ini_text)};
    try {
      pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
      throw ConfigError("<file>", "line " + std::to_string(e.line()) + ": " + e.message());
    }
  }
  if (env_output_dir) tree.put(pt::ptree::path_type("run.output_dir", '.'), *env_output_dir);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError(o, "override must look like section.key=value");
    }
    tree.put(pt::ptree::path_type(std::string(text::trim(std::string_view(o).substr(0, eq))), '.'),
             std::string(text::trim(std::string_view(o).substr(eq + 1))));
  }

  for (const auto& [section, body] : tree) {
    auto it = known_keys().find(section);
    if (it == known_keys().end()) throw ConfigError(section, "unknown section");
    if (!body.data().empty() && body.empty()) throw ConfigError(section, "key outside of a section");
    for (const auto& [key, value] : body) {
      if (!it->second.contains(key)) throw ConfigError(section + "." + key, "unknown key");
    }
  }

  const Reader r(tree);
  RunConfig c;
  r.seed("run.seed", c.seed);
  if (auto v = r.raw("run.dataset")) c.dataset_dir = *v;
  if (auto v = r.raw("run.output_dir")) c.output_dir = *v;

  auto& s = c.synth;
  s.seed = derive_seed(c.seed, {kSynthSeed});
  r.integer("synth.num_classes", s.num_classes);
  r.integer("synth.num_instances", s.num_instances);
  r.integer("synth.num_test_instances", s.num_test_instances);
  r.integer("synth.feature_dim", s.feature_dim);
  r.reals("synth.class_priors", s.class_priors);
  if (r.raw("synth.class_skew")) {
    if (!s.class_priors.empty()) throw ConfigError("synth.class_skew", "conflicts with synth.class_priors");
    double skew = 1.0;
    r.real("synth.class_skew", skew);
    if (!(skew >= 1.0)) throw ConfigError("synth.class_skew", "must be >= 1");
    if (s.num_classes < 2) throw ConfigError("synth.num_classes", "must be >= 2");
    s.class_priors = skewed_priors(s.num_classes, skew);
  }
  r.real("synth.cluster_separation", s.cluster_separation);
  r.integer("synth.num_workers", s.num_workers);
  r.real("synth.worker_accuracy_mean", s.worker_accuracy_mean);
  r.real("synth.worker_accuracy_std", s.worker_accuracy_std);
  r.real("synth.annotations_per_instance_mean", s.annotations_per_instance_mean);
  r.seed("synth.seed", s.seed);

  c.sparsity.seed = derive_seed(c.seed, {kSparsitySeed});
  r.real("sparsity.removal_fraction", c.sparsity.removal_fraction);
  r.seed("sparsity.seed", c.sparsity.seed);

  auto& t = c.selftrain.train;
  r.real("train.learning_rate", t.learning_rate);
  r.integer("train.epochs", t.epochs);
  r.integer("train.batch_size", t.batch_size);
  r.real("train.weight_decay", t.weight_decay);
  r.integer("train.hidden_units", t.hidden_units);
  r.real("train.dropout_rate", t.dropout_rate);
  r.real("train.adam_beta1", t.adam_beta1);
  r.real("train.adam_beta2", t.adam_beta2);
  r.real("train.adam_epsilon", t.adam_epsilon);

  auto& st = c.selftrain;
  st.seed = derive_seed(c.seed, {kSelfTrainSeed});
  if (auto v = r.raw("selftrain.strategy")) {
    auto parsed = parse_strategy(*v);
    if (!parsed) throw ConfigError("selftrain.strategy", "expected random, confidence or balanced, got '" + *v + "'");
    st.strategy = *parsed;
  }
  r.integer("selftrain.pseudo_per_iteration", st.pseudo_per_iteration);
  r.integer("selftrain.num_iterations", st.num_iterations);
  if (auto v = r.raw("selftrain.retrain_mode")) {
    auto parsed = parse_retrain_mode(*v);
    if (!parsed) throw ConfigError("selftrain.retrain_mode", "expected cold or warm, got '" + *v + "'");
    st.retrain_mode = *parsed;
  }
  r.seed("selftrain.seed", st.seed);
  t.seed = st.seed;

  auto& sw = c.sweep;
  sw.seed = derive_seed(c.seed, {kSweepSeed});
  r.reals("sweep.removal_fractions", sw.removal_fractions);
  r.integer("sweep.repeats", sw.repeats);
  r.words("sweep.methods", sw.methods);
  r.seed("sweep.seed", sw.seed);
  r.integer("sweep.jobs", sw.jobs);

  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::string text;
  if (!path.empty()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("<file>", "cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  std::optional<std::string> env;
  if (const char* v = std::getenv(kOutputDirEnv); v != nullptr && *v != '\0') env = v;
  return parse_run_config(text, overrides, env);
}

std::string to_ini(const RunConfig& c) {
  const auto f = [](double v) { return text::format_double(v); };
  std::ostringstream o;
  o << "[run]\n"
    << "seed=" << c.seed << '\n'
    << "dataset=" << c.dataset_dir.string() << '\n'
    << "output_dir=" << c.output_dir.string() << "\n\n";
  const auto& s = c.synth;
  o << "[synth]\n"
    << "num_classes=" << s.num_classes << '\n'
    << "num_instances=" << s.num_instances << '\n'
    << "num_test_instances=" << s.num_test_instances << '\n'
    << "feature_dim=" << s.feature_dim << '\n'
    << "class_priors=" << join(s.resolved_priors()) << '\n'
    << "cluster_separation=" << f(s.cluster_separation) << '\n'
    << "num_workers=" << s.num_workers << '\n'
    << "worker_accuracy_mean=" << f(s.worker_accuracy_mean) << '\n'
    << "worker_accuracy_std=" << f(s.worker_accuracy_std) << '\n'
    << "annotations_per_instance_mean=" << f(s.annotations_per_instance_mean) << '\n'
    << "seed=" << s.seed << "\n\n";
  o << "[sparsity]\n"
    << "removal_fraction=" << f(c.sparsity.removal_fraction) << '\n'
    << "seed=" << c.sparsity.seed << "\n\n";
  const auto& t = c.selftrain.train;
  o << "[train]\n"
    << "learning_rate=" << f(t.learning_rate) << '\n'
    << "epochs=" << t.epochs << '\n'
    << "batch_size=" << t.batch_size << '\n'
    << "weight_decay=" << f(t.weight_decay) << '\n'
    << "hidden_units=" << t.hidden_units << '\n'
    << "dropout_rate=" << f(t.dropout_rate) << '\n'
    << "adam_beta1=" << f(t.adam_beta1) << '\n'
    << "adam_beta2=" << f(t.adam_beta2) << '\n'
    << "adam_epsilon=" << f(t.adam_epsilon) << "\n\n";
  const auto& st = c.selftrain;
  o << "[selftrain]\n"
    << "strategy=" << strategy_name(st.strategy) << '\n'
    << "pseudo_per_iteration=" << st.pseudo_per_iteration << '\n'
    << "num_iterations=" << st.num_iterations << '\n'
    << "retrain_mode=" << retrain_mode_name(st.retrain_mode) << '\n'
    << "seed=" << st.seed << "\n\n";
  const auto& sw = c.sweep;
  o << "[sweep]\n"
    << "removal_fractions=" << join(sw.removal_fractions) << '\n'
    << "repeats=" << sw.repeats << '\n'
    << "methods=" << join(sw.methods) << '\n'
    << "seed=" << sw.seed << '\n'
    << "jobs=" << sw.jobs << '\n';
  return o.str();
}

}  // namespace selfcrowd
