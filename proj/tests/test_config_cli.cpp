#include "doctest.h"

#include <cstdlib>
#include <sstream>

#include <sys/wait.h>

#include "json.hpp"
#include "selfcrowd/checkpoint.hpp"
#include "selfcrowd/cli.hpp"
#include "selfcrowd/config.hpp"
#include "selfcrowd/crowdlayer.hpp"
#include "selfcrowd/dataset_io.hpp"
#include "selfcrowd/errors.hpp"
#include "selfcrowd/report.hpp"
#include "selfcrowd/text_util.hpp"
#include "test_support.hpp"

using namespace selfcrowd;
namespace fs = std::filesystem;

namespace {

const fs::path kExample = fs::path(SELFCROWD_SOURCE_DIR) / "configs" / "example.ini";

std::string config_field_error(const std::string& ini, const std::vector<std::string>& overrides = {}) {
  try {
    parse_run_config(ini, overrides);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

// Small, fast configuration shared by the command tests.
RunConfig tiny(const fs::path& out) {
  auto c = parse_run_config(testing::slurp(kExample));
  c.output_dir = out;
  c.synth.num_instances = 200;
  c.synth.num_test_instances = 200;
  c.selftrain.train.epochs = 2;
  c.selftrain.pseudo_per_iteration = 40;
  c.selftrain.num_iterations = 3;
  return c;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SELFCROWD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("empty config gives the documented defaults") {
  const auto c = parse_run_config("");
  CHECK(c.seed == 1);
  CHECK(c.output_dir == "out");
  CHECK(c.dataset_dir.empty());
  CHECK(c.synth.num_classes == 8);
  CHECK(c.synth.num_workers == 59);
  CHECK(c.synth.worker_accuracy_mean == 0.692);
  CHECK(c.synth.annotations_per_instance_mean == 2.547);
  CHECK(c.selftrain.strategy == Strategy::kBalanced);
  CHECK(c.selftrain.pseudo_per_iteration == 10000);
  CHECK(c.selftrain.num_iterations == 14);
  CHECK(c.selftrain.train.epochs == 25);
  CHECK(c.selftrain.train.batch_size == 512);
  CHECK(c.selftrain.train.learning_rate == 0.001);
  CHECK(c.selftrain.train.weight_decay == 0.0005);
  CHECK(c.selftrain.train.hidden_units == 128);
  CHECK(c.sweep.removal_fractions.size() == 10);
  CHECK(c.sweep.repeats == 5);
  CHECK(c.sweep.methods.size() == 4);
  CHECK(c.selftrain.train.seed == c.selftrain.seed);
  CHECK(c.synth.seed != c.selftrain.seed);
}

TEST_CASE("to_ini round trips") {
  for (const std::string& ini : {std::string(), testing::slurp(kExample)}) {
    const auto a = parse_run_config(ini);
    const auto text = to_ini(a);
    const auto b = parse_run_config(text);
    CHECK(to_ini(b) == text);
    CHECK(b.synth.resolved_priors() == a.synth.resolved_priors());
    CHECK(b.selftrain.seed == a.selftrain.seed);
  }
}

TEST_CASE("seeds derive from the master seed unless given") {
  const auto a = parse_run_config("[run]\nseed = 5\n");
  const auto b = parse_run_config("[run]\nseed = 6\n");
  CHECK(a.synth.seed != b.synth.seed);
  CHECK(a.selftrain.seed != b.selftrain.seed);
  const auto c = parse_run_config("[run]\nseed = 5\n[selftrain]\nseed = 42\n");
  CHECK(c.selftrain.seed == 42);
  CHECK(c.synth.seed == a.synth.seed);
}

TEST_CASE("config errors name the field") {
  CHECK(config_field_error("[synth]\nclass_priors = 0.5, 0.4\nnum_classes = 2\n") == "synth.class_priors");
  CHECK(config_field_error("[synth]\nbogus = 1\n") == "synth.bogus");
  CHECK(config_field_error("[nope]\nx = 1\n") == "nope");
  CHECK(config_field_error("[train]\nepochs = ten\n") == "train.epochs");
  CHECK(config_field_error("[selftrain]\nstrategy = margin\n") == "selftrain.strategy");
  CHECK(config_field_error("", {"train.batch_size=0"}) == "train.batch_size");
  CHECK(config_field_error("", {"oops"}) == "oops");
  CHECK(config_field_error("[synth]\nnum_workers = 3\nannotations_per_instance_mean = 4\n") ==
        "synth.annotations_per_instance_mean");
}

TEST_CASE("override precedence: --set beats env beats file") {
  const std::string ini = "[run]\noutput_dir = from_file\n";
  CHECK(parse_run_config(ini).output_dir == "from_file");
  CHECK(parse_run_config(ini, {}, std::string("from_env")).output_dir == "from_env");
  CHECK(parse_run_config(ini, {"run.output_dir=from_flag"}, std::string("from_env")).output_dir == "from_flag");
  CHECK(parse_run_config("[train]\nepochs = 3\n", {"train.epochs=4"}).selftrain.train.epochs == 4);
}

TEST_CASE("gen is byte-identical across invocations") {
  testing::TempDir dir;
  auto c = tiny(dir / "a");
  cli::cmd_gen(c);
  c.output_dir = dir / "b";
  cli::cmd_gen(c);
  for (const char* f : {"train/features.csv", "train/annotations.csv", "train/truth.csv", "train/meta",
                        "test/features.csv", "test/truth.csv"}) {
    CAPTURE(f);
    CHECK(testing::slurp(dir / "a" / f) == testing::slurp(dir / "b" / f));
    CHECK_FALSE(testing::slurp(dir / "a" / f).empty());
  }
  const auto ds = load_dataset(dir / "a" / "train");
  CHECK(ds.num_classes == 8);
  CHECK(ds.num_instances() == 200);
  CHECK(fs::exists(dir / "a" / "provenance.json"));
}

TEST_CASE("selftrain outputs") {
  testing::TempDir dir;
  auto c = tiny(dir / "bal");
  REQUIRE(cli::cmd_selftrain(c) == cli::kOk);
  const auto hist = lines(testing::slurp(dir / "bal" / "history.csv"));
  REQUIRE(hist.size() == 1 + 4);  // header + iterations 0..3
  CHECK(hist[0].rfind("iteration,test_accuracy,r_pseudo,r_combined", 0) == 0);

  const auto sel = lines(testing::slurp(dir / "bal" / "selections.csv"));
  CHECK(sel.size() == 1 + 3 * 40);
  CHECK(sel[0] == "iteration,instance,worker,label,entropy,strategy");
  CHECK(sel[1].substr(sel[1].size() - 9) == ",balanced");

  const auto run = nlohmann::json::parse(testing::slurp(dir / "bal" / "run.json"));
  CHECK(run["command"] == "selftrain");
  CHECK(run["iterations_completed"] == 3);
  CHECK(run["config_hash"].get<std::string>().size() == 16);

  SUBCASE("confidence with the same seed shares the iteration-0 row only") {
    c.output_dir = dir / "conf";
    c.selftrain.strategy = Strategy::kConfidence;
    REQUIRE(cli::cmd_selftrain(c) == cli::kOk);
    const auto other = lines(testing::slurp(dir / "conf" / "history.csv"));
    REQUIRE(other.size() == hist.size());
    CHECK(other[1] == hist[1]);
    CHECK(other != hist);
  }
  SUBCASE("replaying run.json reproduces history.csv") {
    auto replay = cli::replay_config(dir / "bal" / "run.json", {"run.output_dir=" + (dir / "replay").string()});
    REQUIRE(cli::cmd_selftrain(replay) == cli::kOk);
    CHECK(testing::slurp(dir / "replay" / "history.csv") == testing::slurp(dir / "bal" / "history.csv"));
    CHECK(testing::slurp(dir / "replay" / "selections.csv") == testing::slurp(dir / "bal" / "selections.csv"));
  }
  SUBCASE("the checkpoint reproduces the final test accuracy") {
    cli::cmd_gen(c);  // same synth seed, so test/ matches what selftrain used
    const double acc = cli::cmd_eval(dir / "bal" / "model.ckpt", dir / "bal" / "test");
    CHECK(acc == run["final"]["test_accuracy"].get<double>());
  }
  SUBCASE("divergence writes a partial history and reports it") {
    c.output_dir = dir / "div";
    c.selftrain.train.learning_rate = 1e200;
    CHECK(cli::cmd_selftrain(c) == cli::kDivergence);
    CHECK(lines(testing::slurp(dir / "div" / "history.csv")).size() == 1);
    const auto div = nlohmann::json::parse(testing::slurp(dir / "div" / "run.json"));
    CHECK(div["diverged"].is_string());
  }
}

TEST_CASE("checkpoint round trip is exact") {
  Checkpoint ck;
  ck.model = testing::random_model(4, 5, 3, 2, 17);
  ck.model.hidden_weights(0, 0) = 1.0 / 3.0;
  ck.model.output_bias(1) = -1e-300;
  ck.train_config.learning_rate = 0.0123;
  ck.train_config.seed = 18446744073709551615ull;
  std::stringstream ss;
  write_checkpoint(ss, ck);
  const auto back = read_checkpoint(ss);
  CHECK(back.model == ck.model);
  CHECK(back.train_config.learning_rate == 0.0123);
  CHECK(back.train_config.seed == ck.train_config.seed);

  std::string text;
  {
    std::stringstream again;
    write_checkpoint(again, ck);
    text = again.str();
  }
  std::istringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(read_checkpoint(truncated), ParseError);
}

TEST_CASE("sweep command") {
  testing::TempDir dir;
  auto c = tiny(dir / "s1");
  c.selftrain.num_iterations = 1;
  c.selftrain.train.epochs = 1;

  SUBCASE("single p, single repeat: one row per method") {
    c.sweep.removal_fractions = {0.0};
    c.sweep.repeats = 1;
    REQUIRE(cli::cmd_sweep(c) == cli::kOk);
    const auto rows = lines(testing::slurp(dir / "s1" / "sweep.csv"));
    CHECK(rows.size() == 1 + 4);
    CHECK(rows[0] == "removal_fraction,method,mean_accuracy,std_accuracy,runs_ok,errors");
  }
  SUBCASE("default grid gives 40 rows and repeats identically") {
    c.sweep.removal_fractions = SweepConfig{}.removal_fractions;
    c.sweep.repeats = 5;
    c.selftrain.train.hidden_units = 4;
    REQUIRE(cli::cmd_sweep(c) == cli::kOk);
    c.output_dir = dir / "s2";
    c.sweep.jobs = 2;
    REQUIRE(cli::cmd_sweep(c) == cli::kOk);
    const auto first = testing::slurp(dir / "s1" / "sweep.csv");
    CHECK(lines(first).size() == 1 + 40);
    CHECK(first == testing::slurp(dir / "s2" / "sweep.csv"));
  }
  SUBCASE("every cell failing is a failure") {
    c.sweep.removal_fractions = {0.0};
    c.sweep.repeats = 1;
    c.sweep.methods = {"balanced"};
    c.selftrain.train.learning_rate = 1e200;
    CHECK(cli::cmd_sweep(c) == cli::kFailure);
  }
}

TEST_CASE("dataset bundles can be used instead of generation") {
  testing::TempDir dir;
  auto c = tiny(dir / "gen");
  cli::cmd_gen(c);
  auto from_disk = c;
  from_disk.dataset_dir = dir / "gen";
  const auto a = cli::prepare_inputs(c, false);
  const auto b = cli::prepare_inputs(from_disk, false);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);

  c.sparsity.removal_fraction = 0.5;
  const auto sparse = cli::prepare_inputs(c, true);
  CHECK(sparse.train.annotations.size() ==
        a.train.annotations.size() - static_cast<std::size_t>(std::llround(0.5 * static_cast<double>(a.train.annotations.size()))));
}

TEST_CASE("command-line exit codes") {
  testing::TempDir dir;
  const std::string out = (dir / "out").string();
  const std::string example = kExample.string();
  const std::string quick = " --set synth.num_instances=100 --set synth.num_test_instances=100"
                            " --set train.epochs=1 --set selftrain.num_iterations=1";

  CHECK(run_cli("--version") == 0);
  CHECK(run_cli("") == cli::kConfigError);
  CHECK(run_cli("frobnicate") == cli::kConfigError);
  CHECK(run_cli("gen -c " + example + " -o " + out + quick) == cli::kOk);
  CHECK(run_cli("validate --dataset " + out + "/train") == cli::kOk);
  CHECK(run_cli("gen -c " + example + " -o " + out + " --set synth.class_priors=0.5,0.1") == cli::kConfigError);
  CHECK(run_cli("gen -c /nonexistent.ini -o " + out) == cli::kConfigError);
  CHECK(run_cli("selftrain -c " + example + " -o " + out + "/st" + quick) == cli::kOk);
  CHECK(run_cli("eval --checkpoint " + out + "/st/model.ckpt --dataset " + out + "/test") == cli::kOk);
  CHECK(run_cli("selftrain --replay " + out + "/st/run.json -o " + out + "/st2") == cli::kOk);
  CHECK(testing::slurp(dir / "out" / "st" / "history.csv") == testing::slurp(dir / "out" / "st2" / "history.csv"));
  CHECK(run_cli("selftrain -c " + example + " -o " + out + "/div" + quick + " --set train.learning_rate=1e200") ==
        cli::kDivergence);

  testing::write_file(dir / "out" / "train" / "annotations.csv", "instance,worker,label\n0,0,0\n");
  CHECK(run_cli("validate --dataset " + out + "/train") == cli::kDataError);
  CHECK(run_cli("selftrain -c " + example + " -o " + out + "/x --set run.dataset=" + out + quick) ==
        cli::kDataError);

  const std::string env_out = (dir / "env").string();
  const std::string env_cmd = std::string("SELFCROWD_OUTPUT_DIR=") + env_out + " " + SELFCROWD_CLI_PATH + " gen -c " +
                              example + quick + " >/dev/null 2>&1";
  CHECK(std::system(env_cmd.c_str()) == 0);
  CHECK(fs::exists(dir / "env" / "train" / "meta"));
}
