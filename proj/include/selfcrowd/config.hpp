#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "selfcrowd/selftrain.hpp"
#include "selfcrowd/synth.hpp"

namespace selfcrowd {

/// Everything a CLI command needs. Every field has a default, so an empty
/// config file is valid.
///
/// Seeds: `seed` is the master seed. synth.seed, sparsity.seed,
/// selftrain.seed and sweep.seed default to values derived from it; an
/// explicit value in the file or on the command line wins.
struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path dataset_dir;  // bundle root with train/ and test/; empty = generate from [synth]
  std::filesystem::path output_dir = "out";
  SynthConfig synth;
  SparsityConfig sparsity;
  SelfTrainConfig selftrain;
  SweepConfig sweep;

  void validate() const;
};

/// Environment variable that overrides run.output_dir (flags still win).
inline constexpr const char* kOutputDirEnv = "SELFCROWD_OUTPUT_DIR";

/// Parses INI text:
///
///   [run]       seed, dataset, output_dir
///   [synth]     num_classes, num_instances, num_test_instances, feature_dim,
///               class_priors (comma list), class_skew (max/min ratio of
///               geometric priors, alternative to class_priors),
///               cluster_separation, num_workers, worker_accuracy_mean,
///               worker_accuracy_std, annotations_per_instance_mean, seed
///   [sparsity]  removal_fraction, seed
///   [train]     learning_rate, epochs, batch_size, weight_decay,
///               hidden_units, dropout_rate, adam_beta1, adam_beta2, adam_epsilon
///   [selftrain] strategy, pseudo_per_iteration, num_iterations,
///               retrain_mode, seed
///   [sweep]     removal_fractions, repeats, methods, seed, jobs
///
/// `overrides` are "section.key=value" strings applied on top of the file
/// (after `env_output_dir`, if given). Unknown keys and bad values throw
/// ConfigError naming "section.key".
RunConfig parse_run_config(std::string_view ini_text, const std::vector<std::string>& overrides = {},
                           const std::optional<std::string>& env_output_dir = std::nullopt);

/// Reads `path` (empty path = no file) and the output-dir environment
/// variable, then parse_run_config().
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Canonical INI with every field spelled out and seeds resolved.
/// parse_run_config(to_ini(c)) reproduces c.
std::string to_ini(const RunConfig& config);

}  // namespace selfcrowd
