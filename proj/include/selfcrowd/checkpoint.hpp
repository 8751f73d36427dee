#pragma once

#include <filesystem>
#include <iosfwd>

#include "selfcrowd/crowdlayer.hpp"

namespace selfcrowd {

// Text checkpoint, layout documented in docs/checkpoint.md:
//
//   selfcrowd-checkpoint 1
//   dims <feature_dim> <hidden_units> <num_classes> <num_workers>
//   train <key>=<value> ...       one line per TrainConfig field
//   tensor <name> <rows> <cols>   followed by <rows> lines of <cols> values
//   ...
//   end
//
// Tensors appear in CrowdModel::tensors() order, values row-major, written
// as shortest round-trip decimals.

struct Checkpoint {
  CrowdModel model;
  TrainConfig train_config;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws ParseError / DimensionError on malformed input.
Checkpoint read_checkpoint(std::istream& in, const std::string& source = "<stream>");
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace selfcrowd
