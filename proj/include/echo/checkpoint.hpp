#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "echo/training.hpp"

namespace echo {

/// One named array; dtype 0 = f32, 1 = f64.
struct CheckpointEntry {
  std::string name;
  std::uint8_t dtype = 0;
  Shape shape;
  std::vector<float> f32;
  std::vector<double> f64;

  bool operator==(const CheckpointEntry&) const = default;
};

/// "ECHC" container: config text, entries, trailing CRC32.
struct CheckpointFile {
  std::string config;
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const;
  bool operator==(const CheckpointFile&) const = default;
};

void write_checkpoint_file(const CheckpointFile& ck, const std::filesystem::path& path);
/// Throws DataError on a bad magic, version, truncation or CRC mismatch.
CheckpointFile read_checkpoint_file(const std::filesystem::path& path);

/// Model parameters and statistics, plus optimizer moments, progress and RNG
/// state when a trainer is given.
CheckpointFile make_checkpoint(const EchoModel<float>& model, const RunConfig& run, const Trainer* trainer = nullptr);
void save_checkpoint(const std::filesystem::path& path, const EchoModel<float>& model, const RunConfig& run,
                     const Trainer* trainer = nullptr);

struct LoadedModel {
  RunConfig run;
  std::unique_ptr<EchoModel<float>> model;
  CheckpointFile file;
};

LoadedModel load_checkpoint(const std::filesystem::path& path);

/// Restores optimizer moments, progress and RNG state saved for the same
/// stage; returns false when the checkpoint holds no state for this stage.
bool restore_trainer(const CheckpointFile& ck, Trainer& trainer);

}  // namespace echo
