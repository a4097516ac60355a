#pragma once

#include <cstdint>

namespace plotkit {

struct IntRange {
  int min = 0;
  int max = 0;

  bool contains(int v) const noexcept { return v >= min && v <= max; }
  bool empty() const noexcept { return min > max; }
};

struct PipelineConfig {
  IntRange char_range{3, 6};
  int max_top_points = 4;
  IntRange sub_range{3, 4};
  // Candidates requested per pipeline step (k).
  int candidates_per_step = 4;
  int max_step_retries = 2;
  bool annotate_scenes = true;
  std::uint64_t seed = 0;

  // Sampling parameters.
  double creative_temperature = 0.9;
  double structural_temperature = 0.3;
  int max_tokens = 256;

  // Throws PreconditionError when a range is empty or k < 1.
  void check() const;

  // Defaults with scene annotation disabled.
  static PipelineConfig strict_replication() {
    PipelineConfig cfg;
    cfg.annotate_scenes = false;
    return cfg;
  }
};

}  // namespace plotkit
