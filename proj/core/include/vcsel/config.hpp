#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcsel/encoder.hpp"
#include "vcsel/imaging.hpp"
#include "vcsel/sfm.hpp"
#include "vcsel/waveform.hpp"

namespace vcsel {

enum class NoiseType { kGlobal, kBackground };

struct NoiseSpec {
  NoiseType type = NoiseType::kGlobal;
  std::vector<double> percentages{0, 5, 10, 15, 20};
  std::uint32_t seeds = 20;
};

struct RunConfig {
  // input
  std::vector<std::string> images;
  std::string builtin;  // "digit4" when no image files are given
  ChannelPolicy channel_policy = ChannelPolicy::kAverage;
  int threshold = 128;
  std::string mnist_images;
  std::string mnist_labels;
  std::uint32_t mnist_count = 100;
  std::uint32_t mnist_offset = 0;
  int mnist_threshold = 1;  // pixel >= threshold is ink

  std::string bank = "edge8_2x2";
  EncodingConfig encoding;  // depth and baseline come from calibration
  bool encoding_3x3_preset = true;  // 110 ps separation for 3x3 banks
  SfmParams sfm;
  SimConfig sim;
  double record_period_ps = 1.0;  // trace decimation target
  double baseline_margin = 0.05;
  std::optional<double> quiet_sum;  // calibration quiet reference override
  int depth_iterations = 22;
  int lock_iterations = 30;
  double refractory_ns = 1.0;

  NoiseSpec noise;
  bool oracle_only = false;
  std::uint32_t simulate_sample = 0;

  std::string output_dir = "out";
  std::uint32_t workers = 0;  // 0: hardware concurrency
  bool export_traces = false;
  bool export_waveform = false;

  static RunConfig defaults() { return {}; }
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
  nlohmann::json to_json() const;
  void validate() const;

  // Effective settings derived from the fields above.
  SimConfig sim_config() const;
  EncodingConfig encoding_for(const std::vector<KernelOp>& kernels) const;
  CalibrationOptions calibration_options() const;
  std::uint32_t worker_count() const;
  // 64-bit FNV-1a of the canonical JSON dump.
  std::uint64_t hash() const;
};

}  // namespace vcsel
