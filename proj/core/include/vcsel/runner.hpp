#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcsel/config.hpp"
#include "vcsel/detector.hpp"
#include "vcsel/encoder.hpp"
#include "vcsel/features.hpp"
#include "vcsel/imaging.hpp"
#include "vcsel/mnist.hpp"

namespace vcsel {

// ---- timing ---------------------------------------------------------------

// Simulated optical time of a layout, exact integer picoseconds.
std::int64_t predicted_runtime_ps(const RunLayout& layout);
std::int64_t predicted_runtime_ps(std::int64_t out_width,
                                  std::int64_t out_height,
                                  std::int64_t kernels, std::int64_t images,
                                  std::int64_t pixel_window_ps);
// Exact decimal rendering with an SI unit, e.g. "6.561 ms", "311.052 us".
std::string format_ps(std::int64_t ps);

// ---- inputs ---------------------------------------------------------------

// Built-in test patterns: "digit4" (32x32 printed four).
PixelImage builtin_image(std::string_view name);

// Images named by the config (files, or the built-in pattern).
std::vector<PixelImage> load_input_images(const RunConfig& cfg);

// ---- execution ------------------------------------------------------------

// Deterministic per-task seed derived from the master seed (splitmix64).
std::uint64_t task_seed(std::uint64_t master, std::uint64_t a,
                        std::uint64_t b = 0);

// Runs fn(0..n-1) on up to `workers` threads. Rethrows the first failure.
void parallel_for(std::size_t n, std::uint32_t workers,
                  const std::function<void(std::size_t)>& fn);

struct KernelRun {
  std::vector<ReconstructedMap> maps;  // one per image
  SpikeTrain train;
  std::int64_t simulated_ps = 0;
};

struct PipelineContext {
  SfmParams params;
  EncodingConfig encoding;  // sample period = dt
  SimConfig sim;
  double refractory_ns = 1.0;
  BankCalibration calibration;
};

// Encodes every image through one kernel into a single multiplexed run,
// integrates it from the calibrated rest state, and demultiplexes the spikes.
KernelRun simulate_kernel(const PipelineContext& ctx,
                          const std::vector<PixelImage>& images,
                          const KernelOp& kernel, std::size_t kernel_index,
                          std::uint64_t seed,
                          const std::string& trace_csv = {});

// One isolated pixel window; true when it fires.
bool simulate_window(const PipelineContext& ctx, std::span<const double> products,
                     std::size_t kernel_index, std::uint64_t seed);

PipelineContext make_context(const RunConfig& cfg,
                             const std::vector<KernelOp>& kernels);
nlohmann::ordered_json calibration_json(const BankCalibration& cal,
                                        const std::vector<KernelOp>& kernels);

// ---- experiments ----------------------------------------------------------

struct EdgeDetectResult {
  std::vector<KernelOp> kernels;
  BankCalibration calibration;
  // [image][kernel]
  std::vector<std::vector<ReconstructedMap>> maps;
  std::vector<std::vector<ReconstructedMap>> oracle;
  std::vector<ReconstructedMap> combined;
  std::vector<ReconstructedMap> combined_oracle;
  std::vector<DetectionMetrics> kernel_metrics;  // summed over images
  DetectionMetrics combined_metrics;
  std::int64_t simulated_ps = 0;
};

// Writes artifacts under cfg.output_dir unless it is empty.
EdgeDetectResult run_edge_detect(const RunConfig& cfg,
                                 const std::vector<PixelImage>& images);
EdgeDetectResult run_edge_detect(const RunConfig& cfg);

struct NoiseRow {
  std::string noise_type;
  double pct = 0.0;
  std::uint32_t seed_index = 0;
  std::uint64_t seed = 0;
  std::size_t active_count = 0;
  double activation_loss = 0.0;
  double accuracy = 0.0;
};

struct NoiseSweepResult {
  BankCalibration calibration;
  std::size_t reference_active = 0;
  std::vector<NoiseRow> rows;
  // Mean activation loss per percentage, in config order.
  std::vector<double> mean_loss;
};

NoiseSweepResult run_noise_sweep(const RunConfig& cfg, const PixelImage& image);
NoiseSweepResult run_noise_sweep(const RunConfig& cfg);

struct MnistBatchResult {
  std::vector<FeatureMapSet> features;
  std::size_t spot_checks = 0;
  std::size_t spot_mismatches = 0;
  std::int64_t simulated_ps = 0;      // whole batch
  std::int64_t per_image_ps = 0;
  bool oracle_only = false;
  BankCalibration calibration;
};

MnistBatchResult run_mnist_batch(const RunConfig& cfg, const MnistSet& set);
MnistBatchResult run_mnist_batch(const RunConfig& cfg);

// Writes the manifest that pins a run: config, its hash, seeds, calibration.
void write_manifest(const std::string& dir, const std::string& command,
                    const RunConfig& cfg, const nlohmann::ordered_json& extra);

}  // namespace vcsel
