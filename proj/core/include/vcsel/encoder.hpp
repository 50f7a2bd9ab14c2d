#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vcsel/imaging.hpp"
#include "vcsel/sfm.hpp"
#include "vcsel/waveform.hpp"

namespace vcsel {

// One pixel window carrying a single burst; the window starts at t = 0.
InjectionWaveform encode_pixel_burst(std::span<const double> products,
                                     const EncodingConfig& cfg,
                                     double delta_f_ghz);

struct FieldSlot {
  const HadamardField* field = nullptr;
  std::uint32_t kernel = 0;
  std::uint32_t image = 0;
};

// Pixel bursts in scan order, field after field, one window each.
InjectionWaveform encode_run(std::span<const FieldSlot> fields,
                             const EncodingConfig& cfg, double delta_f_ghz);

// Dense samples on the waveform grid.
void write_waveform_csv(const std::string& path, const InjectionWaveform& wave);
// "VWAV" little-endian: u32 version, f64 sample_period_ps, f64 delta_f_GHz,
// u64 count, f64 samples[count].
void write_vwav(const std::string& path, const InjectionWaveform& wave);

struct VwavData {
  std::uint32_t version = 0;
  double sample_period_ps = 0.0;
  double delta_f_ghz = 0.0;
  std::vector<double> samples;
};
VwavData read_vwav(const std::string& path);

struct CalibrationOptions {
  SimConfig sim;               // dt and record stride for every probe
  double baseline_margin = 0.05;  // baseline = locking boundary * (1 + margin)
  int lock_iterations = 30;
  int depth_iterations = 22;
  // Provisional spike test used while bisecting: total power above
  // spike_ratio * rest power.
  double spike_ratio = 2.0;
};

// Bursts the calibrator must separate.
struct CalibrationProbe {
  std::vector<double> target;              // must fire exactly once
  std::vector<std::vector<double>> quiet;  // must all stay silent
};

// Uniform bursts of `burst_len` pulses summing to the given values.
CalibrationProbe uniform_probe(double target_sum, double max_quiet_sum,
                               std::size_t burst_len);
// The kernel's own matching burst against every binary pattern reaching its
// next-highest sum, or, with `quiet_sum`, the matching burst scaled to it.
CalibrationProbe kernel_probe(const KernelOp& kernel,
                              std::optional<double> quiet_sum = std::nullopt);

struct OperatingPoint {
  double lock_boundary = 0.0;
  double baseline_amplitude = 0.0;
  double rest_power = 0.0;
  SfmState rest_state;
};

// Injection-locking boundary by bisection, and the relaxed rest state at the
// chosen baseline.
OperatingPoint find_operating_point(const SfmParams& params,
                                    const CalibrationOptions& opts);

struct SweepRow {
  double depth = 0.0;
  int target_spikes = 0;
  int quiet_spikes = 0;  // summed over quiet bursts
};

struct CalibrationResult {
  double modulation_depth = 0.0;
  double baseline_amplitude = 0.0;
  double detection_threshold = 0.0;
  double lock_boundary = 0.0;
  double rest_power = 0.0;
  double spike_peak = 0.0;
  double depth_fire = 0.0;   // smallest depth at which the target fires
  double depth_quiet = 0.0;  // smallest depth at which any quiet burst fires
  double spike_latency_ns = 0.0;  // first crossing after burst end
  std::vector<SweepRow> sweep;
};

// Bisection on modulation depth between the target's firing onset and the
// first quiet burst's firing onset; returns the interval midpoint.
CalibrationResult calibrate(const SfmParams& params, const EncodingConfig& cfg,
                            const CalibrationProbe& probe,
                            const CalibrationOptions& opts,
                            const OperatingPoint& op);
CalibrationResult calibrate(const SfmParams& params, const EncodingConfig& cfg,
                            const CalibrationProbe& probe,
                            const CalibrationOptions& opts = {});
// Uniform bursts, as in the text: target_sum must fire, max_quiet_sum not.
CalibrationResult calibrate(const SfmParams& params, const EncodingConfig& cfg,
                            double target_sum, double max_quiet_sum,
                            std::size_t burst_len,
                            const CalibrationOptions& opts = {});

struct BankCalibration {
  OperatingPoint op;
  double detection_threshold = 0.0;
  std::vector<double> kernel_depth;   // per kernel of the bank
  std::vector<std::size_t> kernel_class;
  std::vector<CalibrationResult> classes;
  std::vector<std::string> class_kernels;  // comma-joined labels per class
};

// One probe per distinct burst shape in the bank; a shared baseline and a
// detector threshold at the weakest class's half excursion.
BankCalibration calibrate_bank(const SfmParams& params,
                               const EncodingConfig& cfg,
                               const std::vector<KernelOp>& kernels,
                               const CalibrationOptions& opts = {},
                               std::optional<double> quiet_sum = std::nullopt);

// Burst end time: centre of the last pulse plus half a width.
double burst_end_ps(const EncodingConfig& cfg, std::size_t burst_len);

}  // namespace vcsel
