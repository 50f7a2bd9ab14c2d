#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vcsel {

// Pulse-train encoding settings. Times are kept in integer picoseconds where
// they feed layout arithmetic so window boundaries never drift.
struct EncodingConfig {
  double pulse_width_ps = 100.0;       // FWHM of one raised-cosine pulse
  double pulse_separation_ps = 150.0;  // peak-to-peak
  std::int64_t pixel_window_ps = 3000;
  double sample_period_ps = 0.05;
  double modulation_depth = 0.0;    // fractional drop per unit product
  double baseline_amplitude = 0.0;  // |E_inj| between bursts

  static EncodingConfig preset_2x2();
  static EncodingConfig preset_3x3();

  double pixel_window_ns() const { return pixel_window_ps * 1e-3; }
  // FWHM span of a burst: (count - 1) separations plus one pulse width.
  double burst_span_ps(std::size_t count) const;
  void validate(std::size_t burst_len) const;
};

// Provenance of one pixel window in a multiplexed run.
struct PixelWindow {
  std::uint32_t kernel = 0;
  std::uint32_t image = 0;
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  std::int64_t start_ps = 0;
};

struct RunLayout {
  std::int64_t pixel_window_ps = 3000;
  std::vector<PixelWindow> windows;

  std::int64_t duration_ps() const {
    return static_cast<std::int64_t>(windows.size()) * pixel_window_ps;
  }
  // Index of the window holding time t, if any.
  std::optional<std::size_t> window_at(double t_ns) const;
};

// Raised-cosine pulse with full width at half maximum `fwhm`; support is
// [-fwhm, fwhm] and the peak value is 1.
double raised_cosine(double tau, double fwhm);

// Intensity-modulated injection envelope. The envelope is held as bursts of
// product values rather than a dense sample array: a single 27x27 field at
// 0.05 ps resolution would otherwise need ~44M samples. Dense samples are
// available through sample() on the configured grid.
class InjectionWaveform {
 public:
  struct Burst {
    std::int64_t start_ps = 0;
    std::size_t offset = 0;  // into products()
    std::size_t count = 0;
  };

  InjectionWaveform(EncodingConfig cfg, double delta_f_ghz,
                    std::int64_t duration_ps);

  // Appends a burst whose first pulse begins rising at start_ps. Bursts must
  // be appended in time order. Throws ConfigError if the envelope would dip
  // below zero.
  void add_burst(std::int64_t start_ps, std::span<const double> products);

  double amplitude_at(double t_ns) const;

  std::size_t sample_count() const;
  double sample(std::size_t index) const;

  const EncodingConfig& config() const { return cfg_; }
  double delta_f_ghz() const { return delta_f_ghz_; }
  double sample_period_ps() const { return cfg_.sample_period_ps; }
  double duration_ns() const { return duration_ps_ * 1e-3; }
  std::int64_t duration_ps() const { return duration_ps_; }
  const std::vector<Burst>& bursts() const { return bursts_; }
  std::span<const double> products(const Burst& b) const {
    return {products_.data() + b.offset, b.count};
  }

  RunLayout layout;

  // Largest envelope value any burst can produce, for bound checks.
  double max_amplitude() const;

  // Sequential reader for non-decreasing query times; skips the burst search
  // on flat stretches between bursts.
  class Cursor {
   public:
    explicit Cursor(const InjectionWaveform& wave) : wave_(&wave) {}
    double at(double t_ns);

   private:
    const InjectionWaveform* wave_;
    std::size_t next_ = 0;  // first burst not yet started
    double active_until_ps_ = -1.0;
  };

 private:
  double modulation_at(double t_ps) const;
  double burst_support_ps(const Burst& b) const;

  EncodingConfig cfg_;
  double delta_f_ghz_;
  std::int64_t duration_ps_;
  std::vector<Burst> bursts_;
  std::vector<double> products_;
  double max_raise_ = 0.0;
  double max_support_ps_ = 0.0;
};

}  // namespace vcsel
