#include "vcsel/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "vcsel/errors.hpp"

namespace vcsel {

EncodingConfig EncodingConfig::preset_2x2() {
  EncodingConfig cfg;
  cfg.pulse_width_ps = 100.0;
  cfg.pulse_separation_ps = 150.0;
  return cfg;
}

EncodingConfig EncodingConfig::preset_3x3() {
  EncodingConfig cfg;
  cfg.pulse_width_ps = 100.0;
  cfg.pulse_separation_ps = 110.0;
  return cfg;
}

double EncodingConfig::burst_span_ps(std::size_t count) const {
  if (count == 0) return 0.0;
  return static_cast<double>(count - 1) * pulse_separation_ps + pulse_width_ps;
}

void EncodingConfig::validate(std::size_t burst_len) const {
  if (!(pulse_width_ps > 0.0) || !(pulse_separation_ps > 0.0)) {
    throw ConfigError("pulse width and separation must be positive");
  }
  if (!(sample_period_ps > 0.0)) {
    throw ConfigError("sample period must be positive");
  }
  if (pixel_window_ps < 1000) {
    throw ConfigError("pixel window must cover the ~1 ns refractory period");
  }
  // Full support of the burst, first rise to last fall.
  const double support = burst_span_ps(burst_len) + pulse_width_ps;
  if (support >= static_cast<double>(pixel_window_ps)) {
    std::ostringstream os;
    os << "burst of " << burst_len << " pulses (" << support
       << " ps) does not fit the " << pixel_window_ps << " ps pixel window";
    throw ConfigError(os.str());
  }
  if (modulation_depth < 0.0 || baseline_amplitude < 0.0) {
    throw ConfigError("modulation depth and baseline must be non-negative");
  }
}

std::optional<std::size_t> RunLayout::window_at(double t_ns) const {
  if (windows.empty() || t_ns < 0.0) return std::nullopt;
  const double t_ps = t_ns * 1e3;
  // Windows are ordered by start time.
  auto it = std::upper_bound(
      windows.begin(), windows.end(), t_ps,
      [](double t, const PixelWindow& w) {
        return t < static_cast<double>(w.start_ps);
      });
  if (it == windows.begin()) return std::nullopt;
  --it;
  if (t_ps >= static_cast<double>(it->start_ps + pixel_window_ps)) {
    return std::nullopt;
  }
  return static_cast<std::size_t>(it - windows.begin());
}

double raised_cosine(double tau, double fwhm) {
  if (tau <= -fwhm || tau >= fwhm) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * tau / fwhm));
}

InjectionWaveform::InjectionWaveform(EncodingConfig cfg, double delta_f_ghz,
                                     std::int64_t duration_ps)
    : cfg_(cfg), delta_f_ghz_(delta_f_ghz), duration_ps_(duration_ps) {
  if (duration_ps <= 0) throw ConfigError("waveform duration must be positive");
  if (!(cfg_.pulse_width_ps > 0.0) || !(cfg_.pulse_separation_ps > 0.0) ||
      !(cfg_.sample_period_ps > 0.0)) {
    throw ConfigError("invalid pulse timing in encoding config");
  }
  layout.pixel_window_ps = cfg_.pixel_window_ps;
}

void InjectionWaveform::add_burst(std::int64_t start_ps,
                                  std::span<const double> products) {
  if (!bursts_.empty() && start_ps < bursts_.back().start_ps) {
    throw ConfigError("bursts must be added in time order");
  }
  Burst b{start_ps, products_.size(), products.size()};
  products_.insert(products_.end(), products.begin(), products.end());
  bursts_.push_back(b);
  max_support_ps_ = std::max(max_support_ps_, burst_support_ps(b));

  // Envelope must stay non-negative. With separation >= width at most two
  // pulses overlap and their shapes sum to <= 1, so the extremes sit on the
  // pulse centres; otherwise scan a 1 ps grid over the burst.
  double lowest = 0.0;
  double highest = 0.0;
  if (cfg_.pulse_separation_ps >= cfg_.pulse_width_ps) {
    for (double h : products) {
      highest = std::max(highest, h);
      lowest = std::min(lowest, h);
    }
  } else {
    const double support = burst_support_ps(b);
    const double begin = static_cast<double>(start_ps);
    for (double t = begin; t <= begin + support; t += 1.0) {
      const double m = modulation_at(t);
      highest = std::max(highest, m);
      lowest = std::min(lowest, m);
    }
  }
  const double amp = cfg_.baseline_amplitude * (1.0 - cfg_.modulation_depth * highest);
  if (amp < -1e-12) {
    bursts_.pop_back();
    products_.resize(b.offset);
    std::ostringstream os;
    os << "envelope goes negative (" << amp << ") in burst at " << start_ps
       << " ps; reduce modulation depth";
    throw ConfigError(os.str());
  }
  max_raise_ = std::max(max_raise_, -lowest);
}

double InjectionWaveform::modulation_at(double t_ps) const {
  if (bursts_.empty()) return 0.0;
  const double width = cfg_.pulse_width_ps;
  const double sep = cfg_.pulse_separation_ps;
  auto it = std::upper_bound(
      bursts_.begin(), bursts_.end(), t_ps,
      [](double t, const Burst& b) { return t < static_cast<double>(b.start_ps); });
  double sum = 0.0;
  // Walk back over bursts that may still overlap t.
  while (it != bursts_.begin()) {
    --it;
    const double begin = static_cast<double>(it->start_ps);
    if (t_ps - begin >= max_support_ps_) break;
    if (t_ps - begin >= burst_support_ps(*it)) continue;
    const double rel = t_ps - begin - width;  // relative to first pulse centre
    // Only pulses with |rel - i*sep| < width contribute.
    const auto lo = static_cast<long>(std::ceil((rel - width) / sep));
    const auto hi = static_cast<long>(std::floor((rel + width) / sep));
    const long first = std::max(0L, lo);
    const long last = std::min(static_cast<long>(it->count) - 1, hi);
    for (long i = first; i <= last; ++i) {
      sum += products_[it->offset + static_cast<std::size_t>(i)] *
             raised_cosine(rel - static_cast<double>(i) * sep, width);
    }
  }
  return sum;
}

double InjectionWaveform::burst_support_ps(const Burst& b) const {
  const double pulses = static_cast<double>(b.count == 0 ? 0 : b.count - 1);
  return pulses * cfg_.pulse_separation_ps + 2.0 * cfg_.pulse_width_ps;
}

double InjectionWaveform::Cursor::at(double t_ns) {
  const double t_ps = t_ns * 1e3;
  const auto& bursts = wave_->bursts_;
  while (next_ < bursts.size() &&
         static_cast<double>(bursts[next_].start_ps) <= t_ps) {
    active_until_ps_ =
        std::max(active_until_ps_, static_cast<double>(bursts[next_].start_ps) +
                                       wave_->burst_support_ps(bursts[next_]));
    ++next_;
  }
  if (t_ps >= active_until_ps_) return wave_->cfg_.baseline_amplitude;
  return wave_->amplitude_at(t_ns);
}

double InjectionWaveform::amplitude_at(double t_ns) const {
  const double m = modulation_at(t_ns * 1e3);
  return cfg_.baseline_amplitude * (1.0 - cfg_.modulation_depth * m);
}

std::size_t InjectionWaveform::sample_count() const {
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(duration_ps_) / cfg_.sample_period_ps));
}

double InjectionWaveform::sample(std::size_t index) const {
  return amplitude_at(static_cast<double>(index) * cfg_.sample_period_ps * 1e-3);
}

double InjectionWaveform::max_amplitude() const {
  return cfg_.baseline_amplitude * (1.0 + cfg_.modulation_depth * max_raise_);
}

}  // namespace vcsel
