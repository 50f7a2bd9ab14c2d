#include "vcsel/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "vcsel/errors.hpp"

namespace vcsel {

InjectionWaveform encode_pixel_burst(std::span<const double> products,
                                     const EncodingConfig& cfg,
                                     double delta_f_ghz) {
  if (products.size() != 4 && products.size() != 9) {
    throw ConfigError("a pixel burst carries 4 or 9 products");
  }
  cfg.validate(products.size());
  InjectionWaveform wave(cfg, delta_f_ghz, cfg.pixel_window_ps);
  wave.add_burst(0, products);
  wave.layout.windows.push_back({0, 0, 0, 0, 0});
  return wave;
}

InjectionWaveform encode_run(std::span<const FieldSlot> fields,
                             const EncodingConfig& cfg, double delta_f_ghz) {
  if (fields.empty()) throw ConfigError("encode_run needs at least one field");
  const std::size_t burst_len = fields.front().field->window();
  std::size_t windows = 0;
  for (const FieldSlot& f : fields) {
    if (f.field == nullptr) throw ConfigError("null field in run");
    if (f.field->window() != burst_len) {
      throw ConfigError("all fields in a run must share one kernel size");
    }
    windows += f.field->pixel_count();
  }
  if (burst_len != 4 && burst_len != 9) {
    throw ConfigError("a pixel burst carries 4 or 9 products");
  }
  cfg.validate(burst_len);

  InjectionWaveform wave(
      cfg, delta_f_ghz, static_cast<std::int64_t>(windows) * cfg.pixel_window_ps);
  wave.layout.windows.reserve(windows);
  std::int64_t start = 0;
  for (const FieldSlot& f : fields) {
    for (int r = 0; r < f.field->out_height(); ++r) {
      for (int c = 0; c < f.field->out_width(); ++c) {
        wave.add_burst(start, f.field->products_at(r, c));
        wave.layout.windows.push_back({f.kernel, f.image,
                                       static_cast<std::uint32_t>(r),
                                       static_cast<std::uint32_t>(c), start});
        start += cfg.pixel_window_ps;
      }
    }
  }
  return wave;
}

void write_waveform_csv(const std::string& path, const InjectionWaveform& wave) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << "t_ns,amplitude\n";
  out.precision(10);
  const std::size_t n = wave.sample_count();
  for (std::size_t i = 0; i < n; ++i) {
    out << static_cast<double>(i) * wave.sample_period_ps() * 1e-3 << ','
        << wave.sample(i) << '\n';
  }
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary writers assume a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw ConfigError("truncated VWAV file " + path);
  }
  return v;
}

}  // namespace

void write_vwav(const std::string& path, const InjectionWaveform& wave) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out.write("VWAV", 4);
  put<std::uint32_t>(out, 1);
  put<double>(out, wave.sample_period_ps());
  put<double>(out, wave.delta_f_ghz());
  const std::uint64_t n = wave.sample_count();
  put<std::uint64_t>(out, n);
  for (std::uint64_t i = 0; i < n; ++i) put<double>(out, wave.sample(i));
  if (!out) throw ConfigError("write failed: " + path);
}

VwavData read_vwav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "VWAV", 4) != 0) {
    throw ConfigError("not a VWAV file: " + path);
  }
  VwavData d;
  d.version = get<std::uint32_t>(in, path);
  if (d.version != 1) throw ConfigError("unsupported VWAV version");
  d.sample_period_ps = get<double>(in, path);
  d.delta_f_ghz = get<double>(in, path);
  const auto n = get<std::uint64_t>(in, path);
  d.samples.resize(n);
  if (!in.read(reinterpret_cast<char*>(d.samples.data()),
               static_cast<std::streamsize>(n * sizeof(double)))) {
    throw ConfigError("truncated VWAV file " + path);
  }
  return d;
}

CalibrationProbe uniform_probe(double target_sum, double max_quiet_sum,
                               std::size_t burst_len) {
  if (!(target_sum > max_quiet_sum)) {
    throw ConfigError("target sum must exceed the largest quiet sum");
  }
  if (burst_len == 0) throw ConfigError("burst length must be positive");
  const auto n = static_cast<double>(burst_len);
  return {std::vector<double>(burst_len, target_sum / n),
          {std::vector<double>(burst_len, max_quiet_sum / n)}};
}

CalibrationProbe kernel_probe(const KernelOp& kernel,
                              std::optional<double> quiet_sum) {
  CalibrationProbe p;
  p.target = kernel.target_products();
  if (quiet_sum) {
    if (!(*quiet_sum < kernel.target_sum())) {
      throw ConfigError("quiet sum must be below the kernel target sum");
    }
    std::vector<double> q = p.target;
    for (double& v : q) v *= *quiet_sum / kernel.target_sum();
    p.quiet.push_back(std::move(q));
  } else {
    p.quiet = kernel.quiet_products();
  }
  return p;
}

double burst_end_ps(const EncodingConfig& cfg, std::size_t burst_len) {
  return cfg.burst_span_ps(burst_len) + 0.5 * cfg.pulse_width_ps;
}

namespace {

RelaxOptions relax_options(const CalibrationOptions& opts, double baseline) {
  RelaxOptions r;
  r.baseline_amplitude = baseline;
  r.dt_ps = opts.sim.dt_ps;
  return r;
}

bool is_locked(const SfmParams& params, const CalibrationOptions& opts,
               double baseline) {
  RelaxOptions r = relax_options(opts, baseline);
  r.max_settle_ns = 200.0;
  try {
    const SfmState s = relax_to_steady_state(params, r);
    return s.power_y() < 1e-6 * s.power_x();
  } catch (const CalibrationError&) {
    return false;
  }
}

struct ProbeRun {
  int spikes = 0;
  double peak = 0.0;
  double first_cross_ns = -1.0;
  bool inside_window = true;
};

// Simulates one burst at t = 0 over two pixel windows so late firing is seen.
ProbeRun run_probe(const SfmParams& params, const EncodingConfig& cfg,
                   const CalibrationOptions& opts, const OperatingPoint& op,
                   std::span<const double> products, double depth,
                   double threshold) {
  EncodingConfig c = cfg;
  c.modulation_depth = depth;
  c.baseline_amplitude = op.baseline_amplitude;
  c.sample_period_ps = opts.sim.dt_ps;
  InjectionWaveform wave(c, params.delta_f, 2 * c.pixel_window_ps);
  wave.add_burst(0, products);
  SimConfig sim = opts.sim;
  sim.duration_ns = 0.0;
  sim.noise_enabled = false;
  ProbeRun out;
  const double rearm = 0.5 * (threshold + op.rest_power);
  bool armed = true;
  simulate_stream(wave, params, sim, op.rest_state,
                  [&](double t, double px, double py) {
                    const double p = px + py;
                    out.peak = std::max(out.peak, p);
                    if (armed && p > threshold) {
                      armed = false;
                      ++out.spikes;
                      if (out.first_cross_ns < 0.0) out.first_cross_ns = t;
                      if (t >= c.pixel_window_ns()) out.inside_window = false;
                    } else if (!armed && p < rearm) {
                      armed = true;
                    }
                  });
  return out;
}

double max_safe_depth(const CalibrationProbe& probe) {
  double highest = 0.0;
  for (double h : probe.target) highest = std::max(highest, h);
  for (const auto& q : probe.quiet) {
    for (double h : q) highest = std::max(highest, h);
  }
  if (!(highest > 0.0)) throw ConfigError("probe burst has no positive pulse");
  return 0.98 / highest;
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "depth,target_spikes,quiet_spikes\n";
  for (const SweepRow& r : rows) {
    os << r.depth << ',' << r.target_spikes << ',' << r.quiet_spikes << '\n';
  }
  return os.str();
}

}  // namespace

OperatingPoint find_operating_point(const SfmParams& params,
                                    const CalibrationOptions& opts) {
  params.validate();
  opts.sim.validate();
  if (!(opts.baseline_margin > 0.0)) {
    throw ConfigError("baseline margin must be positive");
  }
  double lo = 0.0;
  double hi = 1.0;
  while (!is_locked(params, opts, hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1024.0) {
      throw CalibrationError("injection never locks the laser up to |E_inj| = 1024");
    }
  }
  for (int i = 0; i < opts.lock_iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    (is_locked(params, opts, mid) ? hi : lo) = mid;
  }
  OperatingPoint op;
  op.lock_boundary = hi;
  op.baseline_amplitude = hi * (1.0 + opts.baseline_margin);
  op.rest_state = relax_to_steady_state(
      params, relax_options(opts, op.baseline_amplitude));
  op.rest_power = op.rest_state.power_x() + op.rest_state.power_y();
  if (op.rest_state.power_y() >= 1e-6 * op.rest_state.power_x()) {
    throw CalibrationError("laser is not locked at the chosen baseline");
  }
  return op;
}

CalibrationResult calibrate(const SfmParams& params, const EncodingConfig& cfg,
                            const CalibrationProbe& probe,
                            const CalibrationOptions& opts,
                            const OperatingPoint& op) {
  if (probe.target.empty() || probe.quiet.empty()) {
    throw ConfigError("calibration needs a target burst and a quiet burst");
  }
  auto sum = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  };
  for (const auto& q : probe.quiet) {
    if (q.size() != probe.target.size()) {
      throw ConfigError("quiet and target bursts differ in length");
    }
    if (!(sum(q) < sum(probe.target))) {
      throw ConfigError("target sum must exceed the largest quiet sum");
    }
  }
  cfg.validate(probe.target.size());

  const double provisional = opts.spike_ratio * op.rest_power;
  auto fires = [&](std::span<const double> products, double depth) {
    return run_probe(params, cfg, opts, op, products, depth, provisional)
               .spikes > 0;
  };
  const double top = max_safe_depth(probe);

  auto sweep = [&]() {
    std::vector<SweepRow> rows;
    for (int i = 0; i <= 12; ++i) {
      const double d = top * std::pow(0.01, 1.0 - i / 12.0);
      SweepRow row{d, 0, 0};
      row.target_spikes =
          run_probe(params, cfg, opts, op, probe.target, d, provisional).spikes;
      for (const auto& q : probe.quiet) {
        row.quiet_spikes +=
            run_probe(params, cfg, opts, op, q, d, provisional).spikes;
      }
      rows.push_back(row);
    }
    return rows;
  };
  auto fail = [&](const std::string& why) -> CalibrationError {
    return CalibrationError(why + "\n" + sweep_table(sweep()));
  };

  if (!fires(probe.target, top)) {
    throw fail("target burst never fires up to the largest safe depth");
  }
  // Firing onset of the target burst.
  double lo = 0.0;
  double hi = top;
  for (int i = 0; i < opts.depth_iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    (fires(probe.target, mid) ? hi : lo) = mid;
  }
  const double depth_fire = hi;

  // Earliest firing onset over the quiet bursts.
  double depth_quiet = top;
  for (const auto& q : probe.quiet) {
    if (!fires(q, depth_quiet)) continue;
    double qlo = 0.0;
    double qhi = depth_quiet;
    for (int i = 0; i < opts.depth_iterations; ++i) {
      const double mid = 0.5 * (qlo + qhi);
      (fires(q, mid) ? qhi : qlo) = mid;
    }
    depth_quiet = qhi;
  }
  if (!(depth_quiet > depth_fire)) {
    std::ostringstream os;
    os << "no working depth interval: target fires from " << depth_fire
       << ", a quiet burst fires from " << depth_quiet;
    throw fail(os.str());
  }

  CalibrationResult res;
  res.depth_fire = depth_fire;
  res.depth_quiet = depth_quiet;
  res.modulation_depth = 0.5 * (depth_fire + depth_quiet);
  res.baseline_amplitude = op.baseline_amplitude;
  res.lock_boundary = op.lock_boundary;
  res.rest_power = op.rest_power;

  const ProbeRun shot = run_probe(params, cfg, opts, op, probe.target,
                                  res.modulation_depth, provisional);
  res.spike_peak = shot.peak;
  res.detection_threshold = op.rest_power + 0.5 * (shot.peak - op.rest_power);
  const ProbeRun check = run_probe(params, cfg, opts, op, probe.target,
                                   res.modulation_depth,
                                   res.detection_threshold);
  if (check.spikes != 1 || !check.inside_window) {
    std::ostringstream os;
    os << "calibrated target burst gives " << check.spikes
       << " spike(s)" << (check.inside_window ? "" : " outside its window");
    throw fail(os.str());
  }
  for (const auto& q : probe.quiet) {
    if (run_probe(params, cfg, opts, op, q, res.modulation_depth,
                  res.detection_threshold)
            .spikes != 0) {
      throw fail("a quiet burst crosses the detection threshold");
    }
  }
  res.spike_latency_ns = check.first_cross_ns -
                         burst_end_ps(cfg, probe.target.size()) * 1e-3;
  return res;
}

CalibrationResult calibrate(const SfmParams& params, const EncodingConfig& cfg,
                            const CalibrationProbe& probe,
                            const CalibrationOptions& opts) {
  return calibrate(params, cfg, probe, opts, find_operating_point(params, opts));
}

CalibrationResult calibrate(const SfmParams& params, const EncodingConfig& cfg,
                            double target_sum, double max_quiet_sum,
                            std::size_t burst_len,
                            const CalibrationOptions& opts) {
  return calibrate(params, cfg,
                   uniform_probe(target_sum, max_quiet_sum, burst_len), opts);
}

BankCalibration calibrate_bank(const SfmParams& params,
                               const EncodingConfig& cfg,
                               const std::vector<KernelOp>& kernels,
                               const CalibrationOptions& opts,
                               std::optional<double> quiet_sum) {
  if (kernels.empty()) throw ConfigError("empty kernel bank");
  BankCalibration bank;
  bank.op = find_operating_point(params, opts);

  std::map<std::pair<std::vector<double>, std::vector<std::vector<double>>>,
           std::size_t>
      seen;
  for (const KernelOp& k : kernels) {
    CalibrationProbe probe = kernel_probe(k, quiet_sum);
    auto key = std::make_pair(probe.target, probe.quiet);
    auto it = seen.find(key);
    if (it == seen.end()) {
      it = seen.emplace(key, bank.classes.size()).first;
      bank.classes.push_back(calibrate(params, cfg, probe, opts, bank.op));
      bank.class_kernels.push_back(k.label());
    } else {
      bank.class_kernels[it->second] += "," + k.label();
    }
    bank.kernel_class.push_back(it->second);
    bank.kernel_depth.push_back(bank.classes[it->second].modulation_depth);
  }
  double weakest = bank.classes.front().spike_peak;
  for (const auto& c : bank.classes) weakest = std::min(weakest, c.spike_peak);
  bank.detection_threshold =
      bank.op.rest_power + 0.5 * (weakest - bank.op.rest_power);
  return bank;
}

}  // namespace vcsel
