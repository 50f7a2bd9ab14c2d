#include "vcsel/sfm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "vcsel/errors.hpp"

namespace vcsel {

namespace {

constexpr cplx kI{0.0, 1.0};

// Rate equations written out in real arithmetic: each field obeys
// dE/dt = c * E (+ drive), with c collecting loss, birefringence and gain.
SfmState rhs(const SfmState& s, cplx injection, const SfmParams& p) {
  const double xr = s.e_x.real(), xi = s.e_x.imag();
  const double yr = s.e_y.real(), yi = s.e_y.imag();
  const double n = s.n_total, m = s.n_spin;
  const double k = p.kappa, a = p.alpha;

  const double cx_r = -(k + p.gamma_a) + k * (n - a * m);
  const double cx_i = -(k * a + p.gamma_p) + k * (a * n + m);
  const double cy_r = -(k - p.gamma_a) + k * (n + a * m);
  const double cy_i = -(k * a - p.gamma_p) + k * (a * n - m);

  const double px = xr * xr + xi * xi;
  const double py = yr * yr + yi * yi;
  // i (E_y E_x* - E_x E_y*) = -2 Im(E_y E_x*)
  const double cross = -2.0 * (yi * xr - yr * xi);

  SfmState d;
  d.e_x = {cx_r * xr - cx_i * xi + injection.real(),
           cx_r * xi + cx_i * xr + injection.imag()};
  d.e_y = {cy_r * yr - cy_i * yi, cy_r * yi + cy_i * yr};
  d.n_total = -p.gamma_n * (n * (1.0 + px + py) - p.mu + m * cross);
  d.n_spin = -p.gamma_s * m - p.gamma_n * (m * (px - py) + n * cross);
  return d;
}

SfmState axpy(const SfmState& s, double h, const SfmState& d) {
  return {s.e_x + h * d.e_x, s.e_y + h * d.e_y, s.n_total + h * d.n_total,
          s.n_spin + h * d.n_spin};
}

// Classical RK4 with the injection drive supplied at t, t + dt/2, t + dt.
SfmState rk4_core(const SfmState& s, double dt, cplx inj0, cplx inj_mid,
                  cplx inj1, const SfmParams& p) {
  const SfmState k1 = rhs(s, inj0, p);
  const SfmState k2 = rhs(axpy(s, 0.5 * dt, k1), inj_mid, p);
  const SfmState k3 = rhs(axpy(s, 0.5 * dt, k2), inj_mid, p);
  const SfmState k4 = rhs(axpy(s, dt, k3), inj1, p);
  const double w = dt / 6.0;
  return {s.e_x + w * (k1.e_x + 2.0 * k2.e_x + 2.0 * k3.e_x + k4.e_x),
          s.e_y + w * (k1.e_y + 2.0 * k2.e_y + 2.0 * k3.e_y + k4.e_y),
          s.n_total + w * (k1.n_total + 2.0 * k2.n_total + 2.0 * k3.n_total +
                           k4.n_total),
          s.n_spin +
              w * (k1.n_spin + 2.0 * k2.n_spin + 2.0 * k3.n_spin + k4.n_spin)};
}

void add_noise(SfmState& s, const SfmParams& p, double dt, NoiseSource& rng) {
  const NoisePair f = spontaneous_noise(s, p, rng);
  const double scale = std::sqrt(dt);
  s.e_x += scale * f.f_x;
  s.e_y += scale * f.f_y;
}

// Field components this small carry no physics but decay into the subnormal
// range, where arithmetic runs an order of magnitude slower.
constexpr double kFlushBelow = 1e-100;

double flush(double v) { return std::abs(v) < kFlushBelow ? 0.0 : v; }

void flush_tiny(SfmState& s) {
  s.e_x = {flush(s.e_x.real()), flush(s.e_x.imag())};
  s.e_y = {flush(s.e_y.real()), flush(s.e_y.imag())};
  s.n_spin = flush(s.n_spin);
}

[[noreturn]] void blow_up(double t_ns) {
  std::ostringstream os;
  os << "integration produced a non-finite state at t = " << t_ns << " ns";
  throw IntegrationError(os.str(), t_ns);
}

}  // namespace

void SfmParams::validate() const {
  const std::array<double, 6> rates{gamma_a, gamma_p, gamma_n,
                                    gamma_s, kappa,   k_inj};
  for (double r : rates) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw ConfigError("SFM rates must be strictly positive and finite");
    }
  }
  if (!(beta_sp >= 0.0)) throw ConfigError("beta_sp must be non-negative");
  if (!(mu >= 0.0)) throw ConfigError("mu must be non-negative");
  if (!std::isfinite(alpha) || !std::isfinite(delta_f)) {
    throw ConfigError("alpha and delta_f must be finite");
  }
}

bool SfmState::finite() const {
  return std::isfinite(e_x.real()) && std::isfinite(e_x.imag()) &&
         std::isfinite(e_y.real()) && std::isfinite(e_y.imag()) &&
         std::isfinite(n_total) && std::isfinite(n_spin);
}

void SimConfig::validate() const {
  if (!(dt_ps > 0.0)) throw ConfigError("dt must be positive");
  if (duration_ns < 0.0) throw ConfigError("duration must be positive");
  if (record_stride < 1) throw ConfigError("record_stride must be >= 1");
}

void PowerTrace::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << "t_ns,power_x,power_y\n";
  out.precision(10);
  for (std::size_t i = 0; i < size(); ++i) {
    out << time_ns(i) << ',' << power_x[i] << ',' << power_y[i] << '\n';
  }
}

double detuning_to_angular(double delta_f_ghz, const SfmParams& params) {
  return 2.0 * std::numbers::pi * delta_f_ghz +
         params.alpha * params.gamma_a - params.gamma_p;
}

SfmState field_derivatives(const SfmState& s, cplx injection,
                           const SfmParams& p) {
  if (!s.finite() || !std::isfinite(injection.real()) ||
      !std::isfinite(injection.imag())) {
    throw IntegrationError("non-finite input to field derivatives", 0.0);
  }
  return rhs(s, p.k_inj * injection, p);
}

cplx NoiseSource::complex_gaussian() {
  const double re = normal_(engine_);
  const double im = normal_(engine_);
  return {re, im};
}

NoisePair spontaneous_noise(const SfmState& s, const SfmParams& p,
                            NoiseSource& rng) {
  const cplx xi1 = rng.complex_gaussian();
  const cplx xi2 = rng.complex_gaussian();
  const double plus = std::sqrt(std::max(0.0, s.n_total + s.n_spin));
  const double minus = std::sqrt(std::max(0.0, s.n_total - s.n_spin));
  const double strength = std::sqrt(p.beta_sp * p.gamma_n / 2.0);
  const cplx f_x = -strength * (plus * xi1 + minus * xi2);
  return {f_x, -kI * f_x};
}

SfmState rk4_step(const SfmState& state, double t_ns, double dt_ns,
                  const EnvelopeFn& envelope, const SfmParams& params,
                  NoiseSource* rng) {
  const double dw = detuning_to_angular(params.delta_f, params);
  auto drive = [&](double t) {
    return params.k_inj * envelope(t) * std::polar(1.0, dw * t);
  };
  SfmState next = rk4_core(state, dt_ns, drive(t_ns), drive(t_ns + 0.5 * dt_ns),
                           drive(t_ns + dt_ns), params);
  if (rng != nullptr) add_noise(next, params, dt_ns, *rng);
  if (!next.finite()) blow_up(t_ns + dt_ns);
  return next;
}

SfmState relax_to_steady_state(const SfmParams& params,
                               const RelaxOptions& opts) {
  params.validate();
  if (!(opts.dt_ps > 0.0) || !(opts.settle_ns > 5.0)) {
    throw ConfigError("relaxation needs dt > 0 and settle time > 5 ns");
  }
  const double dt = opts.dt_ps * 1e-3;
  const double dw = detuning_to_angular(params.delta_f, params);
  const cplx drive_amp = params.k_inj * opts.baseline_amplitude;

  NoiseSource seed_rng(opts.seed);
  SfmState s;
  s.e_x = 1e-3 * seed_rng.complex_gaussian();
  s.e_y = 1e-3 * seed_rng.complex_gaussian();
  s.n_total = 1.0;
  s.n_spin = 0.0;

  const cplx half_turn = std::polar(1.0, 0.5 * dw * dt);
  const auto window_steps = static_cast<long>(std::llround(5.0 / dt));
  long step = 0;
  double settled_ns = opts.settle_ns;

  auto observe = [](const SfmState& st) {
    return std::array<double, 3>{st.power_x(), st.power_y(), st.n_total};
  };

  while (true) {
    const auto target = static_cast<long>(std::llround(settled_ns / dt));
    std::array<double, 3> lo{}, hi{};
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (; step < target; ++step) {
      const double t = static_cast<double>(step) * dt;
      const cplx ph0 = std::polar(1.0, dw * t);
      const cplx phm = ph0 * half_turn;
      s = rk4_core(s, dt, drive_amp * ph0, drive_amp * phm,
                   drive_amp * phm * half_turn, params);
      flush_tiny(s);
      if (!s.finite()) blow_up(t + dt);
      if (step >= target - window_steps) {
        const auto q = observe(s);
        for (std::size_t i = 0; i < q.size(); ++i) {
          lo[i] = std::min(lo[i], q[i]);
          hi[i] = std::max(hi[i], q[i]);
        }
      }
    }
    double change = 0.0;
    for (std::size_t i = 0; i < lo.size(); ++i) {
      const double scale = std::max({std::abs(lo[i]), std::abs(hi[i]), 1e-6});
      change = std::max(change, (hi[i] - lo[i]) / scale);
    }
    if (change < opts.tolerance) break;
    if (settled_ns >= opts.max_settle_ns) {
      std::ostringstream os;
      os << "no steady state after " << settled_ns
         << " ns (relative change " << change << " over last 5 ns)";
      throw CalibrationError(os.str());
    }
    settled_ns = std::min(opts.max_settle_ns, settled_ns * 2.0);
  }

  // Refer the optical phase back to t = 0 so the state can seed a run whose
  // injection phase starts at zero; the equations are invariant under a
  // common rotation of both fields and the drive.
  const cplx back = std::polar(1.0, -dw * static_cast<double>(step) * dt);
  s.e_x *= back;
  s.e_y *= back;
  return s;
}

SfmState simulate_stream(const InjectionWaveform& waveform,
                         const SfmParams& params, const SimConfig& cfg,
                         const SfmState& initial, const SampleSink& sink) {
  params.validate();
  cfg.validate();
  const double dt = cfg.dt_ps * 1e-3;
  const double duration =
      cfg.duration_ns > 0.0 ? cfg.duration_ns : waveform.duration_ns();
  if (waveform.duration_ns() > duration + 1e-9) {
    throw ConfigError("waveform is longer than the configured duration");
  }
  const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
  const double dw = detuning_to_angular(waveform.delta_f_ghz(), params);
  const cplx half_turn = std::polar(1.0, 0.5 * dw * dt);
  const cplx full_turn = std::polar(1.0, dw * dt);

  NoiseSource rng(cfg.rng_seed);
  SfmState s = initial;
  if (!s.finite()) blow_up(0.0);
  const double wave_end = waveform.duration_ns();
  InjectionWaveform::Cursor cursor(waveform);
  auto envelope = [&](double t) {
    return t < wave_end ? cursor.at(t) : waveform.config().baseline_amplitude;
  };
  // The drive phasor advances by a fixed rotation per half step and is
  // recomputed exactly every kResync steps to bound rounding drift.
  constexpr std::size_t kResync = 1024;
  cplx phase{1.0, 0.0};
  double env1 = envelope(0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (k % cfg.record_stride == 0) sink(t, s.power_x(), s.power_y());
    if (k % kResync == 0) phase = std::polar(1.0, dw * t);
    const double env0 = env1;
    const double env_mid = envelope(t + 0.5 * dt);
    env1 = envelope(t + dt);
    const cplx ph0 = params.k_inj * phase;
    const cplx phm = ph0 * half_turn;
    const cplx ph1 = phm * half_turn;
    s = rk4_core(s, dt, env0 * ph0, env_mid * phm, env1 * ph1, params);
    phase *= full_turn;
    if (cfg.noise_enabled) add_noise(s, params, dt, rng);
    flush_tiny(s);
    if (!s.finite()) blow_up(t + dt);
  }
  return s;
}

PowerTrace simulate(const InjectionWaveform& waveform, const SfmParams& params,
                    const SimConfig& cfg, const SfmState& initial) {
  PowerTrace trace;
  trace.t0_ns = 0.0;
  trace.sample_period_ps = cfg.dt_ps * static_cast<double>(cfg.record_stride);
  simulate_stream(waveform, params, cfg, initial,
                  [&](double, double px, double py) {
                    trace.power_x.push_back(px);
                    trace.power_y.push_back(py);
                  });
  return trace;
}

PowerTrace simulate(const InjectionWaveform& waveform, const SfmParams& params,
                    const SimConfig& cfg) {
  RelaxOptions opts;
  opts.baseline_amplitude = waveform.config().baseline_amplitude;
  opts.dt_ps = cfg.dt_ps;
  SfmParams at_rest = params;
  at_rest.delta_f = waveform.delta_f_ghz();
  const SfmState start = relax_to_steady_state(at_rest, opts);
  return simulate(waveform, params, cfg, start);
}

}  // namespace vcsel
