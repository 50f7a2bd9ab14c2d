#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "vcsel/waveform.hpp"

namespace vcsel {

using cplx = std::complex<double>;

// Spin-flip model constants. Rates in 1/ns, detuning in GHz.
struct SfmParams {
  double gamma_a = 2.0;    // gain anisotropy (dichroism)
  double gamma_p = 128.0;  // linear birefringence
  double gamma_n = 0.5;    // carrier inversion decay
  double gamma_s = 110.0;  // spin-flip relaxation
  double kappa = 185.0;    // field decay
  double alpha = 2.0;      // linewidth enhancement factor
  double mu = 3.0;         // normalised pump, 1 == threshold
  double k_inj = 15.0;     // injection strength
  double beta_sp = 1e-5;   // spontaneous emission strength
  double delta_f = -4.0;   // injection detuning from the x-mode, GHz

  void validate() const;
};

// x is the subsidiary (orthogonal) mode, y the solitary (parallel) mode.
struct SfmState {
  cplx e_x{0.0, 0.0};
  cplx e_y{0.0, 0.0};
  double n_total = 0.0;
  double n_spin = 0.0;

  bool finite() const;
  double power_x() const { return std::norm(e_x); }
  double power_y() const { return std::norm(e_y); }
};

struct SimConfig {
  double dt_ps = 0.05;
  double duration_ns = 0.0;  // 0: use the waveform duration
  std::uint64_t rng_seed = 1;
  bool noise_enabled = false;
  std::size_t record_stride = 20;

  void validate() const;
};

struct PowerTrace {
  double t0_ns = 0.0;
  double sample_period_ps = 0.0;
  std::vector<double> power_x;
  std::vector<double> power_y;

  std::size_t size() const { return power_y.size(); }
  double time_ns(std::size_t i) const {
    return t0_ns + static_cast<double>(i) * sample_period_ps * 1e-3;
  }
  void write_csv(const std::string& path) const;
};

// Angular injection detuning from the x-mode frequency offset, rad/ns.
double detuning_to_angular(double delta_f_ghz, const SfmParams& params);

// Deterministic right-hand side of the rate equations. `injection` is the
// complex sample E_inj(t) * exp(i * dw * t); it is scaled by k_inj and enters
// the x-mode only.
SfmState field_derivatives(const SfmState& state, cplx injection,
                           const SfmParams& params);

// Seeded source of the complex unit-variance Gaussians the noise terms use.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : engine_(seed) {}
  // Zero mean, E|xi|^2 = 1 (each quadrature has variance 1/2).
  cplx complex_gaussian();

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, std::sqrt(0.5)};
};

struct NoisePair {
  cplx f_x;
  cplx f_y;
};

// Spontaneous emission Langevin terms. Negative radicands are clamped to 0.
NoisePair spontaneous_noise(const SfmState& state, const SfmParams& params,
                            NoiseSource& rng);

using EnvelopeFn = std::function<double(double t_ns)>;

// One RK4 step of the deterministic part; when `rng` is non-null the noise is
// added once with sqrt(dt) scaling. t and dt in ns.
SfmState rk4_step(const SfmState& state, double t_ns, double dt_ns,
                  const EnvelopeFn& envelope, const SfmParams& params,
                  NoiseSource* rng);

struct RelaxOptions {
  double baseline_amplitude = 0.0;
  double settle_ns = 50.0;
  double max_settle_ns = 400.0;
  double dt_ps = 0.05;
  double tolerance = 1e-4;  // relative change over the last 5 ns
  std::uint64_t seed = 7;
};

// Integrates from a small seeded field under constant injection, noise off,
// and returns the settled state with phases referred to t = 0.
SfmState relax_to_steady_state(const SfmParams& params,
                               const RelaxOptions& opts = {});

// Receives every recorded sample; lets long runs detect spikes on the fly
// instead of holding the whole trace.
using SampleSink = std::function<void(double t_ns, double power_x, double power_y)>;

// Integrates the waveform starting at t = 0 from `initial`, feeding each
// recorded sample to `sink`. Returns the final state.
SfmState simulate_stream(const InjectionWaveform& waveform,
                         const SfmParams& params, const SimConfig& cfg,
                         const SfmState& initial, const SampleSink& sink);

// Integrates the waveform starting at t = 0 from `initial`.
PowerTrace simulate(const InjectionWaveform& waveform, const SfmParams& params,
                    const SimConfig& cfg, const SfmState& initial);

// Convenience overload that relaxes to the steady state at the waveform's
// baseline first.
PowerTrace simulate(const InjectionWaveform& waveform, const SfmParams& params,
                    const SimConfig& cfg);

}  // namespace vcsel
