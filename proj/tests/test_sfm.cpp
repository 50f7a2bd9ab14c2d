#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "vcsel/errors.hpp"
#include "vcsel/sfm.hpp"

namespace vcsel {
namespace {

constexpr cplx kI{0.0, 1.0};

// Rate equations transcribed term by term in complex arithmetic.
SfmState oracle_rhs(const SfmState& s, cplx inj, const SfmParams& p) {
  const double k = p.kappa, a = p.alpha;
  const cplx ex = s.e_x, ey = s.e_y;
  const double N = s.n_total, n = s.n_spin;
  const cplx cross = kI * (ey * std::conj(ex) - ex * std::conj(ey));
  SfmState d;
  d.e_x = -(k + p.gamma_a) * ex - kI * (k * a + p.gamma_p) * ex +
          k * (1.0 + kI * a) * (N * ex + kI * n * ex) + p.k_inj * inj;
  d.e_y = -(k - p.gamma_a) * ey - kI * (k * a - p.gamma_p) * ey +
          k * (1.0 + kI * a) * (N * ey - kI * n * ey);
  d.n_total = (-p.gamma_n * (N * (1.0 + std::norm(ex) + std::norm(ey)) - p.mu +
                             n * cross))
                  .real();
  d.n_spin = (-p.gamma_s * n -
              p.gamma_n * (n * (std::norm(ex) - std::norm(ey)) + N * cross))
                 .real();
  return d;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::abs(b));
}

TEST(Sfm, DerivativesMatchComplexTranscription) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  SfmParams p;
  for (int i = 0; i < 200; ++i) {
    SfmState s{{u(rng), u(rng)}, {u(rng), u(rng)}, 1.0 + 0.5 * u(rng), 0.1 * u(rng)};
    const cplx inj{u(rng), u(rng)};
    const SfmState got = field_derivatives(s, inj, p);
    const SfmState want = oracle_rhs(s, inj, p);
    EXPECT_LT(rel_err(got.e_x.real(), want.e_x.real()), 1e-12);
    EXPECT_LT(rel_err(got.e_x.imag(), want.e_x.imag()), 1e-12);
    EXPECT_LT(rel_err(got.e_y.real(), want.e_y.real()), 1e-12);
    EXPECT_LT(rel_err(got.e_y.imag(), want.e_y.imag()), 1e-12);
    EXPECT_LT(rel_err(got.n_total, want.n_total), 1e-12);
    EXPECT_LT(rel_err(got.n_spin, want.n_spin), 1e-12);
  }
}

TEST(Sfm, InjectionEntersXModeOnly) {
  SfmParams p;
  const SfmState s{{0.3, 0.1}, {0.2, -0.4}, 1.1, 0.01};
  const SfmState a = field_derivatives(s, {0.0, 0.0}, p);
  const SfmState b = field_derivatives(s, {1.0, 0.5}, p);
  EXPECT_NEAR(b.e_x.real() - a.e_x.real(), p.k_inj * 1.0, 1e-9);
  EXPECT_NEAR(b.e_x.imag() - a.e_x.imag(), p.k_inj * 0.5, 1e-9);
  EXPECT_EQ(a.e_y, b.e_y);
  EXPECT_EQ(a.n_total, b.n_total);
  EXPECT_EQ(a.n_spin, b.n_spin);
}

TEST(Sfm, AngularDetuning) {
  SfmParams p;
  // 2 pi (-4) + 2 * 2 - 128
  const double want = 2.0 * std::numbers::pi * -4.0 + 4.0 - 128.0;
  EXPECT_NEAR(detuning_to_angular(-4.0, p), want, 1e-12);
  EXPECT_NEAR(detuning_to_angular(-4.0, p), -149.133, 5e-4);
}

TEST(Sfm, OffStateIsFixedPoint) {
  SfmParams p;
  const SfmState off{{0.0, 0.0}, {0.0, 0.0}, p.mu, 0.0};
  const SfmState d = field_derivatives(off, {0.0, 0.0}, p);
  EXPECT_EQ(std::abs(d.e_x), 0.0);
  EXPECT_EQ(std::abs(d.e_y), 0.0);
  EXPECT_EQ(d.n_total, 0.0);
  EXPECT_EQ(d.n_spin, 0.0);
}

TEST(Sfm, ParamValidation) {
  SfmParams p;
  p.kappa = -1.0;
  EXPECT_THROW(p.validate(), ConfigError);
  SimConfig s;
  s.dt_ps = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Sfm, NoiseMoments) {
  NoiseSource rng(5);
  const int n = 200000;
  cplx mean{0.0, 0.0};
  double power = 0.0, re2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const cplx x = rng.complex_gaussian();
    mean += x;
    power += std::norm(x);
    re2 += x.real() * x.real();
  }
  EXPECT_LT(std::abs(mean / double(n)), 0.01);
  EXPECT_NEAR(power / n, 1.0, 0.01);
  EXPECT_NEAR(re2 / n, 0.5, 0.01);
}

TEST(Sfm, NoiseAmplitudeAndClamp) {
  SfmParams p;
  p.beta_sp = 1e-4;
  SfmState s{{1.0, 0.0}, {0.0, 0.0}, 1.2, 0.0};
  NoiseSource rng(9);
  double sum_x = 0.0, sum_y = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const NoisePair f = spontaneous_noise(s, p, rng);
    sum_x += std::norm(f.f_x);
    sum_y += std::norm(f.f_y);
  }
  // E|F|^2 = beta gamma_n / 2 * ((N + n) + (N - n))
  const double want = p.beta_sp * p.gamma_n / 2.0 * 2.0 * s.n_total;
  EXPECT_NEAR(sum_x / n, want, 0.02 * want);
  EXPECT_NEAR(sum_y / n, want, 0.02 * want);

  // |n| > N: radicands clamp instead of producing NaN.
  s.n_total = 0.1;
  s.n_spin = 0.5;
  const NoisePair f = spontaneous_noise(s, p, rng);
  EXPECT_TRUE(std::isfinite(f.f_x.real()) && std::isfinite(f.f_y.imag()));
}

SfmState integrate(double h, double t_end, const SfmParams& p) {
  SfmState s{{0.4, 0.2}, {0.3, -0.1}, 1.05, 0.02};
  // Smooth injection pulse so the drive term is exercised.
  EnvelopeFn env = [](double t) {
    return 1.2 * (1.0 - 0.3 * std::exp(-std::pow((t - 0.05) / 0.02, 2)));
  };
  const auto steps = static_cast<int>(std::llround(t_end / h));
  for (int i = 0; i < steps; ++i) s = rk4_step(s, i * h, h, env, p, nullptr);
  return s;
}

double distance(const SfmState& a, const SfmState& b) {
  return std::abs(a.e_x - b.e_x) + std::abs(a.e_y - b.e_y) +
         std::abs(a.n_total - b.n_total) + std::abs(a.n_spin - b.n_spin);
}

TEST(Sfm, Rk4ConvergenceOrder) {
  SfmParams p;
  const double t_end = 0.1;
  const SfmState a = integrate(0.002, t_end, p);
  const SfmState b = integrate(0.001, t_end, p);
  const SfmState c = integrate(0.0005, t_end, p);
  const double order = std::log2(distance(a, b) / distance(b, c));
  EXPECT_GE(order, 3.5) << "observed order " << order;
}

TEST(Sfm, BelowThresholdQuiescence) {
  SfmParams p;
  p.mu = 0.5;
  SfmState s{{1e-3, 0.0}, {1e-3, 0.0}, 0.5, 0.0};
  EnvelopeFn dark = [](double) { return 0.0; };
  const double h = 0.001;
  for (int i = 0; i < 10000; ++i) s = rk4_step(s, i * h, h, dark, p, nullptr);
  EXPECT_LT(s.power_x() + s.power_y(), 1e-12);
  EXPECT_NEAR(s.n_total, p.mu, 1e-6);
}

TEST(Sfm, RelaxationLocksAboveBoundary) {
  SfmParams p;
  RelaxOptions o;
  o.baseline_amplitude = 1.2;
  o.dt_ps = 0.5;
  const SfmState s = relax_to_steady_state(p, o);
  EXPECT_GT(s.power_x(), 1.0);
  EXPECT_LT(s.power_y(), 1e-6 * s.power_x());
  EXPECT_THROW(relax_to_steady_state(p, RelaxOptions{1.2, 1.0}), ConfigError);
}

InjectionWaveform flat_wave(double amp, std::int64_t ps) {
  EncodingConfig e;
  e.baseline_amplitude = amp;
  e.sample_period_ps = 0.5;
  return InjectionWaveform(e, -4.0, ps);
}

TEST(Sfm, SeededDeterminism) {
  SfmParams p;
  SimConfig c;
  c.dt_ps = 0.5;
  c.noise_enabled = true;
  c.record_stride = 1;
  c.rng_seed = 77;
  const auto w = flat_wave(1.2, 2000);
  const SfmState start{{1.4, 0.2}, {0.0, 0.0}, 0.95, 0.0};
  const PowerTrace a = simulate(w, p, c, start);
  const PowerTrace b = simulate(w, p, c, start);
  EXPECT_EQ(a.power_x, b.power_x);
  EXPECT_EQ(a.power_y, b.power_y);
  c.rng_seed = 78;
  const PowerTrace d = simulate(w, p, c, start);
  EXPECT_NE(a.power_y, d.power_y);
}

TEST(Sfm, StreamMatchesTrace) {
  SfmParams p;
  SimConfig c;
  c.dt_ps = 0.5;
  c.record_stride = 4;
  const auto w = flat_wave(1.2, 1000);
  const SfmState start{{1.4, 0.2}, {0.0, 0.0}, 0.95, 0.0};
  const PowerTrace t = simulate(w, p, c, start);
  std::vector<double> px;
  simulate_stream(w, p, c, start, [&](double, double x, double) { px.push_back(x); });
  EXPECT_EQ(px, t.power_x);
  EXPECT_EQ(t.size(), 500u);
  EXPECT_DOUBLE_EQ(t.sample_period_ps, 2.0);
}

TEST(Sfm, NonFiniteStateIsIntegrationError) {
  SfmParams p;
  SimConfig c;
  c.dt_ps = 0.5;
  const auto w = flat_wave(1.2, 100);
  const SfmState bad{{std::nan(""), 0.0}, {0.0, 0.0}, 1.0, 0.0};
  try {
    simulate(w, p, c, bad);
    FAIL() << "expected IntegrationError";
  } catch (const IntegrationError& e) {
    EXPECT_EQ(e.exit_code(), 4);
  }
}

}  // namespace
}  // namespace vcsel
