#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "qnoise/dsp.hpp"
#include "qnoise/sde.hpp"

using namespace qnoise;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double pi = std::numbers::pi;

// Noise-free setup with the dc field along z.
struct Bare {
  PhysicalParams p;
  DriveConfig d;
  Bare(double B) {
    p.B_dc = B;
    p.field_axis = z_hat;
    p.Gamma0 = 0.0;
    p.alpha = 0.0;
    p.G_S = 0.0;
    d.polarized = false;
  }
};

Vec3 integrate(Vec3 F, const PhysicalParams& p, const DriveConfig& d, double t_end, std::size_t n, double s3 = 0.0) {
  const double dt = t_end / static_cast<double>(n);
  SpinState s{F, 0.0};
  for (std::size_t i = 0; i < n; ++i) s = step(s, p, d, dt, s3, {});
  return s.F;
}

// Small unpolarized desk setup at f_L = 1 kHz integrated quickly.
struct Desk {
  PhysicalParams p;
  DriveConfig d;
  DetectorConfig det;
  TrajectoryConfig traj;
  ProbeState probe;
  Desk() {
    p.gamma = two_pi * 1.0e3 / p.B_dc;
    p.G_S = 0.0;
    d.polarized = false;
    d.omega_pump = larmor_frequency(p);
    det.sample_rate = 6.0e3;
    traj.dt = 1.0 / 126.0e3;
    traj.burn_in = 5.0 / p.Gamma0;
  }
};

}  // namespace

TEST_CASE("larmor frequency", "[sde]") {
  PhysicalParams p;
  p.gamma = two_pi * 7.0;  // rad/s per nT
  p.B_dc = 6.0e3;          // nT
  CHECK_THAT(larmor_frequency(p) / two_pi, WithinRel(42.0e3, 1e-12));
  p.B_dc = 0.0;
  CHECK(larmor_frequency(p) == 0.0);
  p.gamma = 1.0;
  p.B_dc = 1.0;
  CHECK(larmor_frequency(p) == 1.0);
}

TEST_CASE("pure precession turns x into -y after a quarter period", "[sde]") {
  Bare b(1.0e-6);
  const double wL = larmor_frequency(b.p);
  const Vec3 F = integrate({b.p.F_max, 0, 0}, b.p, b.d, pi / (2.0 * wL), 2000);
  CHECK_THAT(F.x, WithinAbs(0.0, 1e-5 * b.p.F_max));
  CHECK_THAT(F.y, WithinRel(-b.p.F_max, 1e-6));
  CHECK_THAT(F.z, WithinAbs(0.0, 1e-12));
}

TEST_CASE("constant pumping relaxes to F_max R / (R + Gamma)", "[sde]") {
  Bare b(0.0);
  b.p.Gamma0 = 300.0;
  b.d.polarized = true;
  b.d.waveform = PumpWaveform::constant;
  b.d.pump_power = 10.0;
  b.d.pump_rate_peak = 20.0;  // R = 200 / s
  const double R = 200.0;
  const Vec3 F = integrate({0, 0, 0}, b.p, b.d, 40.0 / (R + b.p.Gamma0), 20000);
  CHECK_THAT(F.z, WithinRel(b.p.F_max * R / (R + b.p.Gamma0), 1e-9));
  CHECK_THAT(F.x, WithinAbs(0.0, 1e-12));
}

TEST_CASE("constant S3 back-action precesses about z at G_S S3", "[sde]") {
  Bare b(0.0);
  b.p.G_S = 0.5;
  const double s3 = 2.0e3;
  const double w0 = b.p.G_S * s3;
  const Vec3 F = integrate({b.p.F_max, 0, 0}, b.p, b.d, pi / (2.0 * w0), 2000, s3);
  CHECK_THAT(F.x, WithinAbs(0.0, 1e-5 * b.p.F_max));
  CHECK_THAT(F.y, WithinRel(b.p.F_max, 1e-6));
}

TEST_CASE("free decay follows exp(-Gamma t) to second order in dt", "[sde]") {
  Bare b(0.0);
  b.p.Gamma0 = 500.0;
  b.p.alpha = 100.0;
  b.d.probe_power = 2.0;
  const double G = total_relaxation(b.p, b.d);
  const double t = 3.0 / G;
  const Vec3 F0{30.0, -40.0, 120.0};
  auto err = [&](std::size_t n) { return std::abs(norm(integrate(F0, b.p, b.d, t, n)) - norm(F0) * std::exp(-G * t)); };
  const double e1 = err(200), e2 = err(400);
  CHECK(e1 < 1e-4 * norm(F0));
  CHECK_THAT(e1 / e2, WithinRel(4.0, 0.05));
}

TEST_CASE("pump rate is non-negative and vanishes when unpolarized", "[sde][property]") {
  DriveConfig d;
  for (auto w : {PumpWaveform::raised_cosine, PumpWaveform::sinusoidal, PumpWaveform::constant}) {
    d.waveform = w;
    d.polarized = true;
    for (int i = 0; i < 2000; ++i) {
      const double t = 1.3e-7 * i;
      CHECK(d.pump_rate(t) >= 0.0);
    }
    d.polarized = false;
    for (int i = 0; i < 200; ++i) CHECK(d.pump_rate(7.1e-7 * i) == 0.0);
  }
}

TEST_CASE("mean pump shape matches its numerical average", "[sde]") {
  DriveConfig d;
  d.omega_pump = two_pi;
  for (auto w : {PumpWaveform::raised_cosine, PumpWaveform::sinusoidal}) {
    d.waveform = w;
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += d.shape((i + 0.5) / n);
    CHECK_THAT(sum / n, WithinRel(d.mean_shape(), 1e-6));
  }
}

TEST_CASE("trajectory config enforces step and burn-in limits", "[sde]") {
  PhysicalParams p;
  TrajectoryConfig t;
  t.burn_in = 5.0 / p.Gamma0;
  t.dt = 0.05 / larmor_frequency(p);
  CHECK_NOTHROW(t.validate(p));
  t.dt *= 1.01;
  CHECK_THROWS_AS(t.validate(p), Error);
  t.dt = 0.04 / larmor_frequency(p);
  t.burn_in = 4.0 / p.Gamma0;
  CHECK_THROWS_AS(t.validate(p), Error);
}

TEST_CASE("zero duration gives an empty trajectory", "[sde]") {
  Desk s;
  s.traj.duration = 0.0;
  const auto tr = simulate_trajectory(s.p, s.d, s.traj, s.probe, s.det);
  CHECK(tr.size() == 0);
}

TEST_CASE("same seed gives bit-identical trajectories", "[sde]") {
  Desk s;
  s.traj.duration = 0.05;
  s.traj.seed = 99;
  s.d.polarized = true;
  s.p.G_S = 0.35;
  const auto a = simulate_trajectory(s.p, s.d, s.traj, s.probe, s.det);
  const auto b = simulate_trajectory(s.p, s.d, s.traj, s.probe, s.det);
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() > 0);
  bool same = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same = same && a.F[i].x == b.F[i].x && a.F[i].y == b.F[i].y && a.F[i].z == b.F[i].z &&
           a.s2_noise[i] == b.s2_noise[i] && a.s3_noise[i] == b.s3_noise[i];
  }
  CHECK(same);
  s.traj.seed = 100;
  const auto c = simulate_trajectory(s.p, s.d, s.traj, s.probe, s.det);
  CHECK(c.F[10].x != a.F[10].x);
}

TEST_CASE("unpolarized spin noise is OU with variance sigma_F2 at every probe power", "[sde][oracle]") {
  // Correlation time 1/Gamma; over T the variance estimate has relative
  // spread about sqrt(2 / (Gamma T)) per component.
  for (double P : {0.5, 3.0}) {
    Desk s;
    s.p.sigma_F2 = 2.5;
    s.p.alpha = s.p.Gamma0 / 3.0;
    s.d.probe_power = P;
    s.traj.duration = 4.0;
    s.traj.seed = 11 + static_cast<std::uint64_t>(P * 10);
    SimulationSwitches sw;
    sw.probe_noise = false;
    const auto tr = simulate_trajectory(s.p, s.d, s.traj, s.probe, s.det, sw);
    double v = 0.0;
    for (const auto& F : tr.F) v += dot(F, F);
    v /= 3.0 * static_cast<double>(tr.size());
    INFO("P = " << P);
    CHECK_THAT(v, WithinRel(s.p.sigma_F2, 0.06));
  }
}

TEST_CASE("precession peak sits at the Larmor frequency", "[sde]") {
  Desk s;
  s.p.Gamma0 = two_pi * 10.0;
  s.traj.burn_in = 5.0 / s.p.Gamma0;
  s.traj.duration = 2.0;
  SimulationSwitches sw;
  sw.probe_noise = false;
  const auto tr = simulate_trajectory(s.p, s.d, s.traj, s.probe, s.det, sw);
  TimeSeries fz{tr.fz(), tr.f_s, tr.t0};
  const auto spec = welch_psd(fz, 1200, 600);
  // Skip the zero-frequency Lorentzian of the component along the field.
  std::size_t k = 40;
  for (std::size_t i = k; i < spec.size(); ++i)
    if (spec.psd[i] > spec.psd[k]) k = i;
  CHECK(std::abs(spec.freqs[k] - larmor_frequency(s.p) / two_pi) <= spec.bin_width());
}
