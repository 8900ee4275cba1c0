#pragma once

// Stochastic Bloch equation for the collective spin F:
//
//   dF/dt = [-gamma B(t) + G_S S3(t) z] x F - (Gamma0 + alpha P_pr) F
//           + R_OP(t) (F_max z - F) + N_at(t) + N_pr(t)
//
// integrated with a stochastic Heun predictor-corrector. S3 is held constant
// over a step (Wong-Zakai), which makes the multiplicative back-action torque
// a Stratonovich term. Langevin forces are white and isotropic with amplitudes
// fixed by fluctuation-dissipation so that an unpumped ensemble relaxes to
// per-component variance sigma_F2.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "qnoise/constants.hpp"
#include "qnoise/error.hpp"
#include "qnoise/random.hpp"
#include "qnoise/readout.hpp"
#include "qnoise/vec3.hpp"

namespace qnoise {

inline const Vec3 axis_45deg{std::numbers::sqrt2 / 2.0, 0.0, std::numbers::sqrt2 / 2.0};
inline constexpr Vec3 z_hat{0.0, 0.0, 1.0};

struct PhysicalParams {
  double gamma = two_pi * 7.0e9;        // rad s^-1 T^-1 (87Rb, 7 Hz/nT)
  double B_dc = 6.0e-6;                 // T
  Vec3 field_axis = axis_45deg;         // unit vector of the dc field
  double B_rf_amp = 0.0;                // T, along x
  double omega_rf = 0.0;                // rad/s
  double Gamma0 = two_pi * 100.0;       // s^-1
  double alpha = 1.0;                   // s^-1 mW^-1
  double G_S = 0.35;                    // rad s^-1 per unit S3
  double F_max = 5000.0;
  double sigma_F2 = 1.0;

  void validate() const {
    require(gamma > 0.0 && std::isfinite(gamma), Errc::config, "gamma must be > 0");
    require(B_dc >= 0.0 && std::isfinite(B_dc), Errc::config, "B_dc must be >= 0");
    require(std::abs(norm(field_axis) - 1.0) < 1e-9, Errc::config, "field_axis must be a unit vector");
    require(std::isfinite(B_rf_amp) && omega_rf >= 0.0, Errc::config, "invalid rf field");
    require(Gamma0 > 0.0, Errc::config, "Gamma0 must be > 0");
    require(alpha >= 0.0, Errc::config, "alpha must be >= 0");
    require(std::isfinite(G_S), Errc::config, "G_S must be finite");
    require(F_max > 0.0, Errc::config, "F_max must be > 0");
    require(sigma_F2 > 0.0, Errc::config, "sigma_F2 must be > 0");
  }

  friend bool operator==(const PhysicalParams&, const PhysicalParams&) = default;
};

inline double larmor_frequency(const PhysicalParams& p) { return p.gamma * p.B_dc; }

enum class PumpWaveform { raised_cosine, sinusoidal, constant };

inline const char* to_string(PumpWaveform w) {
  switch (w) {
    case PumpWaveform::raised_cosine: return "raised_cosine";
    case PumpWaveform::sinusoidal: return "sinusoidal";
    case PumpWaveform::constant: return "constant";
  }
  return "raised_cosine";
}

struct PowerRange {
  double lo = 0.5;
  double hi = 3.0;
  friend bool operator==(const PowerRange&, const PowerRange&) = default;
};

struct DriveConfig {
  double pump_power = 10.0;      // uW
  double probe_power = 1.0;      // mW
  double omega_pump = two_pi * 42.0e3;  // rad/s
  double pump_rate_peak = 25.0;  // peak R_OP per uW of pump power (s^-1 uW^-1)
  PumpWaveform waveform = PumpWaveform::raised_cosine;
  double duty_cycle = 0.2;       // raised-cosine pulse width as a fraction of the period
  double pump_phase = 0.0;       // rad
  bool polarized = true;
  PowerRange probe_range{};

  void validate() const {
    require(probe_power >= probe_range.lo && probe_power <= probe_range.hi, Errc::config,
            "probe power " + std::to_string(probe_power) + " mW outside configured range");
    require(pump_power >= 0.0, Errc::config, "pump power must be >= 0");
    require(pump_rate_peak >= 0.0, Errc::config, "pump_rate_peak must be >= 0");
    require(duty_cycle > 0.0 && duty_cycle <= 1.0, Errc::config, "duty_cycle must lie in (0, 1]");
    if (polarized && waveform != PumpWaveform::constant) {
      require(omega_pump > 0.0, Errc::config, "omega_pump must be > 0 for a modulated pump");
    }
  }

  // Unit-amplitude periodic pump shape, >= 0 everywhere.
  double shape(double t) const {
    switch (waveform) {
      case PumpWaveform::constant:
        return 1.0;
      case PumpWaveform::sinusoidal: {
        const double ph = omega_pump * t + pump_phase;
        return 0.5 * (1.0 + std::cos(ph));
      }
      case PumpWaveform::raised_cosine: {
        double cyc = (omega_pump * t + pump_phase) / two_pi;
        cyc -= std::floor(cyc);
        const double d = std::min(cyc, 1.0 - cyc);  // distance to pulse centre, in periods
        if (d >= 0.5 * duty_cycle) return 0.0;
        return 0.5 * (1.0 + std::cos(two_pi * d / duty_cycle));
      }
    }
    return 0.0;
  }

  double mean_shape() const {
    switch (waveform) {
      case PumpWaveform::constant: return 1.0;
      case PumpWaveform::sinusoidal: return 0.5;
      case PumpWaveform::raised_cosine: return 0.5 * duty_cycle;
    }
    return 0.0;
  }

  double peak_rate() const { return polarized ? pump_rate_peak * pump_power : 0.0; }

  // R_OP(t); identically zero for an unpolarized ensemble.
  double pump_rate(double t) const { return polarized ? peak_rate() * shape(t) : 0.0; }

  double mean_pump_rate() const { return peak_rate() * mean_shape(); }

  friend bool operator==(const DriveConfig&, const DriveConfig&) = default;
};

struct SpinState {
  Vec3 F;
  double t = 0.0;
};

struct TrajectoryConfig {
  double dt = 1.0e-7;
  double duration = 1.0;
  std::uint64_t seed = 1;
  double burn_in = 0.01;

  void validate(const PhysicalParams& p) const {
    require(dt > 0.0, Errc::config, "dt must be > 0");
    require(dt * larmor_frequency(p) <= 0.05 * (1.0 + 1e-12), Errc::config,
            "dt * omega_L must be <= 0.05");
    require(duration >= 0.0, Errc::config, "duration must be >= 0");
    require(burn_in >= 5.0 / p.Gamma0 * (1.0 - 1e-12), Errc::config, "burn_in must be >= 5 / Gamma0");
  }

  friend bool operator==(const TrajectoryConfig&, const TrajectoryConfig&) = default;
};

// Langevin increments over one step, already scaled by sqrt(dt).
struct LangevinIncrement {
  Vec3 atomic;  // N_at: intrinsic relaxation share
  Vec3 probe;   // N_pr: probe-induced relaxation share
};

inline double total_relaxation(const PhysicalParams& p, const DriveConfig& d) {
  return p.Gamma0 + p.alpha * d.probe_power;
}

inline Vec3 field(const PhysicalParams& p, const DriveConfig& d, double t) {
  Vec3 B = p.field_axis * p.B_dc;
  if (p.B_rf_amp != 0.0) B.x += p.B_rf_amp * std::cos(p.omega_rf * t + d.pump_phase);
  return B;
}

// Standard deviations of the atomic and probe Langevin increments per component
// for a step of length dt, so that var(F_i) -> sigma_F2 at every relaxation rate.
// Optical pumping relaxes the spin as well; its fluctuation partner is carried
// by N_at so a pumped ensemble keeps the same fluctuation level.
inline std::pair<double, double> langevin_sigma(const PhysicalParams& p, const DriveConfig& d, double pump_rate,
                                                double dt) {
  const double at = std::sqrt(2.0 * (p.Gamma0 + pump_rate) * p.sigma_F2 * dt);
  const double pr = std::sqrt(2.0 * p.alpha * d.probe_power * p.sigma_F2 * dt);
  return {at, pr};
}

namespace detail {

struct DriftTerms {
  Vec3 omega;      // angular velocity of the torque term
  double relax;    // total isotropic decay rate including pumping
  double pump;     // R_OP
  double f_max;
};

inline Vec3 drift(const DriftTerms& d, const Vec3& F) {
  Vec3 out = cross(d.omega, F) - F * d.relax;
  out.z += d.pump * d.f_max;
  return out;
}

inline DriftTerms drift_terms(const PhysicalParams& p, const DriveConfig& dr, double gamma_tot, double t,
                              double s3, double pump) {
  DriftTerms d;
  d.omega = field(p, dr, t) * (-p.gamma);
  d.omega.z += p.G_S * s3;
  d.relax = gamma_tot + pump;
  d.pump = pump;
  d.f_max = p.F_max;
  return d;
}

inline Vec3 heun(const Vec3& F, const DriftTerms& a, const DriftTerms& b, const Vec3& noise, double dt) {
  const Vec3 f0 = drift(a, F);
  const Vec3 pred = F + f0 * dt + noise;
  const Vec3 f1 = drift(b, pred);
  return F + (f0 + f1) * (0.5 * dt) + noise;
}

}  // namespace detail

// One stochastic Heun step of length dt with S3 fluctuation `s3` held over the step.
inline SpinState step(const SpinState& state, const PhysicalParams& params, const DriveConfig& drive, double dt,
                      double s3, const LangevinIncrement& langevin) {
  const double g = total_relaxation(params, drive);
  const auto a = detail::drift_terms(params, drive, g, state.t, s3, drive.pump_rate(state.t));
  const auto b = detail::drift_terms(params, drive, g, state.t + dt, s3, drive.pump_rate(state.t + dt));
  SpinState out;
  out.F = detail::heun(state.F, a, b, langevin.atomic + langevin.probe, dt);
  out.t = state.t + dt;
  if (!isfinite(out.F)) fail(Errc::non_finite, "spin state became non-finite at t = " + std::to_string(out.t));
  return out;
}

struct SimulationSwitches {
  bool spin_noise = true;   // Langevin forces
  bool probe_noise = true;  // S2 / S3 fluctuations
};

// Uniformly sampled trajectory after burn-in. Sample i sits at t0 + i / f_s.
struct Trajectory {
  double t0 = 0.0;
  double f_s = 0.0;
  double s1 = 0.0;
  std::vector<Vec3> F;
  std::vector<double> s2_noise;  // detected S2 fluctuation at each sample
  std::vector<double> s3_noise;  // mean pre-cell S3 over the preceding sample interval
  std::size_t excursions = 0;    // samples outside the soft |F| bound

  std::size_t size() const { return F.size(); }
  double time(std::size_t i) const { return t0 + static_cast<double>(i) / f_s; }

  SpinState spin(std::size_t i) const { return {F[i], time(i)}; }
  StokesSample stokes(std::size_t i) const { return {s1, s2_noise[i], s3_noise[i], time(i)}; }

  std::vector<double> fz() const {
    std::vector<double> out(F.size());
    for (std::size_t i = 0; i < F.size(); ++i) out[i] = F[i].z;
    return out;
  }
};

// Number of integrator steps per readout sample; dt must divide 1 / f_s.
inline std::size_t substeps_per_sample(double dt, double f_s) {
  const double m = 1.0 / (f_s * dt);
  const double r = std::round(m);
  require(r >= 1.0 && std::abs(m - r) <= 1e-6 * r, Errc::config,
          "integrator step must divide the detector sample interval");
  return static_cast<std::size_t>(r);
}

// Integrates the spin and generates the probe fluctuations for one trajectory.
// The S3 value driving the torque in each step is the same realization that is
// returned (block-averaged) in the Stokes samples. S3 uses the pre-cell probe
// state; S2 uses the detected state after the probe's path loss.
inline Trajectory simulate_trajectory(const PhysicalParams& params, const DriveConfig& drive,
                                      const TrajectoryConfig& traj, const ProbeState& probe,
                                      const DetectorConfig& det, SimulationSwitches sw = {}) {
  params.validate();
  drive.validate();
  traj.validate(params);
  probe.validate();
  det.validate(larmor_frequency(params) / two_pi);

  const double dt = traj.dt;
  const std::size_t m = substeps_per_sample(dt, det.sample_rate);
  const double f_s = det.sample_rate;
  const double f_int = 1.0 / dt;
  const auto n_burn = static_cast<std::size_t>(std::ceil(traj.burn_in * f_s - 1e-9));
  const auto n_out = static_cast<std::size_t>(std::floor(traj.duration * f_s + 1e-9));

  Engine spin_rng = make_engine(traj.seed, {stream::spin});
  Engine init_rng = make_engine(traj.seed, {stream::initial});
  Normal normal(0.0, 1.0);

  ProbeNoiseSource s3_src(probe, drive.probe_power, traj.seed);
  ProbeNoiseSource s2_src(detected(probe), drive.probe_power, traj.seed);

  Trajectory out;
  out.f_s = f_s;
  out.t0 = static_cast<double>(n_burn + 1) / f_s;
  out.s1 = probe.s1_per_mW * drive.probe_power;
  out.F.reserve(n_out);
  out.s2_noise.reserve(n_out);
  out.s3_noise.reserve(n_out);

  // Start from the unpolarized stationary distribution.
  const double sd0 = std::sqrt(params.sigma_F2);
  Vec3 F{sd0 * normal(init_rng), sd0 * normal(init_rng), sd0 * normal(init_rng)};
  if (!sw.spin_noise) F = Vec3{};

  const double g = total_relaxation(params, drive);
  const double soft_bound = params.F_max + 6.0 * std::sqrt(3.0 * params.sigma_F2);
  const double sd_pr = langevin_sigma(params, drive, 0.0, dt).second;
  const double sd_pr2 = sd_pr * sd_pr;

  std::uint64_t k = 0;
  double pump_now = drive.pump_rate(0.0);
  const std::size_t n_total = n_burn + n_out;
  for (std::size_t sample = 0; sample < n_total; ++sample) {
    double s3_sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double t = static_cast<double>(k) * dt;
      const double t1 = static_cast<double>(k + 1) * dt;
      const double pump_next = drive.pump_rate(t1);
      const double s3 = sw.probe_noise ? s3_src.next_s3(f_int) : 0.0;
      Vec3 noise{};
      if (sw.spin_noise) {
        // N_at and N_pr are independent Gaussians: draw their sum directly.
        const double sd_at = langevin_sigma(params, drive, 0.5 * (pump_now + pump_next), dt).first;
        const double sd = std::sqrt(sd_at * sd_at + sd_pr2);
        noise = Vec3{sd * normal(spin_rng), sd * normal(spin_rng), sd * normal(spin_rng)};
      }
      const auto a = detail::drift_terms(params, drive, g, t, s3, pump_now);
      const auto b = detail::drift_terms(params, drive, g, t1, s3, pump_next);
      F = detail::heun(F, a, b, noise, dt);
      pump_now = pump_next;
      s3_sum += s3;
      ++k;
    }
    if (!isfinite(F)) {
      fail(Errc::non_finite, "spin state became non-finite at t = " + std::to_string(static_cast<double>(k) * dt));
    }
    const double s2 = sw.probe_noise ? s2_src.next_s2(f_s) : 0.0;
    if (sample < n_burn) continue;
    if (norm(F) > soft_bound) ++out.excursions;
    out.F.push_back(F);
    out.s2_noise.push_back(s2);
    out.s3_noise.push_back(s3_sum / static_cast<double>(m));
  }
  return out;
}

}  // namespace qnoise
