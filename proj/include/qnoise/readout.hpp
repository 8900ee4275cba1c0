#pragma once

// Probe light model and balanced-polarimeter readout.
//
// Stokes fluctuations are white Gaussian streams. Their single-sided PSDs are
// set by the shot-noise constant kappa, the probe power, and the probe's
// (anti)squeezing factors: S2 noise has PSD xi2 * kappa * P_pr and S3 noise has
// PSD xibar2 * kappa * P_pr. S2 is the detected component; S3 drives the
// back-action torque inside the cell.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qnoise/error.hpp"
#include "qnoise/random.hpp"

namespace qnoise {

enum class ProbeKind { coherent, squeezed, antisqueezed };

inline const char* to_string(ProbeKind k) {
  switch (k) {
    case ProbeKind::coherent: return "coherent";
    case ProbeKind::squeezed: return "squeezed";
    case ProbeKind::antisqueezed: return "antisqueezed";
  }
  return "coherent";
}

inline ProbeKind probe_kind_from_string(std::string_view s) {
  if (s == "coherent" || s == "coh") return ProbeKind::coherent;
  if (s == "squeezed" || s == "sq") return ProbeKind::squeezed;
  if (s == "antisqueezed" || s == "asq") return ProbeKind::antisqueezed;
  fail(Errc::config, "unknown probe kind '" + std::string(s) + "'");
}

inline const char* short_name(ProbeKind k) {
  switch (k) {
    case ProbeKind::coherent: return "coh";
    case ProbeKind::squeezed: return "sq";
    case ProbeKind::antisqueezed: return "asq";
  }
  return "coh";
}

inline double db_to_factor(double db) { return std::pow(10.0, db / 10.0); }

struct ProbeState {
  ProbeKind kind = ProbeKind::coherent;
  double xi2 = 1.0;     // noise factor on the detected Stokes component S2
  double xibar2 = 1.0;  // noise factor on the conjugate component S3
  double loss = 1.0;    // power transmission still to be applied before detection
  double kappa = 9.8;   // single-sided shot-noise PSD per mW, in detector units
  double s1_per_mW = 1.0e5;  // mean Stokes S1 per mW of probe power

  void validate() const {
    require(loss > 0.0 && loss <= 1.0, Errc::config, "probe loss must lie in (0, 1]");
    require(kappa >= 0.0 && std::isfinite(kappa), Errc::config, "kappa must be finite and >= 0");
    require(s1_per_mW > 0.0, Errc::config, "s1_per_mW must be > 0");
    require(xi2 > 0.0 && xibar2 > 0.0, Errc::config, "noise factors must be positive");
    constexpr double tol = 1e-12;
    switch (kind) {
      case ProbeKind::coherent:
        require(std::abs(xi2 - 1.0) < tol && std::abs(xibar2 - 1.0) < tol, Errc::config,
                "coherent probe requires xi2 = xibar2 = 1");
        break;
      case ProbeKind::squeezed:
        require(xi2 < 1.0 && 1.0 <= xibar2, Errc::config,
                "squeezed probe requires xi2 < 1 <= xibar2");
        require(xi2 * xibar2 >= 1.0 - tol, Errc::config,
                "squeezed probe violates xi2 * xibar2 >= 1");
        break;
      case ProbeKind::antisqueezed:
        require(xibar2 < 1.0 && 1.0 <= xi2, Errc::config,
                "antisqueezed probe requires xibar2 < 1 <= xi2");
        require(xi2 * xibar2 >= 1.0 - tol, Errc::config,
                "antisqueezed probe violates xi2 * xibar2 >= 1");
        break;
    }
  }

  // Builds a probe of the given kind from the (squeezing, antisqueezing) levels
  // in dB. The antisqueezed kind swaps the roles of S2 and S3.
  static ProbeState from_db(ProbeKind kind, double squeezing_db, double antisqueezing_db) {
    ProbeState p;
    p.kind = kind;
    const double reduced = db_to_factor(-std::abs(squeezing_db));
    const double enhanced = db_to_factor(std::abs(antisqueezing_db));
    if (kind == ProbeKind::squeezed) {
      p.xi2 = reduced;
      p.xibar2 = enhanced;
    } else if (kind == ProbeKind::antisqueezed) {
      p.xi2 = enhanced;
      p.xibar2 = reduced;
    }
    return p;
  }

  friend bool operator==(const ProbeState&, const ProbeState&) = default;
};

// Beam-splitter model: a fraction (1 - eta) of vacuum noise is mixed in.
inline ProbeState apply_loss(const ProbeState& probe, double eta) {
  require(eta > 0.0 && eta <= 1.0, Errc::config, "loss transmission must lie in (0, 1]");
  ProbeState out = probe;
  out.xi2 = eta * probe.xi2 + (1.0 - eta);
  out.xibar2 = eta * probe.xibar2 + (1.0 - eta);
  return out;
}

// State seen by the detector: the stored path loss applied, nothing left to apply.
inline ProbeState detected(const ProbeState& probe) {
  ProbeState out = apply_loss(probe, probe.loss);
  out.loss = 1.0;
  return out;
}

struct StokesSample {
  double S1 = 0.0;
  double S2_noise = 0.0;
  double S3_noise = 0.0;
  double t = 0.0;
};

struct DetectorConfig {
  double gain = 1.0;             // output units per unit S2
  double G_F = 1.0e-4;           // Faraday rotation per unit F_z (rad)
  double sample_rate = 1.0e5;    // Hz

  void validate(double larmor_hz) const {
    require(gain > 0.0, Errc::config, "detector gain must be > 0");
    require(std::isfinite(G_F), Errc::config, "G_F must be finite");
    require(sample_rate > 4.0 * larmor_hz, Errc::config,
            "detector sample rate must exceed 4 f_L");
  }

  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

// Standard deviation per sample of a white stream with single-sided PSD `psd`
// sampled at `f_s`.
inline double white_sigma(double psd, double f_s) { return std::sqrt(psd * f_s / 2.0); }

// Seeded generator of the paired S2/S3 fluctuation streams. The two streams use
// independent engines, so they are uncorrelated and either can be drawn at its
// own rate.
class ProbeNoiseSource {
 public:
  ProbeNoiseSource(const ProbeState& probe, double probe_power_mW, std::uint64_t seed)
      : s2_psd_(probe.xi2 * probe.kappa * probe_power_mW),
        s3_psd_(probe.xibar2 * probe.kappa * probe_power_mW),
        s2_engine_(make_engine(seed, {stream::s2})),
        s3_engine_(make_engine(seed, {stream::s3})) {
    probe.validate();
    require(probe_power_mW >= 0.0, Errc::config, "probe power must be >= 0");
  }

  double s2_psd() const { return s2_psd_; }
  double s3_psd() const { return s3_psd_; }

  double next_s2(double f_s) { return draw(s2_engine_, s2_psd_, f_s); }
  double next_s3(double f_s) { return draw(s3_engine_, s3_psd_, f_s); }

 private:
  double draw(Engine& e, double psd, double f_s) {
    if (psd == 0.0) return 0.0;
    return white_sigma(psd, f_s) * normal_(e);
  }

  double s2_psd_;
  double s3_psd_;
  Engine s2_engine_;
  Engine s3_engine_;
  Normal normal_{0.0, 1.0};
};

struct ProbeNoise {
  std::vector<double> s2;
  std::vector<double> s3;
};

inline ProbeNoise sample_probe_noise(const ProbeState& probe, double probe_power_mW, double f_s,
                                     std::size_t n, std::uint64_t seed) {
  require(n >= 1, Errc::config, "sample_probe_noise needs n >= 1");
  require(f_s > 0.0, Errc::config, "sample rate must be > 0");
  ProbeNoiseSource src(probe, probe_power_mW, seed);
  ProbeNoise out;
  out.s2.resize(n);
  out.s3.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.s2[i] = src.next_s2(f_s);
  for (std::size_t i = 0; i < n; ++i) out.s3[i] = src.next_s3(f_s);
  return out;
}

inline constexpr double max_rotation_rad = 0.1;

// v(t) = gain * (G_F * F_z(t) * S1 + S2_noise(t)) in the small-angle regime.
inline std::vector<double> polarimeter_readout(std::span<const double> fz, std::span<const double> s2_noise,
                                               double s1, const DetectorConfig& det) {
  require(fz.size() == s2_noise.size(), Errc::config, "readout series must have equal length");
  std::vector<double> v(fz.size());
  for (std::size_t i = 0; i < fz.size(); ++i) {
    const double phi = det.G_F * fz[i];
    if (!(std::abs(phi) < max_rotation_rad)) {
      fail(Errc::small_angle, "rotation angle " + std::to_string(phi) + " rad exceeds 0.1 rad");
    }
    v[i] = det.gain * (phi * s1 + s2_noise[i]);
  }
  return v;
}

}  // namespace qnoise
