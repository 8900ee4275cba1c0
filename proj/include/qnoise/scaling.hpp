#pragma once

// Power-law fits and sweep campaigns over (probe power, pump power, probe
// kind, polarization, channel).

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qnoise/dsp.hpp"
#include "qnoise/error.hpp"
#include "qnoise/fit.hpp"
#include "qnoise/random.hpp"
#include "qnoise/readout.hpp"
#include "qnoise/sde.hpp"

namespace qnoise {

struct PowerPoint {
  double P = 0.0;
  double y = 0.0;
  double sigma = 1.0;
};

struct ScalingFit {
  double exponent = 1.0;
  double a_n = 0.0;
  double a0 = 0.0;
  double se_a_n = 0.0;
  double se_a0 = 0.0;
  double cov_a0_an = 0.0;
  double chi2 = 0.0;
  std::size_t n_points = 0;
};

// Weighted least squares for y = a0 + a_n * P^n.
inline ScalingFit fit_power_law(const std::vector<PowerPoint>& pts, double n) {
  require(pts.size() >= 3, Errc::validation, "power-law fit needs at least 3 points");
  double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : pts) {
    require(p.sigma > 0.0 && std::isfinite(p.sigma), Errc::validation, "power-law fit needs sigma > 0");
    const double w = 1.0 / (p.sigma * p.sigma);
    const double x = std::pow(p.P, n);
    s += w;
    sx += w * x;
    sy += w * p.y;
    sxx += w * x * x;
    sxy += w * x * p.y;
  }
  const double det = s * sxx - sx * sx;
  bool all_equal = true;
  for (const auto& p : pts) all_equal = all_equal && p.P == pts.front().P;
  if (all_equal || !(std::abs(det) > 1e-14 * s * sxx)) fail(Errc::singular, "power-law fit is singular: all P equal");
  ScalingFit f;
  f.exponent = n;
  f.a_n = (s * sxy - sx * sy) / det;
  f.a0 = (sxx * sy - sx * sxy) / det;
  f.se_a_n = std::sqrt(s / det);
  f.se_a0 = std::sqrt(sxx / det);
  f.cov_a0_an = -sx / det;
  f.n_points = pts.size();
  for (const auto& p : pts) {
    const double r = (p.y - f.a0 - f.a_n * std::pow(p.P, n)) / p.sigma;
    f.chi2 += r * r;
  }
  return f;
}

// Weighted mean; a_n holds the level, exponent 0.
inline ScalingFit fit_constant(const std::vector<PowerPoint>& pts) {
  require(!pts.empty(), Errc::validation, "constant fit needs at least 1 point");
  double s = 0, sy = 0;
  for (const auto& p : pts) {
    require(p.sigma > 0.0 && std::isfinite(p.sigma), Errc::validation, "constant fit needs sigma > 0");
    const double w = 1.0 / (p.sigma * p.sigma);
    s += w;
    sy += w * p.y;
  }
  ScalingFit f;
  f.exponent = 0.0;
  f.a_n = sy / s;
  f.se_a_n = std::sqrt(1.0 / s);
  f.n_points = pts.size();
  for (const auto& p : pts) f.chi2 += std::pow((p.y - f.a_n) / p.sigma, 2);
  return f;
}

struct ExponentFit {
  double n = 0.0;
  double se = 0.0;
  double a0 = 0.0;     // offset removed before the log-log regression
  double scale = 0.0;  // prefactor c in y - a0 = c * P^n
};

// Log-log regression slope of (y - a0) against P. Without an explicit a0 the
// offset comes from the fixed-exponent fit at `nominal_n`.
inline ExponentFit fit_free_exponent(const std::vector<PowerPoint>& pts, double nominal_n,
                                     std::optional<double> a0 = {}) {
  require(pts.size() >= 4, Errc::validation, "free-exponent fit needs at least 4 points");
  ExponentFit e;
  e.a0 = a0 ? *a0 : fit_power_law(pts, nominal_n).a0;
  std::vector<PowerPoint> logs;
  for (const auto& p : pts) {
    const double y = p.y - e.a0;
    if (!(y > 0.0)) {
      fail(Errc::non_positive, "offset-corrected value " + std::to_string(y) + " at P = " + std::to_string(p.P) +
                                   " is not positive");
    }
    require(p.P > 0.0, Errc::non_positive, "free-exponent fit needs P > 0");
    logs.push_back({std::log(p.P), std::log(y), p.sigma / y});
  }
  // Linear fit in log space: exponent 1 on ln P.
  const auto f = fit_power_law(logs, 1.0);
  e.n = f.a_n;
  e.se = f.se_a_n;
  e.scale = std::exp(f.a0);
  return e;
}

inline double db_ratio(double a_state, double a_coherent) {
  if (!(a_state > 0.0) || !(a_coherent > 0.0)) fail(Errc::undefined, "dB ratio needs two positive coefficients");
  return 10.0 * std::log10(a_state / a_coherent);
}

inline double db_ratio_se(double a, double se_a, double b, double se_b) {
  return 10.0 / std::log(10.0) * std::hypot(se_a / a, se_b / b);
}

// ---------------------------------------------------------------------------
// Campaign configuration

struct CampaignGrid {
  std::vector<double> probe_powers{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};  // mW
  std::vector<double> pump_powers{5.0, 10.0, 15.0};               // uW
  std::vector<ProbeKind> probe_kinds{ProbeKind::coherent, ProbeKind::squeezed, ProbeKind::antisqueezed};
  std::vector<Channel> channels{Channel::dc, Channel::rf};
  std::vector<bool> polarizations{false, true};
  std::size_t replicates = 1;
  std::uint64_t base_seed = 1;

  void validate() const {
    require(!probe_powers.empty(), Errc::config, "grid.probe_powers must not be empty");
    require(!pump_powers.empty(), Errc::config, "grid.pump_powers must not be empty");
    require(!probe_kinds.empty(), Errc::config, "grid.probe_kinds must not be empty");
    require(!channels.empty(), Errc::config, "grid.channels must not be empty");
    require(!polarizations.empty(), Errc::config, "grid.polarizations must not be empty");
    require(replicates >= 1, Errc::config, "grid.replicates must be >= 1");
    for (double p : probe_powers) require(p > 0.0, Errc::config, "probe powers must be > 0");
    for (double p : pump_powers) require(p > 0.0, Errc::config, "pump powers must be > 0");
  }

  friend bool operator==(const CampaignGrid&, const CampaignGrid&) = default;
};

struct ProbeSettings {
  double squeezed_xi2 = 0.76;
  double squeezed_xibar2 = 1.85;
  double loss = 1.0;
  double kappa = 9.8;
  double s1_per_mW = 6.4e5;

  // Antisqueezed light is the squeezed state rotated by 90 degrees: factors swap.
  ProbeState state(ProbeKind kind) const {
    ProbeState p;
    p.kind = kind;
    if (kind == ProbeKind::squeezed) {
      p.xi2 = squeezed_xi2;
      p.xibar2 = squeezed_xibar2;
    } else if (kind == ProbeKind::antisqueezed) {
      p.xi2 = squeezed_xibar2;
      p.xibar2 = squeezed_xi2;
    }
    p.loss = loss;
    p.kappa = kappa;
    p.s1_per_mW = s1_per_mW;
    return p;
  }

  friend bool operator==(const ProbeSettings&, const ProbeSettings&) = default;
};

struct TimingSettings {
  double dt = 0.0;         // s
  double duration = 8.0;   // s per replicate, after burn-in
  double burn_in = 0.05;   // s
  friend bool operator==(const TimingSettings&, const TimingSettings&) = default;
};

struct DspSettings {
  double lp_cutoff = 0.0;  // Hz
  std::size_t decim = 15;
  std::size_t segment_len = 800;
  std::size_t overlap = 400;
  Window window = Window::hann;
  Detrend detrend = Detrend::mean;
  std::vector<Band> mask_bands{{45.0, 55.0}, {3900.0, 4100.0}};
  double fit_f_min = 0.0;  // Hz; bins at or below are skipped by the fit
  double fit_f_max = 0.0;  // Hz

  friend bool operator==(const DspSettings&, const DspSettings&) = default;
};

struct FitSettings {
  std::size_t n_boot = 200;
  BootstrapStyle style = BootstrapStyle::parametric;
  int max_iter = 500;
  double tol = 1e-10;
  double degenerate_lr = 5.99;

  friend bool operator==(const FitSettings&, const FitSettings&) = default;
};

// Fully resolved campaign inputs (no derived defaults left at zero).
struct CampaignConfig {
  PhysicalParams physical;
  DriveConfig drive;  // template: powers and polarization are set per cell
  DetectorConfig detector;
  ProbeSettings probe;
  TimingSettings timing;
  DspSettings dsp;
  FitSettings fit;
  CampaignGrid grid;

  double f_ref() const { return drive.omega_pump / two_pi; }
  double f_out() const { return detector.sample_rate / static_cast<double>(dsp.decim); }

  void validate() const {
    physical.validate();
    grid.validate();
    require(timing.dt > 0.0, Errc::config, "timing.dt must be resolved to a positive value");
    require(timing.duration > 0.0, Errc::config, "timing.duration must be > 0");
    require(dsp.lp_cutoff > 0.0, Errc::config, "dsp.lp_cutoff must be resolved to a positive value");
    require(dsp.fit_f_max > 0.0, Errc::config, "dsp.fit_f_max must be resolved to a positive value");
    require(dsp.fit_f_min >= 0.0 && dsp.fit_f_min < dsp.fit_f_max, Errc::config,
            "dsp.fit_f_min must lie in [0, fit_f_max)");
    require(dsp.decim >= 1, Errc::config, "dsp.decim must be >= 1");
    require(dsp.overlap < dsp.segment_len, Errc::config, "dsp.overlap must be < dsp.segment_len");
    require(fit.n_boot >= 1, Errc::config, "fit.n_boot must be >= 1");
    require(dsp.lp_cutoff < f_out() / 2.0, Errc::alias, "dsp.lp_cutoff must be below the decimated Nyquist frequency");
    require(f_ref() < detector.sample_rate / 2.0, Errc::alias, "pump frequency must be below detector Nyquist");
    TrajectoryConfig t{timing.dt, timing.duration, 0, timing.burn_in};
    t.validate(physical);
    detector.validate(larmor_frequency(physical) / two_pi);
    substeps_per_sample(timing.dt, detector.sample_rate);
    for (auto k : grid.probe_kinds) probe.state(k).validate();
    DriveConfig d = drive;
    for (double p : grid.probe_powers) {
      d.probe_power = p;
      d.validate();
    }
  }

  friend bool operator==(const CampaignConfig&, const CampaignConfig&) = default;
};

// ---------------------------------------------------------------------------
// Single cell: simulate, demodulate, estimate spectra

struct CellKey {
  ProbeKind kind = ProbeKind::coherent;
  bool polarized = false;
  double pump_power = 0.0;  // 0 for unpolarized cells
  double probe_power = 0.0;
  friend bool operator==(const CellKey&, const CellKey&) = default;
};

inline std::uint64_t cell_seed(std::uint64_t base, const CellKey& k, std::size_t replicate) {
  return derive_seed(base, {stream::cell, static_cast<std::uint64_t>(k.kind), k.polarized ? 1u : 0u,
                            std::bit_cast<std::uint64_t>(k.pump_power), std::bit_cast<std::uint64_t>(k.probe_power),
                            replicate});
}

struct ChannelSpectra {
  std::vector<SpectrumRecord> by_channel;  // same order as grid.channels
  std::size_t excursions = 0;
};

inline SpectrumRecord average_spectra(const std::vector<SpectrumRecord>& reps) {
  require(!reps.empty(), Errc::internal, "no spectra to average");
  SpectrumRecord out = reps.front();
  for (std::size_t r = 1; r < reps.size(); ++r) {
    const auto& s = reps[r];
    require(s.size() == out.size(), Errc::internal, "replicate spectra differ in length");
    for (std::size_t i = 0; i < s.size(); ++i) out.psd[i] += s.psd[i];
    out.meta.n_segments += s.meta.n_segments;
    out.meta.dof_shape += s.meta.dof_shape;
    for (const auto& seg : s.segments) out.segments.push_back(seg);
  }
  for (double& p : out.psd) p /= static_cast<double>(reps.size());
  return out;
}

// Polarimeter readout, lock-in and Welch estimate of one trajectory, one
// spectrum per configured channel (unmasked, single replicate).
inline std::vector<SpectrumRecord> trajectory_spectra(const CampaignConfig& cfg, const CellKey& key,
                                                      const Trajectory& tr, std::uint64_t seed) {
  TimeSeries v;
  v.f_s = tr.f_s;
  v.t0 = tr.t0;
  v.values = polarimeter_readout(tr.fz(), tr.s2_noise, tr.s1, cfg.detector);
  const auto dm = lockin_demodulate(v, cfg.f_ref(), cfg.drive.pump_phase, cfg.dsp.lp_cutoff, cfg.dsp.decim);
  WelchOptions wo;
  wo.segment_len = cfg.dsp.segment_len;
  wo.overlap = cfg.dsp.overlap;
  wo.window = cfg.dsp.window;
  wo.detrend = cfg.dsp.detrend;
  wo.keep_segments = cfg.fit.style == BootstrapStyle::segment;
  std::vector<SpectrumRecord> out;
  for (const Channel ch : cfg.grid.channels) {
    auto s = welch_psd(ch == Channel::dc ? dm.dc : dm.rf, wo);
    s.channel = ch;
    s.meta.probe_power = key.probe_power;
    s.meta.pump_power = key.pump_power;
    s.meta.kind = key.kind;
    s.meta.polarized = key.polarized;
    s.meta.seed = seed;
    out.push_back(std::move(s));
  }
  return out;
}

inline DriveConfig cell_drive(const CampaignConfig& cfg, const CellKey& key) {
  DriveConfig drive = cfg.drive;
  drive.probe_power = key.probe_power;
  drive.pump_power = key.pump_power;
  drive.polarized = key.polarized;
  return drive;
}

// Simulates every replicate of a cell, averages their spectra and masks
// technical peaks.
inline ChannelSpectra simulate_cell_spectra(const CampaignConfig& cfg, const CellKey& key) {
  ChannelSpectra out;
  std::vector<std::vector<SpectrumRecord>> reps(cfg.grid.channels.size());
  const ProbeState probe = cfg.probe.state(key.kind);
  const DriveConfig drive = cell_drive(cfg, key);
  for (std::size_t r = 0; r < cfg.grid.replicates; ++r) {
    const std::uint64_t seed = cell_seed(cfg.grid.base_seed, key, r);
    TrajectoryConfig traj{cfg.timing.dt, cfg.timing.duration, seed, cfg.timing.burn_in};
    const auto tr = simulate_trajectory(cfg.physical, drive, traj, probe, cfg.detector);
    out.excursions += tr.excursions;
    auto spectra = trajectory_spectra(cfg, key, tr, seed);
    for (std::size_t c = 0; c < spectra.size(); ++c) reps[c].push_back(std::move(spectra[c]));
  }
  for (auto& rc : reps) {
    auto s = average_spectra(rc);
    s.meta.seed = cell_seed(cfg.grid.base_seed, key, 0);
    out.by_channel.push_back(mask_technical_peaks(std::move(s), cfg.dsp.mask_bands));
  }
  return out;
}

inline FitOptions fit_options(const CampaignConfig& cfg) {
  FitOptions o;
  o.f_min = cfg.dsp.fit_f_min;
  o.f_max = cfg.dsp.fit_f_max;
  o.max_iter = cfg.fit.max_iter;
  o.tol = cfg.fit.tol;
  o.degenerate_lr = cfg.fit.degenerate_lr;
  return o;
}

// Fit with bootstrap under the campaign's settings. The detected xi2 of the
// probe kind is held fixed; the bootstrap stream is keyed by cell seed and channel.
inline BootstrapResult fit_spectrum(const CampaignConfig& cfg, ProbeKind kind, const SpectrumRecord& s,
                                    std::uint64_t cell_seed_value) {
  BootstrapOptions bo;
  bo.n_boot = cfg.fit.n_boot;
  bo.style = cfg.fit.style;
  bo.seed = derive_seed(cell_seed_value, {stream::bootstrap, static_cast<std::uint64_t>(s.channel)});
  bo.fit = fit_options(cfg);
  return bootstrap_fit(s, detected(cfg.probe.state(kind)).xi2, bo);
}

// ---------------------------------------------------------------------------
// Campaign results

struct ChannelFit {
  Channel channel = Channel::dc;
  SpectrumRecord spectrum;
  BootstrapResult boot;
};

struct CellResult {
  CellKey key;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error_code;
  std::string error_message;
  std::size_t excursions = 0;
  std::vector<ChannelFit> channels;

  const ChannelFit* channel(Channel c) const {
    for (const auto& f : channels)
      if (f.channel == c) return &f;
    return nullptr;
  }
};

// 1-sigma half-widths with a curvature fallback when the bootstrap is too small.
inline double sigma_floor(const ChannelFit& f) {
  if (f.boot.floor.size() >= 10) {
    const double s = percentiles(f.boot.floor).sigma();
    if (s > 0.0) return s;
  }
  return f.boot.base.model.xi2 * std::sqrt(std::max(f.boot.base.cov[0][0], 0.0));
}

inline double sigma_total(const ChannelFit& f) {
  if (f.boot.total.size() >= 10) {
    const double s = percentiles(f.boot.total).sigma();
    if (s > 0.0) return s;
  }
  const auto& m = f.boot.base.model;
  const auto& c = f.boot.base.cov;
  const double k = std::numbers::pi / 2.0;
  const double v = k * k * (m.delta_f * m.delta_f * c[1][1] + m.S_atomic * m.S_atomic * c[2][2] +
                            2.0 * m.S_atomic * m.delta_f * c[1][2]);
  return std::sqrt(std::max(v, 0.0));
}

inline double sigma_of(const std::vector<double>& reps, double fallback) {
  if (reps.size() >= 10) {
    const double s = percentiles(reps).sigma();
    if (s > 0.0) return s;
  }
  return fallback;
}

struct DecompositionRow {
  ProbeKind kind = ProbeKind::coherent;
  Channel channel = Channel::dc;
  double pump_power = 0.0;
  double probe_power = 0.0;
  NoiseDecomposition d;
  double sigma_psn = 0.0;
  double sigma_spn = 0.0;
  double sigma_mba = 0.0;
};

struct ScalingRow {
  std::string table;     // psn_vs_probe, spn_tot_vs_probe, ...
  ProbeKind kind = ProbeKind::coherent;
  Channel channel = Channel::dc;
  bool polarized = false;
  double pump_power = 0.0;  // 0 when the row is not tied to one pump power
  double nominal_n = 1.0;
  std::vector<PowerPoint> points;
  std::optional<ScalingFit> fit;
  std::optional<ExponentFit> exponent;
  std::optional<double> db;
  std::optional<double> db_se;
  std::string error;  // fit failure for this row, if any
};

inline ScalingRow make_row(std::string table, ProbeKind kind, Channel ch, bool polarized, double pump_power,
                           double nominal_n) {
  ScalingRow r;
  r.table = std::move(table);
  r.kind = kind;
  r.channel = ch;
  r.polarized = polarized;
  r.pump_power = pump_power;
  r.nominal_n = nominal_n;
  return r;
}

struct CampaignFailure {
  CellKey key;
  std::string code;
  std::string message;
};

struct CampaignReport {
  CampaignConfig config;
  std::vector<CellResult> cells;
  std::vector<DecompositionRow> decompositions;
  std::vector<ScalingRow> rows;
  std::vector<CampaignFailure> failures;

  const CellResult* cell(const CellKey& k) const {
    for (const auto& c : cells)
      if (c.key == k) return &c;
    return nullptr;
  }

  const ScalingRow* row(const std::string& table, ProbeKind kind, Channel ch, bool polarized,
                        double pump_power = 0.0) const {
    for (const auto& r : rows)
      if (r.table == table && r.kind == kind && r.channel == ch && r.polarized == polarized &&
          r.pump_power == pump_power)
        return &r;
    return nullptr;
  }
};

inline std::vector<CellKey> enumerate_cells(const CampaignGrid& g) {
  std::vector<CellKey> keys;
  for (auto kind : g.probe_kinds)
    for (bool pol : g.polarizations) {
      const std::vector<double> pumps = pol ? g.pump_powers : std::vector<double>{0.0};
      for (double pu : pumps)
        for (double pr : g.probe_powers) keys.push_back({kind, pol, pu, pr});
    }
  return keys;
}

// Runs `n` indexed jobs on up to `jobs` threads; each job owns its output slot.
inline void run_indexed(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace detail {

inline std::string error_name(const std::exception_ptr& e, std::string& message) {
  try {
    std::rethrow_exception(e);
  } catch (const Error& err) {
    message = err.what();
    return to_string(err.code());
  } catch (const std::exception& err) {
    message = err.what();
    return "InternalError";
  }
}

inline CellResult run_cell(const CampaignConfig& cfg, const CellKey& key) {
  CellResult res;
  res.key = key;
  res.seed = cell_seed(cfg.grid.base_seed, key, 0);
  try {
    auto spectra = simulate_cell_spectra(cfg, key);
    res.excursions = spectra.excursions;
    for (std::size_t c = 0; c < cfg.grid.channels.size(); ++c) {
      ChannelFit cf;
      cf.channel = cfg.grid.channels[c];
      cf.boot = fit_spectrum(cfg, key.kind, spectra.by_channel[c], res.seed);
      cf.spectrum = std::move(spectra.by_channel[c]);
      cf.spectrum.segments.clear();
      res.channels.push_back(std::move(cf));
    }
    res.ok = true;
  } catch (...) {
    res.ok = false;
    res.channels.clear();
    res.error_code = error_name(std::current_exception(), res.error_message);
  }
  return res;
}

inline void finish_row(ScalingRow& r, std::optional<double> nominal_for_exponent) {
  try {
    r.fit = r.nominal_n == 0.0 ? fit_constant(r.points) : fit_power_law(r.points, r.nominal_n);
    if (nominal_for_exponent && r.points.size() >= 4) r.exponent = fit_free_exponent(r.points, *nominal_for_exponent);
  } catch (const Error& e) {
    r.error = std::string(to_string(e.code())) + ": " + e.what();
  }
}

}  // namespace detail

inline void attach_db_ratios(CampaignReport& rep) {
  for (auto& r : rep.rows) {
    if (!r.fit || r.table == "linewidth_vs_probe" || r.table == "psn_vs_pump_linear") continue;
    const ScalingRow* coh = rep.row(r.table, ProbeKind::coherent, r.channel, r.polarized, r.pump_power);
    if (coh == nullptr || !coh->fit) continue;
    try {
      r.db = db_ratio(r.fit->a_n, coh->fit->a_n);
      r.db_se = db_ratio_se(r.fit->a_n, r.fit->se_a_n, coh->fit->a_n, coh->fit->se_a_n);
      if (r.kind == ProbeKind::coherent) r.db_se = 0.0;
    } catch (const Error&) {
      r.db.reset();  // reported as undefined
    }
  }
}

// Builds decompositions and every scaling table from finished cells.
inline void assemble_report(CampaignReport& rep) {
  const auto& cfg = rep.config;
  const auto& g = cfg.grid;
  const bool have_unpol = std::find(g.polarizations.begin(), g.polarizations.end(), false) != g.polarizations.end();
  const bool have_pol = std::find(g.polarizations.begin(), g.polarizations.end(), true) != g.polarizations.end();
  const double top_probe = *std::max_element(g.probe_powers.begin(), g.probe_powers.end());

  for (auto kind : g.probe_kinds) {
    const double xibar2 = cfg.probe.state(kind).xibar2;
    for (auto ch : g.channels) {
      // PSN floor versus probe power, one row per pump power and one unpolarized.
      for (bool pol : g.polarizations) {
        const std::vector<double> pumps = pol ? g.pump_powers : std::vector<double>{0.0};
        for (double pu : pumps) {
          auto r = make_row("psn_vs_probe", kind, ch, pol, pu, 1.0);
          for (double pr : g.probe_powers) {
            const auto* c = rep.cell({kind, pol, pu, pr});
            if (c == nullptr || !c->ok) continue;
            const auto* f = c->channel(ch);
            r.points.push_back({pr, f->boot.base.model.floor(), sigma_floor(*f)});
          }
          detail::finish_row(r, 1.0);
          rep.rows.push_back(std::move(r));
        }
      }
      if (have_pol) {
        auto level = make_row("psn_vs_pump", kind, ch, true, 0.0, 0.0);
        auto slope = make_row("psn_vs_pump_linear", kind, ch, true, 0.0, 1.0);
        for (double pu : g.pump_powers) {
          const auto* c = rep.cell({kind, true, pu, top_probe});
          if (c == nullptr || !c->ok) continue;
          const auto* f = c->channel(ch);
          level.points.push_back({pu, f->boot.base.model.floor(), sigma_floor(*f)});
        }
        slope.points = level.points;
        detail::finish_row(level, {});
        detail::finish_row(slope, {});
        rep.rows.push_back(std::move(level));
        rep.rows.push_back(std::move(slope));
      }
      if (have_unpol) {
        auto tot = make_row("spn_tot_vs_probe", kind, ch, false, 0.0, 2.0);
        auto peak = make_row("spn_peak_vs_probe", kind, ch, false, 0.0, 2.0);
        auto width = make_row("linewidth_vs_probe", kind, ch, false, 0.0, 1.0);
        for (double pr : g.probe_powers) {
          const auto* c = rep.cell({kind, false, 0.0, pr});
          if (c == nullptr || !c->ok) continue;
          const auto* f = c->channel(ch);
          const auto& m = f->boot.base.model;
          tot.points.push_back({pr, m.total(), sigma_total(*f)});
          // The top-power peak is left out: broadening pulls it below P^2.
          if (pr != top_probe) {
            peak.points.push_back({pr, m.S_atomic, sigma_of(f->boot.S_atomic, std::sqrt(f->boot.base.cov[1][1]))});
          }
          width.points.push_back({pr, m.delta_f, sigma_of(f->boot.delta_f, std::sqrt(f->boot.base.cov[2][2]))});
        }
        detail::finish_row(tot, 2.0);
        detail::finish_row(peak, {});
        detail::finish_row(width, {});
        rep.rows.push_back(std::move(tot));
        rep.rows.push_back(std::move(peak));
        rep.rows.push_back(std::move(width));
      }
      if (have_pol && have_unpol) {
        std::vector<PowerPoint> vs_pump;
        for (double pu : g.pump_powers) {
          auto r = make_row("mba_tot_vs_probe", kind, ch, true, pu, 3.0);
          for (double pr : g.probe_powers) {
            const auto* cu = rep.cell({kind, false, 0.0, pr});
            const auto* cp = rep.cell({kind, true, pu, pr});
            if (cu == nullptr || cp == nullptr || !cu->ok || !cp->ok) continue;
            const auto* fu = cu->channel(ch);
            const auto* fp = cp->channel(ch);
            DecompositionRow d{kind, ch, pu, pr, decompose(fu->boot, fp->boot, xibar2)};
            d.sigma_psn = sigma_floor(*fp);
            d.sigma_spn = sigma_total(*fu);
            d.sigma_mba = sigma_of(d.d.mba_replicas, std::hypot(sigma_total(*fp), d.sigma_spn));
            r.points.push_back({pr, d.d.mba_tot, d.sigma_mba});
            if (pr == top_probe) vs_pump.push_back({pu, d.d.mba_tot, d.sigma_mba});
            rep.decompositions.push_back(std::move(d));
          }
          detail::finish_row(r, 3.0);
          rep.rows.push_back(std::move(r));
        }
        auto r = make_row("mba_tot_vs_pump", kind, ch, true, 0.0, 2.0);
        r.points = std::move(vs_pump);
        detail::finish_row(r, 2.0);
        rep.rows.push_back(std::move(r));
      }
    }
  }
  attach_db_ratios(rep);
}

// Simulates every grid cell (concurrently when jobs > 1), then assembles the
// report in grid order. Failed cells are recorded and skipped downstream.
inline CampaignReport run_campaign(const CampaignConfig& cfg, unsigned jobs = 1,
                                   const std::function<void(std::size_t, std::size_t)>& progress = {}) {
  cfg.validate();
  CampaignReport rep;
  rep.config = cfg;
  const auto keys = enumerate_cells(cfg.grid);
  rep.cells.resize(keys.size());
  std::mutex progress_mutex;
  std::size_t done = 0;
  run_indexed(keys.size(), jobs, [&](std::size_t i) {
    rep.cells[i] = detail::run_cell(cfg, keys[i]);
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(++done, keys.size());
    }
  });
  for (const auto& c : rep.cells)
    if (!c.ok) rep.failures.push_back({c.key, c.error_code, c.error_message});
  assemble_report(rep);
  return rep;
}

}  // namespace qnoise
