#pragma once

// Maximum-likelihood fit of the composite noise model
//
//   S(f) = xi2 * S_psn + S_atomic * L(f),   L(f) = df^2 / (f^2 + df^2)
//
// to segment-averaged periodograms, the PSN / SPN / MBA decomposition built on
// it, and bootstrap uncertainties.
//
// Each averaged bin is treated as Gamma distributed with the record's
// equivalent shape and mean S(f) (Whittle likelihood). The point estimate does
// not depend on the shape; uncertainties use the shape divided by the window's
// bin-correlation factor, which accounts for neighbouring bins not being
// independent under a tapered window.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "qnoise/dsp.hpp"
#include "qnoise/error.hpp"
#include "qnoise/random.hpp"

namespace qnoise {

inline double lorentzian(double f, double delta_f) {
  const double d2 = delta_f * delta_f;
  return d2 / (f * f + d2);
}

// Integral of S * L(f) over f in [0, inf).
inline double total_power(double S, double delta_f) {
  require(S >= 0.0 && delta_f >= 0.0, Errc::config, "total_power needs non-negative inputs");
  return S * delta_f * std::numbers::pi / 2.0;
}

struct NoiseFitModel {
  double S_psn = 0.0;     // shot-noise level before the xi2 factor
  double S_atomic = 0.0;  // Lorentzian peak: S_SPN + xibar2 * S_MBA
  double delta_f = 1.0;   // half-width (Hz)
  double xi2 = 1.0;       // fixed squeezing factor of the detected component

  double floor() const { return xi2 * S_psn; }
  double operator()(double f) const { return floor() + S_atomic * lorentzian(f, delta_f); }
  double total() const { return total_power(S_atomic, delta_f); }

  friend bool operator==(const NoiseFitModel&, const NoiseFitModel&) = default;
};

using Matrix3 = std::array<std::array<double, 3>, 3>;

struct FitResult {
  NoiseFitModel model;
  double loglik = 0.0;
  std::size_t n_used = 0;
  Matrix3 cov{};  // (S_psn, S_atomic, delta_f)
  bool degenerate = false;  // flat spectrum: delta_f unidentifiable, S_atomic = 0
  int iterations = 0;
};

struct FitOptions {
  double f_min = 0.0;  // bins with f <= f_min are skipped (drops the 0 Hz bin)
  double f_max = std::numeric_limits<double>::infinity();
  int max_iter = 500;
  double tol = 1e-10;
  double degenerate_lr = 5.99;  // likelihood-ratio threshold against a flat spectrum
  std::size_t min_bins = 50;
  std::size_t min_segments = 8;
};

namespace detail {

struct FitData {
  std::vector<double> f;
  std::vector<double> p;
  double shape = 1.0;        // Gamma shape for the likelihood
  double corr = 1.0;         // bin-correlation inflation
  double df = 1.0;
};

inline FitData select_bins(const SpectrumRecord& s, const FitOptions& opt) {
  FitData d;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.included(i)) continue;
    if (s.freqs[i] <= opt.f_min || s.freqs[i] > opt.f_max) continue;
    d.f.push_back(s.freqs[i]);
    d.p.push_back(s.psd[i]);
  }
  d.shape = s.meta.dof_shape > 0.0 ? s.meta.dof_shape : static_cast<double>(s.meta.n_segments);
  d.corr = s.meta.bin_correlation > 0.0 ? s.meta.bin_correlation : 1.0;
  d.df = s.bin_width() > 0.0 ? s.bin_width() : 1.0;
  return d;
}

// Whittle log-likelihood per unit shape, up to a parameter-free constant.
inline double whittle(const FitData& d, const NoiseFitModel& m) {
  double l = 0.0;
  for (std::size_t i = 0; i < d.f.size(); ++i) {
    const double S = m(d.f[i]);
    l -= std::log(S) + d.p[i] / S;
  }
  return l;
}

inline bool invert3(const Matrix3& a, Matrix3& out) {
  const double c00 = a[1][1] * a[2][2] - a[1][2] * a[2][1];
  const double c01 = a[1][2] * a[2][0] - a[1][0] * a[2][2];
  const double c02 = a[1][0] * a[2][1] - a[1][1] * a[2][0];
  const double det = a[0][0] * c00 + a[0][1] * c01 + a[0][2] * c02;
  if (!(std::abs(det) > 0.0) || !std::isfinite(det)) return false;
  const double inv = 1.0 / det;
  out[0][0] = c00 * inv;
  out[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) * inv;
  out[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) * inv;
  out[1][0] = c01 * inv;
  out[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) * inv;
  out[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) * inv;
  out[2][0] = c02 * inv;
  out[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) * inv;
  out[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) * inv;
  return true;
}

// Gradient and Fisher information of the per-unit-shape likelihood.
inline void score(const FitData& d, const NoiseFitModel& m, std::array<double, 3>& g, Matrix3& info) {
  g = {0.0, 0.0, 0.0};
  info = {};
  const double D = m.delta_f;
  for (std::size_t i = 0; i < d.f.size(); ++i) {
    const double f2 = d.f[i] * d.f[i];
    const double den = f2 + D * D;
    const double L = D * D / den;
    const double S = m.floor() + m.S_atomic * L;
    const std::array<double, 3> dS{m.xi2, L, m.S_atomic * 2.0 * D * f2 / (den * den)};
    const double r = (d.p[i] - S) / (S * S);
    const double w = 1.0 / (S * S);
    for (int a = 0; a < 3; ++a) {
      g[a] += r * dS[a];
      for (int b = 0; b < 3; ++b) info[a][b] += w * dS[a] * dS[b];
    }
  }
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

}  // namespace detail

// Derivative-free start: floor from the top frequency quartile, peak excess
// from the lowest bins, half-width where the smoothed excess falls to half.
inline NoiseFitModel initial_guess(const SpectrumRecord& s, double xi2, const FitOptions& opt = {}) {
  const auto d = detail::select_bins(s, opt);
  require(!d.f.empty(), Errc::validation, "no usable bins in spectrum");
  const std::size_t n = d.f.size();
  std::vector<double> top(d.p.begin() + static_cast<std::ptrdiff_t>(3 * n / 4), d.p.end());
  const double floor = detail::median(top);
  auto smooth = [&](std::size_t i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = std::min(n - 1, i + 1);
    double acc = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) acc += d.p[j];
    return acc / static_cast<double>(hi - lo + 1);
  };
  const double peak = smooth(0);
  NoiseFitModel m;
  m.xi2 = xi2;
  m.S_psn = std::max(floor, 1e-300) / xi2;
  m.S_atomic = std::max(peak - floor, 0.0);
  m.delta_f = 3.0 * d.df;
  const double half = 0.5 * m.S_atomic;
  for (std::size_t i = 0; i < n; ++i) {
    if (smooth(i) - floor <= half) {
      m.delta_f = std::max(d.f[i], d.df);
      break;
    }
  }
  return m;
}

namespace detail {

inline FitResult flat_fit(const FitData& d, double xi2, double delta_f) {
  double mean = 0.0;
  for (double p : d.p) mean += p;
  mean /= static_cast<double>(d.p.size());
  FitResult r;
  r.model.xi2 = xi2;
  r.model.S_psn = mean / xi2;
  r.model.S_atomic = 0.0;
  r.model.delta_f = delta_f;
  r.loglik = d.shape * whittle(d, r.model);
  r.n_used = d.f.size();
  r.degenerate = true;
  // Gamma mean estimate: var = mean^2 / (shape * n), inflated by bin correlation.
  r.cov[0][0] = d.corr * mean * mean / (d.shape * static_cast<double>(d.p.size())) / (xi2 * xi2);
  return r;
}

inline FitResult fit_bins(const FitData& d, double xi2, NoiseFitModel m, const FitOptions& opt) {
  m.xi2 = xi2;
  double mean = 0.0;
  for (double p : d.p) mean += p;
  mean /= static_cast<double>(d.p.size());
  const double psn_lo = 1e-9 * mean / xi2;
  const double df_lo = 0.05 * d.df;
  const double df_hi = 10.0 * (d.f.back() + d.df);
  auto project = [&](NoiseFitModel x) {
    x.S_psn = std::max(x.S_psn, psn_lo);
    x.S_atomic = std::max(x.S_atomic, 0.0);
    x.delta_f = std::clamp(x.delta_f, df_lo, df_hi);
    return x;
  };
  m = project(m);
  if (m.S_atomic <= 0.0) m.S_atomic = 1e-3 * mean;

  double ll = whittle(d, m);
  double lambda = 1e-3;
  bool converged = false;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    std::array<double, 3> g;
    Matrix3 info;
    score(d, m, g, info);
    bool accepted = false;
    while (lambda < 1e14) {
      Matrix3 a = info;
      for (int j = 0; j < 3; ++j) a[j][j] = info[j][j] * (1.0 + lambda) + 1e-300;
      Matrix3 ai;
      if (!invert3(a, ai)) {
        lambda *= 10.0;
        continue;
      }
      std::array<double, 3> step{};
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) step[j] += ai[j][k] * g[k];
      NoiseFitModel trial = m;
      trial.S_psn += step[0];
      trial.S_atomic += step[1];
      trial.delta_f += step[2];
      trial = project(trial);
      const double lt = whittle(d, trial);
      if (std::isfinite(lt) && lt >= ll) {
        const bool small = std::abs(trial.S_psn - m.S_psn) <= opt.tol * std::max(m.S_psn, psn_lo) &&
                           std::abs(trial.S_atomic - m.S_atomic) <= opt.tol * std::max(m.S_atomic, mean) &&
                           std::abs(trial.delta_f - m.delta_f) <= opt.tol * m.delta_f;
        const bool flat_ll = lt - ll <= 1e-13 * std::abs(ll);
        m = trial;
        ll = lt;
        lambda = std::max(lambda / 4.0, 1e-12);
        accepted = true;
        if (small || flat_ll) converged = true;
        break;
      }
      lambda *= 4.0;
    }
    if (!accepted) {
      // No ascent direction left at any damping: a stationary point.
      converged = true;
    }
    if (converged) break;
  }
  if (!converged) fail(Errc::non_convergence, "noise fit did not converge in " + std::to_string(opt.max_iter) + " iterations");

  FitResult r;
  r.model = m;
  r.loglik = d.shape * ll;
  r.n_used = d.f.size();
  r.iterations = it + 1;
  std::array<double, 3> g;
  Matrix3 info;
  score(d, m, g, info);
  Matrix3 inv{};
  if (invert3(info, inv)) {
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) r.cov[a][b] = d.corr * inv[a][b] / d.shape;
  }
  return r;
}

}  // namespace detail

// Whittle maximum-likelihood fit with xi2 held fixed. A spectrum whose
// Lorentzian is not significant against a flat level is returned as the flat
// fit with `degenerate` set.
inline FitResult fit_noise_spectrum(const SpectrumRecord& s, double xi2, std::optional<NoiseFitModel> init = {},
                                    const FitOptions& opt = {}) {
  require(xi2 > 0.0, Errc::config, "xi2 must be > 0");
  const auto d = detail::select_bins(s, opt);
  require(d.f.size() >= opt.min_bins, Errc::validation,
          "spectrum has " + std::to_string(d.f.size()) + " usable bins, need " + std::to_string(opt.min_bins));
  require(s.meta.n_segments >= opt.min_segments, Errc::validation,
          "spectrum averages " + std::to_string(s.meta.n_segments) + " segments, need " +
              std::to_string(opt.min_segments));
  for (double p : d.p) require(std::isfinite(p) && p >= 0.0, Errc::validation, "spectrum has invalid PSD values");

  const NoiseFitModel start = init ? *init : initial_guess(s, xi2, opt);
  const FitResult flat = detail::flat_fit(d, xi2, start.delta_f > 0.0 ? start.delta_f : d.df);
  if (!(flat.model.S_psn > 0.0)) return flat;
  FitResult full = detail::fit_bins(d, xi2, start, opt);
  const double lr = 2.0 * (full.loglik - flat.loglik) / d.corr;
  if (full.model.S_atomic <= 0.0 || lr < opt.degenerate_lr) return flat;
  return full;
}

struct Percentiles {
  double p16 = 0.0;
  double p50 = 0.0;
  double p84 = 0.0;
  double sigma() const { return 0.5 * (p84 - p16); }
  friend bool operator==(const Percentiles&, const Percentiles&) = default;
};

inline double quantile(std::vector<double> v, double q) {
  require(!v.empty(), Errc::internal, "quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const std::size_t j = std::min(i + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(i);
  return v[i] + frac * (v[j] - v[i]);
}

inline Percentiles percentiles(const std::vector<double>& v) {
  return {quantile(v, 0.16), quantile(v, 0.50), quantile(v, 0.84)};
}

enum class BootstrapStyle { parametric, segment };

inline const char* to_string(BootstrapStyle b) { return b == BootstrapStyle::parametric ? "parametric" : "segment"; }

struct BootstrapOptions {
  std::size_t n_boot = 200;
  BootstrapStyle style = BootstrapStyle::parametric;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double max_fail_fraction = 0.2;
  FitOptions fit{};
};

struct BootstrapResult {
  FitResult base;
  // One entry per successful replica, in replica-index order.
  std::vector<double> S_psn, floor, S_atomic, delta_f, total;
  std::size_t n_failed = 0;

  Percentiles ci(const std::vector<double>& param) const { return percentiles(param); }
};

// Resamples the spectrum and refits. Parametric resampling draws each bin
// from Gamma(shape / bin_correlation) around the fitted model; segment
// resampling redraws whole segment periodograms with replacement.
inline BootstrapResult bootstrap_fit(const SpectrumRecord& s, double xi2, const BootstrapOptions& opt) {
  require(opt.n_boot >= 1, Errc::config, "n_boot must be >= 1");
  if (opt.style == BootstrapStyle::segment) {
    require(!s.segments.empty(), Errc::config, "segment bootstrap needs retained segments");
  }
  BootstrapResult out;
  out.base = fit_noise_spectrum(s, xi2, {}, opt.fit);
  const NoiseFitModel truth = out.base.model;
  const double shape = (s.meta.dof_shape > 0.0 ? s.meta.dof_shape : static_cast<double>(s.meta.n_segments)) /
                       (s.meta.bin_correlation > 0.0 ? s.meta.bin_correlation : 1.0);

  const std::size_t n = opt.n_boot;
  std::vector<std::optional<FitResult>> reps(n);
  auto run = [&](std::size_t b) {
    Engine e = make_engine(opt.seed, {stream::bootstrap, b});
    SpectrumRecord r = s;
    r.segments.clear();
    if (opt.style == BootstrapStyle::parametric) {
      std::gamma_distribution<double> gamma(shape, 1.0 / shape);
      for (std::size_t i = 0; i < r.size(); ++i) r.psd[i] = truth(r.freqs[i]) * gamma(e);
    } else {
      const std::size_t K = s.segments.size();
      std::uniform_int_distribution<std::size_t> pick(0, K - 1);
      std::fill(r.psd.begin(), r.psd.end(), 0.0);
      for (std::size_t k = 0; k < K; ++k) {
        const auto& seg = s.segments[pick(e)];
        for (std::size_t i = 0; i < r.size(); ++i) r.psd[i] += seg[i];
      }
      for (double& p : r.psd) p /= static_cast<double>(K);
    }
    try {
      reps[b] = fit_noise_spectrum(r, xi2, truth, opt.fit);
    } catch (const Error& err) {
      if (err.code() != Errc::non_convergence) throw;
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    for (std::size_t b = 0; b < n; ++b) run(b);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t b = t; b < n; b += threads) run(b);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  for (const auto& r : reps) {
    if (!r) {
      ++out.n_failed;
      continue;
    }
    out.S_psn.push_back(r->model.S_psn);
    out.floor.push_back(r->model.floor());
    out.S_atomic.push_back(r->model.S_atomic);
    out.delta_f.push_back(r->model.delta_f);
    out.total.push_back(r->model.total());
  }
  if (static_cast<double>(out.n_failed) > opt.max_fail_fraction * static_cast<double>(n)) {
    fail(Errc::non_convergence, std::to_string(out.n_failed) + " of " + std::to_string(n) + " bootstrap refits diverged");
  }
  return out;
}

struct SpnEstimate {
  double spn_peak = 0.0;  // S_SPN (PSD units)
  double spn_tot = 0.0;   // integrated power
  double delta_f_unpol = 0.0;
  bool degenerate = false;
};

// On an unpolarized ensemble the Lorentzian is pure spin-projection noise; the
// flat xi2 * S_psn term has been fitted separately.
inline SpnEstimate extract_spn(const FitResult& unpol) {
  SpnEstimate e;
  e.spn_peak = unpol.model.S_atomic;
  e.spn_tot = unpol.model.total();
  e.delta_f_unpol = unpol.model.delta_f;
  e.degenerate = unpol.degenerate;
  return e;
}

struct MbaEstimate {
  double pol_total = 0.0;
  double mba_tot = 0.0;        // xibar2 * S_MBA integrated, as detected
  double mba_intrinsic = 0.0;  // mba_tot / xibar2
  double delta_f_pol = 0.0;
  bool negative = false;       // subtraction came out below zero (reported, not clamped)
};

// Subtracts total powers, which does not depend on the polarized and
// unpolarized linewidths being equal.
inline MbaEstimate extract_mba(const FitResult& pol, double spn_tot, double xibar2) {
  require(xibar2 > 0.0, Errc::config, "xibar2 must be > 0");
  MbaEstimate e;
  e.pol_total = pol.model.total();
  e.mba_tot = e.pol_total - spn_tot;
  e.mba_intrinsic = e.mba_tot / xibar2;
  e.delta_f_pol = pol.model.delta_f;
  e.negative = e.mba_tot < 0.0;
  return e;
}

struct NoiseDecomposition {
  double psn = 0.0;  // detected flat level xi2 * S_psn of the polarized spectrum
  double spn_tot = 0.0;
  double mba_tot = 0.0;
  double delta_f_unpol = 0.0;
  double delta_f_pol = 0.0;
  std::map<std::string, Percentiles> ci68;
  bool negative_estimate = false;
  bool degenerate = false;
  std::vector<double> mba_replicas;
};

// Pairs bootstrap replicas by index to propagate both fits into the MBA interval.
inline NoiseDecomposition decompose(const BootstrapResult& unpol, const BootstrapResult& pol, double xibar2) {
  const auto spn = extract_spn(unpol.base);
  const auto mba = extract_mba(pol.base, spn.spn_tot, xibar2);
  NoiseDecomposition d;
  d.psn = pol.base.model.floor();
  d.spn_tot = spn.spn_tot;
  d.mba_tot = mba.mba_tot;
  d.delta_f_unpol = spn.delta_f_unpol;
  d.delta_f_pol = mba.delta_f_pol;
  d.negative_estimate = mba.negative;
  d.degenerate = unpol.base.degenerate || pol.base.degenerate;
  const std::size_t n = std::min(unpol.total.size(), pol.total.size());
  d.mba_replicas.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.mba_replicas[i] = pol.total[i] - unpol.total[i];
  if (!pol.floor.empty()) d.ci68["psn"] = percentiles(pol.floor);
  if (!unpol.total.empty()) d.ci68["spn_tot"] = percentiles(unpol.total);
  if (n > 0) d.ci68["mba_tot"] = percentiles(d.mba_replicas);
  if (!unpol.delta_f.empty()) d.ci68["delta_f_unpol"] = percentiles(unpol.delta_f);
  if (!pol.delta_f.empty()) d.ci68["delta_f_pol"] = percentiles(pol.delta_f);
  return d;
}

}  // namespace qnoise
