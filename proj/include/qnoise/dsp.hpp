#pragma once

// Digital lock-in, Welch PSD estimation, and technical-peak masking.
//
// Spectra are single-sided densities. A unit-amplitude tone at the lock-in
// reference demodulates to unit dc; white input of single-sided PSD S0 comes
// out of each demodulated quadrature with PSD 2 S0, because both sidebands
// around the reference fold onto the same baseband frequency.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "qnoise/error.hpp"
#include "qnoise/constants.hpp"
#include "qnoise/fft.hpp"
#include "qnoise/readout.hpp"

namespace qnoise {

struct TimeSeries {
  std::vector<double> values;
  double f_s = 1.0;
  double t0 = 0.0;

  std::size_t size() const { return values.size(); }
  double time(std::size_t i) const { return t0 + static_cast<double>(i) / f_s; }

  void validate() const {
    require(f_s > 0.0 && std::isfinite(f_s), Errc::config, "sample rate must be > 0");
    for (double v : values) require(std::isfinite(v), Errc::config, "time series contains non-finite values");
  }
};

enum class Channel { dc, rf };

inline const char* to_string(Channel c) { return c == Channel::dc ? "dc" : "rf"; }

inline Channel channel_from_string(std::string_view s) {
  if (s == "dc") return Channel::dc;
  if (s == "rf") return Channel::rf;
  fail(Errc::config, "unknown channel '" + std::string(s) + "'");
}

struct DemodChannels {
  TimeSeries dc;  // in-phase quadrature
  TimeSeries rf;  // out-of-phase quadrature
  double f_s_out = 0.0;
};

// Kaiser-windowed sinc low-pass with unit dc gain. `cutoff` is the -6 dB point
// and `transition` the full transition width, both in Hz.
inline std::vector<double> design_lowpass(double f_s, double cutoff, double transition, double atten_db = 80.0) {
  require(cutoff > 0.0 && cutoff < f_s / 2.0, Errc::alias, "low-pass cutoff must lie in (0, f_s/2)");
  require(transition > 0.0, Errc::config, "transition width must be > 0");
  const double beta = atten_db > 50.0    ? 0.1102 * (atten_db - 8.7)
                      : atten_db >= 21.0 ? 0.5842 * std::pow(atten_db - 21.0, 0.4) + 0.07886 * (atten_db - 21.0)
                                         : 0.0;
  const double dw = two_pi * transition / f_s;
  auto taps = static_cast<std::size_t>(std::ceil((atten_db - 7.95) / (2.285 * dw))) + 1;
  if (taps % 2 == 0) ++taps;  // odd length: integer group delay
  const double mid = 0.5 * static_cast<double>(taps - 1);
  const double fc = cutoff / f_s;
  const double i0b = std::cyl_bessel_i(0.0, beta);
  std::vector<double> h(taps);
  double sum = 0.0;
  for (std::size_t i = 0; i < taps; ++i) {
    const double x = static_cast<double>(i) - mid;
    const double sinc = x == 0.0 ? 2.0 * fc : std::sin(two_pi * fc * x) / (std::numbers::pi * x);
    const double r = x / mid;
    const double w = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
    h[i] = sinc * w;
    sum += h[i];
  }
  for (double& v : h) v /= sum;
  return h;
}

struct LockinOptions {
  double transition = 0.0;  // full FIR transition width in Hz; 0 selects the default
  double atten_db = 80.0;
};

// Mixes with 2 cos / -2 sin at f_ref (phase_ref added to the reference phase),
// low-pass filters, and decimates by `decim`. Only outputs with full filter
// support are produced; each is time-stamped at the filter centre.
inline DemodChannels lockin_demodulate(const TimeSeries& v, double f_ref, double phase_ref, double lp_cutoff,
                                       std::size_t decim, const LockinOptions& opt = {}) {
  v.validate();
  require(decim >= 1, Errc::config, "decimation factor must be >= 1");
  require(f_ref >= 0.0 && f_ref < v.f_s / 2.0, Errc::alias, "reference frequency must be below f_s/2");
  const double f_out = v.f_s / static_cast<double>(decim);
  require(lp_cutoff > 0.0 && lp_cutoff < f_out / 2.0, Errc::alias,
          "low-pass cutoff must be below the decimated Nyquist frequency");

  // Default: flat to f_out/4, fully stopped where aliases would land below f_out/4.
  double tw = opt.transition;
  if (tw <= 0.0) tw = std::max(2.0 * (lp_cutoff - f_out / 4.0), 0.2 * lp_cutoff);
  const auto h = design_lowpass(v.f_s, lp_cutoff, tw, opt.atten_db);
  const std::size_t L = h.size();

  const std::size_t n = v.size();
  std::vector<double> in_phase(n), quadrature(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Reduce the phase in cycles before scaling to keep long records accurate.
    double cyc = f_ref * v.t0 + f_ref * static_cast<double>(i) / v.f_s;
    cyc -= std::floor(cyc);
    const double ph = two_pi * cyc + phase_ref;
    in_phase[i] = 2.0 * v.values[i] * std::cos(ph);
    quadrature[i] = -2.0 * v.values[i] * std::sin(ph);
  }

  DemodChannels out;
  out.f_s_out = f_out;
  out.dc.f_s = out.rf.f_s = f_out;
  const double delay = 0.5 * static_cast<double>(L - 1) / v.f_s;
  out.dc.t0 = out.rf.t0 = v.t0 + delay;
  if (n >= L) {
    const std::size_t m_out = (n - L) / decim + 1;
    out.dc.values.resize(m_out);
    out.rf.values.resize(m_out);
    for (std::size_t m = 0; m < m_out; ++m) {
      const std::size_t base = m * decim;
      double a = 0.0, b = 0.0;
      for (std::size_t k = 0; k < L; ++k) {
        a += h[k] * in_phase[base + k];
        b += h[k] * quadrature[base + k];
      }
      out.dc.values[m] = a;
      out.rf.values[m] = b;
    }
  }
  return out;
}

enum class Window { hann, rectangular };
enum class Detrend { none, mean };

inline const char* to_string(Window w) { return w == Window::hann ? "hann" : "rectangular"; }

inline std::vector<double> make_window(Window w, std::size_t n) {
  std::vector<double> out(n, 1.0);
  if (w == Window::hann) {
    // Periodic Hann: exact DFT structure (-1/4, 1/2, -1/4) over the segment.
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = 0.5 - 0.5 * std::cos(two_pi * static_cast<double>(i) / static_cast<double>(n));
    }
  }
  return out;
}

struct SpectrumMeta {
  double probe_power = 0.0;  // mW
  double pump_power = 0.0;   // uW
  ProbeKind kind = ProbeKind::coherent;
  bool polarized = false;
  std::uint64_t seed = 0;
  std::size_t n_segments = 0;
  double dof_shape = 0.0;        // Gamma shape of each averaged bin
  double bin_correlation = 1.0;  // variance inflation from correlation of neighbouring bins
  double f_s = 0.0;              // sample rate of the analysed series
  std::size_t segment_len = 0;

  friend bool operator==(const SpectrumMeta&, const SpectrumMeta&) = default;
};

struct SpectrumRecord {
  std::vector<double> freqs;
  std::vector<double> psd;
  std::vector<std::uint8_t> mask;  // 1 = excluded from fits
  Channel channel = Channel::dc;
  SpectrumMeta meta;
  // Per-segment periodograms, retained only on request (segment bootstrap).
  std::vector<std::vector<double>> segments;

  std::size_t size() const { return freqs.size(); }
  bool included(std::size_t i) const { return mask.empty() || mask[i] == 0; }
  double bin_width() const { return freqs.size() > 1 ? freqs[1] - freqs[0] : 0.0; }

  std::size_t n_included() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size(); ++i) n += included(i) ? 1 : 0;
    return n;
  }
};

// Welch's equivalent Gamma shape of a segment-averaged periodogram bin.
inline double welch_dof_shape(std::span<const double> w, std::size_t hop, std::size_t n_segments) {
  if (n_segments == 0) return 0.0;
  double w2 = 0.0;
  for (double v : w) w2 += v * v;
  double denom = 1.0;
  const auto K = static_cast<double>(n_segments);
  for (std::size_t j = 1; j < n_segments; ++j) {
    const std::size_t shift = j * hop;
    if (shift >= w.size()) break;
    double c = 0.0;
    for (std::size_t i = 0; i + shift < w.size(); ++i) c += w[i] * w[i + shift];
    const double rho = c / w2;
    denom += 2.0 * (1.0 - static_cast<double>(j) / K) * rho * rho;
  }
  return K / denom;
}

// 1 + 2 sum_m |r_m|^2 where r_m is the correlation of DFT bins m apart for
// white input under window w.
inline double window_bin_correlation(std::span<const double> w) {
  const std::size_t n = w.size();
  double w2 = 0.0;
  for (double v : w) w2 += v * v;
  double sum = 0.0;
  const std::size_t mmax = std::min<std::size_t>(n / 2, 64);
  for (std::size_t m = 1; m <= mmax; ++m) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ph = -two_pi * static_cast<double>(m * i % n) / static_cast<double>(n);
      acc += w[i] * w[i] * std::complex<double>(std::cos(ph), std::sin(ph));
    }
    const double r = std::abs(acc) / w2;
    if (r < 1e-12) continue;
    sum += r * r;
  }
  return 1.0 + 2.0 * sum;
}

struct WelchOptions {
  std::size_t segment_len = 1024;
  std::size_t overlap = 512;  // samples shared by consecutive segments
  Window window = Window::hann;
  Detrend detrend = Detrend::none;
  bool keep_segments = false;
};

inline SpectrumRecord welch_psd(const TimeSeries& x, const WelchOptions& opt) {
  x.validate();
  const std::size_t N = opt.segment_len;
  require(N >= 2, Errc::config, "segment_len must be >= 2");
  require(N <= x.size(), Errc::config, "segment_len exceeds series length");
  require(opt.overlap < N, Errc::config, "overlap must be smaller than segment_len");
  const std::size_t hop = N - opt.overlap;

  const auto w = make_window(opt.window, N);
  double w2 = 0.0;
  for (double v : w) w2 += v * v;
  const double scale = 1.0 / (x.f_s * w2);

  RealFft fft(N);
  const std::size_t nb = fft.bins();
  SpectrumRecord rec;
  rec.freqs.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) rec.freqs[k] = static_cast<double>(k) * x.f_s / static_cast<double>(N);
  rec.psd.assign(nb, 0.0);
  rec.mask.assign(nb, 0);

  std::size_t K = 0;
  std::vector<double> seg(nb);
  for (std::size_t start = 0; start + N <= x.size(); start += hop) {
    double mean = 0.0;
    if (opt.detrend == Detrend::mean) {
      for (std::size_t i = 0; i < N; ++i) mean += x.values[start + i];
      mean /= static_cast<double>(N);
    }
    auto buf = fft.input();
    for (std::size_t i = 0; i < N; ++i) buf[i] = (x.values[start + i] - mean) * w[i];
    fft.execute();
    for (std::size_t k = 0; k < nb; ++k) {
      double p = fft.power(k) * scale;
      const bool edge = k == 0 || (N % 2 == 0 && k == N / 2);
      if (!edge) p *= 2.0;
      seg[k] = p;
      rec.psd[k] += p;
    }
    if (opt.keep_segments) rec.segments.push_back(seg);
    ++K;
  }
  for (double& p : rec.psd) p /= static_cast<double>(K);

  rec.meta.n_segments = K;
  rec.meta.dof_shape = welch_dof_shape(w, hop, K);
  rec.meta.bin_correlation = window_bin_correlation(w);
  rec.meta.f_s = x.f_s;
  rec.meta.segment_len = N;
  return rec;
}

inline SpectrumRecord welch_psd(const TimeSeries& x, std::size_t segment_len, std::size_t overlap,
                                Window window = Window::hann) {
  WelchOptions opt;
  opt.segment_len = segment_len;
  opt.overlap = overlap;
  opt.window = window;
  return welch_psd(x, opt);
}

using Band = std::pair<double, double>;

// Marks bins whose frequency falls in any [lo, hi] band as excluded. Values
// are untouched; masking is idempotent and bands combine as a union.
inline SpectrumRecord mask_technical_peaks(SpectrumRecord s, std::span<const Band> bands) {
  if (s.mask.size() != s.size()) s.mask.assign(s.size(), 0);
  for (auto [lo, hi] : bands) {
    if (lo > hi) std::swap(lo, hi);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.freqs[i] >= lo && s.freqs[i] <= hi) s.mask[i] = 1;
    }
  }
  return s;
}

}  // namespace qnoise
