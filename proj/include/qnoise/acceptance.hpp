#pragma once

// End-to-end acceptance checks. Each check prints one pass/fail line; the
// campaigns behind them are desk-scale configurations built here.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qnoise/config.hpp"
#include "qnoise/dsp.hpp"
#include "qnoise/fit.hpp"
#include "qnoise/scaling.hpp"
#include "qnoise/sde.hpp"
#include "qnoise/store.hpp"

namespace qnoise::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

inline std::string format_line(const CriterionResult& r) {
  char head[160];
  std::snprintf(head, sizeof head, "[%s] %2d %-28s (%.1f s) ", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(),
                r.seconds);
  return head + r.detail;
}

// ---------------------------------------------------------------------------
// Configurations

// Desk-scale field: 6 uT with gamma scaled so that f_L is `larmor_hz`.
inline CampaignConfig desk_config(double larmor_hz) {
  CampaignConfig c;
  c.physical.gamma = two_pi * larmor_hz / 6.0e-6;
  c.physical.B_dc = 6.0e-6;
  c.fit.n_boot = 100;
  c.grid.probe_kinds = {ProbeKind::coherent};
  return c;
}

inline void finish(CampaignConfig& c) {
  resolve_derived(c);
  c.validate();
}

// Polarized and unpolarized coherent sweep for the PSN, MBA and channel checks.
inline CampaignConfig scaling_config(double G_S = 0.35) {
  CampaignConfig c = desk_config(25.0e3);
  c.physical.G_S = G_S;
  c.timing.duration = 8.0;
  finish(c);
  return c;
}

// Unpolarized sweep with strong probe broadening (alpha = Gamma0 / 3 per mW).
inline CampaignConfig broadening_config() {
  CampaignConfig c = desk_config(10.0e3);
  c.physical.alpha = c.physical.Gamma0 / 3.0;
  c.detector.G_F = 4.2e-4;
  c.probe.s1_per_mW = 1.0e6;
  c.timing.duration = 32.0;
  c.grid.polarizations = {false};
  finish(c);
  return c;
}

// Unpolarized sweep across probe states with PSN-dominated spectra.
inline CampaignConfig squeezing_config() {
  CampaignConfig c = desk_config(10.0e3);
  c.physical.alpha = c.physical.Gamma0 / 3.0;
  c.detector.G_F = 1.4e-4;
  c.probe.s1_per_mW = 1.0e6;
  c.timing.duration = 16.0;
  c.grid.probe_kinds = {ProbeKind::coherent, ProbeKind::squeezed, ProbeKind::antisqueezed};
  c.grid.polarizations = {false};
  finish(c);
  return c;
}

// Small grid, short records: used for the determinism check.
inline CampaignConfig tiny_config() {
  CampaignConfig c = desk_config(10.0e3);
  c.timing.duration = 1.0;
  c.fit.n_boot = 20;
  c.grid.probe_powers = {1.0, 2.0, 3.0};
  c.grid.pump_powers = {10.0};
  c.grid.base_seed = 7;
  finish(c);
  return c;
}

// ---------------------------------------------------------------------------
// Synthetic spectra

// Expected spectrum times independent Gamma(shape) noise on each bin.
inline SpectrumRecord synthetic_spectrum(const NoiseFitModel& truth, std::size_t n_segments, std::uint64_t seed,
                                         double df = 2.5, std::size_t n_bins = 1001) {
  SpectrumRecord s;
  Engine e(seed);
  const double shape = static_cast<double>(n_segments);
  std::gamma_distribution<double> g(shape, 1.0 / shape);
  for (std::size_t i = 0; i < n_bins; ++i) {
    const double f = df * static_cast<double>(i);
    s.freqs.push_back(f);
    s.psd.push_back(truth(f) * g(e));
  }
  s.mask.assign(n_bins, 0);
  s.meta.n_segments = n_segments;
  s.meta.dof_shape = shape;
  s.meta.bin_correlation = 1.0;
  return s;
}

inline NoiseFitModel synthetic_truth() {
  NoiseFitModel m;
  m.S_psn = 4.0;
  m.S_atomic = 10.0;
  m.delta_f = 80.0;
  m.xi2 = 1.0;
  return m;
}

// ---------------------------------------------------------------------------
// Suite

struct Options {
  unsigned jobs = 1;
  std::filesystem::path scratch = std::filesystem::temp_directory_path() / "qnoise_acceptance";
  std::function<void(const std::string&)> log;  // progress messages
};

class Suite {
 public:
  explicit Suite(Options opt) : opt_(std::move(opt)) {}

  std::vector<CriterionResult> run_all(const std::function<void(const CriterionResult&)>& on_result = {}) {
    std::vector<CriterionResult> out;
    for (int id = 1; id <= 10; ++id) {
      out.push_back(run(id));
      if (on_result) on_result(out.back());
    }
    return out;
  }

  CriterionResult run(int id) {
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    r.id = id;
    try {
      switch (id) {
        case 1: r = psn_linearity(); break;
        case 2: r = spn_broadening(); break;
        case 3: r = mba_law(); break;
        case 4: r = squeezing_transfer(); break;
        case 5: r = fit_fidelity(); break;
        case 6: r = ou_oracle(); break;
        case 7: r = bootstrap_coverage(); break;
        case 8: r = null_back_action(); break;
        case 9: r = channel_equivalence(); break;
        case 10: r = determinism(); break;
        default: fail(Errc::config, "no acceptance criterion " + std::to_string(id));
      }
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("error: ") + e.what();
    }
    r.id = id;
    if (r.name.empty()) r.name = names(id);
    r.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }

  static std::string names(int id) {
    static const char* n[] = {"",
                              "PSN linearity",
                              "SPN quadratic + broadening",
                              "MBA cubic/quadratic law",
                              "squeezing transfer",
                              "noise-model fit fidelity",
                              "OU oracle",
                              "bootstrap calibration",
                              "null back-action",
                              "channel equivalence",
                              "determinism"};
    return id >= 1 && id <= 10 ? n[id] : "unknown";
  }

 private:
  struct Timed {
    CampaignReport rep;
    double seconds = 0.0;
  };

  const Timed& campaign(std::unique_ptr<Timed>& slot, const CampaignConfig& cfg, const char* label) {
    if (!slot) {
      if (opt_.log) opt_.log(std::string("running ") + label + " campaign");
      const auto t0 = std::chrono::steady_clock::now();
      slot = std::make_unique<Timed>();
      slot->rep = run_campaign(cfg, opt_.jobs);
      slot->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return *slot;
  }

  const Timed& scaling() { return campaign(scaling_, scaling_config(), "scaling"); }
  const Timed& null_run() { return campaign(null_, scaling_config(0.0), "null back-action"); }
  const Timed& broadening() { return campaign(broadening_, broadening_config(), "broadening"); }
  const Timed& squeezing() { return campaign(squeezing_, squeezing_config(), "squeezing"); }

  static std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
  }

  static const ScalingRow& need(const CampaignReport& rep, const std::string& table, ProbeKind k, Channel ch,
                                bool pol, double pump = 0.0) {
    const ScalingRow* r = rep.row(table, k, ch, pol, pump);
    if (r == nullptr) fail(Errc::internal, "no " + table + " row");
    if (!r->error.empty()) fail(Errc::internal, table + " " + to_string(ch) + ": " + r->error);
    return *r;
  }

  static std::string failures_note(const CampaignReport& rep) {
    return rep.failures.empty() ? "" : " cell failures=" + std::to_string(rep.failures.size());
  }

  CriterionResult psn_linearity() {
    const auto& t = scaling();
    const auto& rep = t.rep;
    CriterionResult r;
    r.name = names(1);
    bool ok = rep.failures.empty() && t.seconds <= 120.0;
    std::ostringstream d;
    for (auto ch : rep.config.grid.channels) {
      d << to_string(ch) << ":";
      for (double pu : rep.config.grid.pump_powers) {
        const auto& row = need(rep, "psn_vs_probe", ProbeKind::coherent, ch, true, pu);
        if (!row.exponent) fail(Errc::internal, "no PSN exponent");
        ok = ok && std::abs(row.exponent->n - 1.0) <= 0.10;
        d << fmt(" n(%.0fuW)=%.3f", pu, row.exponent->n);
      }
      const auto& slope = need(rep, "psn_vs_pump_linear", ProbeKind::coherent, ch, true);
      const double z = slope.fit->a_n / slope.fit->se_a_n;
      ok = ok && std::abs(z) < 2.0;
      d << fmt(" pump slope=%.3g+-%.2g (%.1f sigma); ", slope.fit->a_n, slope.fit->se_a_n, z);
    }
    d << fmt("campaign %.0f s", t.seconds) << failures_note(rep);
    r.passed = ok;
    r.detail = d.str();
    return r;
  }

  CriterionResult spn_broadening() {
    const auto& t = broadening();
    const auto& rep = t.rep;
    const auto& cfg = rep.config;
    CriterionResult r;
    const double slope_true = cfg.physical.alpha / two_pi;
    const double top = cfg.grid.probe_powers.back();
    bool ok = rep.failures.empty() && t.seconds <= 180.0;
    std::ostringstream d;
    for (auto ch : cfg.grid.channels) {
      const auto& tot = need(rep, "spn_tot_vs_probe", ProbeKind::coherent, ch, false);
      const auto& width = need(rep, "linewidth_vs_probe", ProbeKind::coherent, ch, false);
      const auto& peak = need(rep, "spn_peak_vs_probe", ProbeKind::coherent, ch, false);
      const auto* cell = rep.cell({ProbeKind::coherent, false, 0.0, top});
      if (cell == nullptr || !cell->ok) fail(Errc::internal, "top-power cell missing");
      const double measured = cell->channel(ch)->boot.base.model.S_atomic;
      const double extrap = peak.fit->a0 + peak.fit->a_n * top * top;
      const bool e_ok = tot.exponent && std::abs(tot.exponent->n - 2.0) <= 0.15;
      const bool w_ok = std::abs(width.fit->a_n - slope_true) <= 0.10 * slope_true;
      const bool p_ok = measured < extrap;
      ok = ok && e_ok && w_ok && p_ok;
      d << to_string(ch) << fmt(": n=%.3f, dDf/dP=%.2f (target %.2f), ", tot.exponent ? tot.exponent->n : NAN,
                                width.fit->a_n, slope_true)
        << fmt("peak@%.1fmW %.4g < quadratic %.4g; ", top, measured, extrap);
    }
    d << fmt("campaign %.0f s", t.seconds) << failures_note(rep);
    r.passed = ok;
    r.detail = d.str();
    return r;
  }

  CriterionResult mba_law() {
    const auto& t = scaling();
    const auto& rep = t.rep;
    const auto& pumps = rep.config.grid.pump_powers;
    CriterionResult r;
    bool ok = rep.failures.empty() && t.seconds <= 180.0;
    std::ostringstream d;
    const double p_fixed = pumps.back();
    for (auto ch : rep.config.grid.channels) {
      const auto& fixed = need(rep, "mba_tot_vs_probe", ProbeKind::coherent, ch, true, p_fixed);
      const auto& lo = need(rep, "mba_tot_vs_probe", ProbeKind::coherent, ch, true, pumps.front());
      const auto* hi = rep.row("mba_tot_vs_probe", ProbeKind::coherent, ch, true, 2.0 * pumps.front());
      if (hi == nullptr || !hi->fit) fail(Errc::internal, "grid lacks a doubled pump power");
      const double ratio = hi->fit->a_n / lo.fit->a_n;
      const bool n_ok = fixed.exponent && std::abs(fixed.exponent->n - 3.0) <= 0.2;
      const bool r_ok = std::abs(ratio - 4.0) <= 1.0;
      ok = ok && n_ok && r_ok;
      d << to_string(ch)
        << fmt(": n(%.0fuW)=%.3f, a3(%.0f)/a3(%.0f)=", p_fixed, fixed.exponent ? fixed.exponent->n : NAN,
               2.0 * pumps.front(), pumps.front())
        << fmt("%.2f; ", ratio);
    }
    d << fmt("campaign %.0f s", t.seconds) << failures_note(rep);
    r.passed = ok;
    r.detail = d.str();
    return r;
  }

  CriterionResult squeezing_transfer() {
    const auto& t = squeezing();
    const auto& rep = t.rep;
    CriterionResult r;
    bool ok = rep.failures.empty();
    std::ostringstream d;
    for (auto ch : rep.config.grid.channels) {
      const auto& sq = need(rep, "psn_vs_probe", ProbeKind::squeezed, ch, false);
      const auto& asq = need(rep, "psn_vs_probe", ProbeKind::antisqueezed, ch, false);
      const auto& spn_sq = need(rep, "spn_tot_vs_probe", ProbeKind::squeezed, ch, false);
      const auto& spn_asq = need(rep, "spn_tot_vs_probe", ProbeKind::antisqueezed, ch, false);
      if (!sq.db || !asq.db || !spn_sq.db || !spn_asq.db) fail(Errc::internal, "dB ratio undefined");
      const bool s_ok = std::abs(*sq.db + 1.2) <= 0.3;
      const bool a_ok = std::abs(*asq.db - 2.7) <= 0.4;
      const bool q_ok = std::abs(*spn_sq.db) < 0.5 && std::abs(*spn_asq.db) < 0.5;
      ok = ok && s_ok && a_ok && q_ok;
      d << to_string(ch) << fmt(": PSN sq %+.2f dB, asq %+.2f dB; SPN sq %+.2f dB, asq %+.2f dB; ", *sq.db, *asq.db,
                                *spn_sq.db, *spn_asq.db);
    }
    d << fmt("campaign %.0f s", t.seconds) << failures_note(rep);
    r.passed = ok;
    r.detail = d.str();
    return r;
  }

  CriterionResult fit_fidelity() {
    CriterionResult r;
    const auto truth = synthetic_truth();
    constexpr int trials = 20;
    double worst = 0.0;
    for (int i = 0; i < trials; ++i) {
      const auto s = synthetic_spectrum(truth, 200, derive_seed(11, {static_cast<std::uint64_t>(i)}), 0.5, 5001);
      const auto f = fit_noise_spectrum(s, 1.0);
      worst = std::max({worst, std::abs(f.model.S_psn / truth.S_psn - 1.0),
                        std::abs(f.model.S_atomic / truth.S_atomic - 1.0),
                        std::abs(f.model.delta_f / truth.delta_f - 1.0)});
    }
    using boost::math::quadrature::gauss_kronrod;
    auto lor = [](double f) { return 4.0 * lorentzian(f, 100.0); };
    double quad = 0.0;
    // Split at decades so each panel is well resolved.
    for (double a = 0.0, b = 100.0; a < 1.0e6; a = b, b = std::min(1.0e6, b * 10.0)) {
      quad += gauss_kronrod<double, 61>::integrate(lor, a, b, 10, 1e-13);
    }
    const double closed = total_power(4.0, 100.0);
    const double rel = std::abs(quad / closed - 1.0);
    r.passed = worst <= 0.05 && rel <= 1e-3;
    r.detail = fmt("worst parameter error over %.0f synthetic spectra %.2f%%; quadrature %.4f vs closed form %.4f", trials,
                   100.0 * worst, quad, closed);
    return r;
  }

  CriterionResult ou_oracle() {
    PhysicalParams p;
    p.B_dc = 0.0;
    p.G_S = 0.0;
    p.alpha = p.Gamma0 / 3.0;
    DriveConfig drive;
    drive.polarized = false;
    drive.pump_power = 0.0;
    drive.probe_power = 1.5;
    ProbeState probe;
    DetectorConfig det;
    det.sample_rate = 20.0e3;
    TrajectoryConfig traj{1.0e-5, 20.0, 2024, 0.05};
    const auto tr = simulate_trajectory(p, drive, traj, probe, det, {true, false});
    const double gamma = total_relaxation(p, drive);
    std::vector<double> est, freqs;
    double var = 0.0;
    WelchOptions wo;
    wo.segment_len = 1024;
    wo.overlap = 512;
    wo.window = Window::hann;
    wo.detrend = Detrend::none;
    std::size_t n_segments = 0;
    for (int c = 0; c < 3; ++c) {
      TimeSeries x;
      x.f_s = tr.f_s;
      x.values.resize(tr.size());
      for (std::size_t i = 0; i < tr.size(); ++i) x.values[i] = c == 0 ? tr.F[i].x : c == 1 ? tr.F[i].y : tr.F[i].z;
      double s2 = 0.0;
      for (double v : x.values) s2 += v * v;
      var += s2 / static_cast<double>(x.size()) / 3.0;
      const auto s = welch_psd(x, wo);
      n_segments += s.meta.n_segments;
      if (est.empty()) {
        est = s.psd;
        freqs = s.freqs;
      } else {
        for (std::size_t i = 0; i < est.size(); ++i) est[i] += s.psd[i];
      }
    }
    double sum2 = 0.0;
    std::size_t n = 0;
    const double f_hi = 5.0 * gamma / two_pi;
    // The 0 Hz bin of a single-sided estimate is not doubled; start at bin 1.
    for (std::size_t i = 1; i < est.size() && freqs[i] <= f_hi; ++i) {
      const double w = two_pi * freqs[i];
      const double oracle = 4.0 * gamma * p.sigma_F2 / (gamma * gamma + w * w);
      const double rel = est[i] / 3.0 / oracle - 1.0;
      sum2 += rel * rel;
      ++n;
    }
    const double rms = std::sqrt(sum2 / static_cast<double>(n));
    const double var_err = std::abs(var / p.sigma_F2 - 1.0);
    CriterionResult r;
    r.passed = rms <= 0.05 && var_err <= 0.03 && n_segments >= 200;
    r.detail = fmt("PSD rms deviation %.2f%% over %.0f bins, variance %.4f (sigma_F2 = 1), %.0f segments", 100.0 * rms,
                   static_cast<double>(n), var, static_cast<double>(n_segments));
    return r;
  }

  CriterionResult bootstrap_coverage() {
    const auto truth = synthetic_truth();
    constexpr int trials = 200;
    int cover[3] = {0, 0, 0};
    BootstrapOptions bo;
    bo.n_boot = 200;
    bo.threads = opt_.jobs;
    for (int i = 0; i < trials; ++i) {
      const auto s = synthetic_spectrum(truth, 200, derive_seed(29, {static_cast<std::uint64_t>(i)}));
      bo.seed = derive_seed(31, {static_cast<std::uint64_t>(i)});
      const auto b = bootstrap_fit(s, 1.0, bo);
      const double t[3] = {truth.S_psn, truth.S_atomic, truth.delta_f};
      const std::vector<double>* v[3] = {&b.S_psn, &b.S_atomic, &b.delta_f};
      for (int k = 0; k < 3; ++k) {
        const auto p = percentiles(*v[k]);
        cover[k] += (p.p16 <= t[k] && t[k] <= p.p84) ? 1 : 0;
      }
    }
    CriterionResult r;
    r.passed = true;
    const char* names3[] = {"S_psn", "S_atomic", "delta_f"};
    std::ostringstream d;
    for (int k = 0; k < 3; ++k) {
      const double c = static_cast<double>(cover[k]) / trials;
      r.passed = r.passed && std::abs(c - 0.68) <= 0.10;
      d << names3[k] << fmt(" %.1f%%  ", 100.0 * c);
    }
    d << "of " << trials << " trials";
    r.detail = d.str();
    return r;
  }

  CriterionResult null_back_action() {
    const auto& t = null_run();
    const auto& rep = t.rep;
    std::size_t inside = 0;
    for (const auto& d : rep.decompositions) inside += std::abs(d.d.mba_tot) < 2.0 * d.sigma_mba ? 1 : 0;
    const std::size_t n = rep.decompositions.size();
    CriterionResult r;
    r.passed = n > 0 && static_cast<double>(inside) >= 0.9 * static_cast<double>(n) && rep.failures.empty();
    r.detail = std::to_string(inside) + "/" + std::to_string(n) + " cells with |MBA| < 2 sigma" + failures_note(rep) +
               fmt("; campaign %.0f s", t.seconds);
    return r;
  }

  CriterionResult channel_equivalence() {
    const auto& rep = scaling().rep;
    CriterionResult r;
    std::size_t compared = 0, agree = 0;
    double worst = 0.0;
    std::string worst_row;
    for (const auto& a : rep.rows) {
      if (a.channel != Channel::dc || !a.exponent) continue;
      const auto* b = rep.row(a.table, a.kind, Channel::rf, a.polarized, a.pump_power);
      if (b == nullptr || !b->exponent) continue;
      ++compared;
      const double z = std::abs(a.exponent->n - b->exponent->n) / std::hypot(a.exponent->se, b->exponent->se);
      agree += z < 2.0 ? 1 : 0;
      if (z > worst) {
        worst = z;
        worst_row = a.table + (a.polarized ? fmt("@%.0fuW", a.pump_power) : std::string("@unpol"));
      }
    }
    r.passed = compared > 0 && agree == compared;
    r.detail = std::to_string(agree) + "/" + std::to_string(compared) + " exponents agree within 2 sigma" +
               fmt("; largest difference %.2f sigma", worst) + " (" + worst_row + ")";
    return r;
  }

  CriterionResult determinism() {
    namespace fs = std::filesystem;
    const auto cfg = tiny_config();
    const fs::path a = opt_.scratch / "run_a", b = opt_.scratch / "run_b";
    fs::remove_all(a);
    fs::remove_all(b);
    write_report(a, run_campaign(cfg, 1));
    write_report(b, run_campaign(cfg, std::max(2u, opt_.jobs)));
    const std::string ma = read_file(a / "manifest.json"), mb = read_file(b / "manifest.json");
    const auto verified = verify_manifest(a);
    CriterionResult r;
    r.passed = ma == mb && !verified && !ma.empty();
    r.detail = std::string(ma == mb ? "manifests byte-identical" : "manifests differ") + " (" +
               std::to_string(Json::parse(ma).at("files").size()) + " files, serial vs threaded)" +
               (verified ? "; " + *verified : "");
    fs::remove_all(a);
    fs::remove_all(b);
    return r;
  }

  Options opt_;
  std::unique_ptr<Timed> scaling_, null_, broadening_, squeezing_;
};

}  // namespace qnoise::acceptance
