// qnoise command-line interface.
//
//   qnoise simulate --config c.json --out dir [--kind K --probe-power P --pump-power P --unpolarized]
//   qnoise demod    --input dir/trajectory.csv --config c.json --out dir
//   qnoise fit      --input spectrum.csv [--unpolarized-input spectrum.csv] --out dir
//   qnoise sweep    --config c.json --seed 7 --out dir --jobs N
//   qnoise report   --input dir [--out dir]
//   qnoise selftest [--jobs N]
//
// Exit status: 0 ok, 1 user error, 2 internal error; failures print a JSON
// object {"error", "message", "exit_code"} on stderr.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "qnoise/acceptance.hpp"
#include "qnoise/config.hpp"
#include "qnoise/scaling.hpp"
#include "qnoise/store.hpp"

namespace fs = std::filesystem;
using namespace qnoise;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned jobs = 0;
  std::string channel;
};

void add_common(CLI::App* app, CommonFlags& f, bool with_seed = true) {
  app->add_option("--config", f.config, "run-config JSON file");
  if (with_seed) app->add_option("--seed", f.seed, "base seed (overrides grid.base_seed)");
  app->add_option("--out", f.out, "output directory (overrides output_dir)");
  app->add_option("--jobs", f.jobs, "worker threads (overrides jobs)");
  app->add_option("--channel", f.channel, "demodulated channel(s)")->check(CLI::IsMember({"dc", "rf", "both"}));
}

RunConfig load(const CommonFlags& f) {
  RunConfig rc = f.config.empty() ? default_config(qnoise_environment()) : load_config(f.config, qnoise_environment());
  if (f.seed) {
    rc.campaign.grid.base_seed = *f.seed;
    rc.provenance["grid.base_seed"] = "cli";
  }
  if (!f.out.empty()) rc.output_dir = f.out;
  if (f.jobs > 0) rc.jobs = f.jobs;
  if (!f.channel.empty()) {
    rc.campaign.grid.channels = f.channel == "both" ? std::vector<Channel>{Channel::dc, Channel::rf}
                                                    : std::vector<Channel>{channel_from_string(f.channel)};
    rc.provenance["grid.channels"] = "cli";
  }
  return rc;
}

void write_run_config(const fs::path& dir, const RunConfig& rc) {
  write_file(dir / "config.json", to_json(rc.campaign).dump(2) + "\n");
}

int error_exit(const std::string& kind, const std::string& message, int code) {
  OrderedJson j{{"error", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << j.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qnoise: quantum-noise scaling simulator and analysis"};
  app.require_subcommand(1);

  CommonFlags sim_f, dem_f, fit_f, sw_f, rep_f, st_f;

  auto* sim = app.add_subcommand("simulate", "integrate one trajectory and write it as CSV");
  add_common(sim, sim_f);
  std::string sim_kind = "coherent";
  double sim_probe = 1.0, sim_pump = 10.0;
  bool sim_unpol = false;
  std::optional<double> sim_duration;
  sim->add_option("--kind", sim_kind, "coherent, squeezed or antisqueezed");
  sim->add_option("--probe-power", sim_probe, "probe power (mW)");
  sim->add_option("--pump-power", sim_pump, "pump power (uW)");
  sim->add_flag("--unpolarized", sim_unpol, "pump off");
  sim->add_option("--duration", sim_duration, "record length after burn-in (s)");

  auto* dem = app.add_subcommand("demod", "lock-in demodulate a trajectory and estimate spectra");
  add_common(dem, dem_f, false);
  std::string dem_input;
  dem->add_option("--input", dem_input, "trajectory CSV written by simulate")->required();

  auto* fit = app.add_subcommand("fit", "fit the noise model to a spectrum, optionally decompose");
  add_common(fit, fit_f);
  std::string fit_input, fit_unpol;
  std::optional<double> fit_xi2;
  fit->add_option("--input", fit_input, "spectrum CSV (JSON sidecar alongside)")->required();
  fit->add_option("--unpolarized-input", fit_unpol, "matching unpolarized spectrum; enables MBA decomposition");
  fit->add_option("--xi2", fit_xi2, "override the fixed detected squeezing factor");

  auto* sw = app.add_subcommand("sweep", "run a full campaign and write the result store");
  add_common(sw, sw_f);

  auto* rep = app.add_subcommand("report", "rebuild scaling tables and plot data from a result store");
  std::string rep_input, rep_out;
  rep->add_option("--input", rep_input, "directory written by sweep")->required();
  rep->add_option("--out", rep_out, "output directory (default: the input directory)");

  auto* st = app.add_subcommand("selftest", "run the acceptance suite");
  add_common(st, st_f, false);
  std::vector<int> st_only;
  st->add_option("--only", st_only, "criterion numbers to run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return error_exit("UsageError", e.what(), 1);
  }

  try {
    if (sim->parsed()) {
      RunConfig rc = load(sim_f);
      auto& c = rc.campaign;
      if (sim_duration) c.timing.duration = *sim_duration;
      const CellKey key{probe_kind_from_string(sim_kind), !sim_unpol, sim_unpol ? 0.0 : sim_pump, sim_probe};
      const std::uint64_t seed = cell_seed(c.grid.base_seed, key, 0);
      const TrajectoryConfig traj{c.timing.dt, c.timing.duration, seed, c.timing.burn_in};
      const auto tr = simulate_trajectory(c.physical, cell_drive(c, key), traj, c.probe.state(key.kind), c.detector);
      const fs::path dir = rc.output_dir;
      write_trajectory(dir / "trajectory", tr, key, seed);
      write_run_config(dir, rc);
      write_manifest(dir);
      std::printf("%zu samples at %g Hz -> %s\n", tr.size(), tr.f_s, (dir / "trajectory.csv").c_str());
    } else if (dem->parsed()) {
      RunConfig rc = load(dem_f);
      const auto st = read_trajectory(dem_input);
      const auto& c = rc.campaign;
      const fs::path dir = rc.output_dir;
      for (auto s : trajectory_spectra(c, st.key, st.traj, st.seed)) {
        s = mask_technical_peaks(std::move(s), c.dsp.mask_bands);
        const fs::path stem = dir / (std::string("spectrum_") + to_string(s.channel));
        write_spectrum(stem, s);
        std::printf("%s: %zu bins, %zu segments\n", (stem.string() + ".csv").c_str(), s.size(), s.meta.n_segments);
      }
      write_run_config(dir, rc);
      write_manifest(dir);
    } else if (fit->parsed()) {
      RunConfig rc = load(fit_f);
      const auto& c = rc.campaign;
      const auto s = read_spectrum(fit_input);
      require(s.n_included() > 0, Errc::validation, "spectrum has no unmasked bins");
      const CellKey key{s.meta.kind, s.meta.polarized, s.meta.pump_power, s.meta.probe_power};
      const std::uint64_t seed = fit_f.seed ? *fit_f.seed : s.meta.seed;
      CampaignConfig cf = c;
      if (fit_xi2) {
        // Express the override through the probe settings the fit reads.
        cf.probe.loss = 1.0;
        if (key.kind == ProbeKind::squeezed) cf.probe.squeezed_xi2 = *fit_xi2;
        if (key.kind == ProbeKind::antisqueezed) cf.probe.squeezed_xibar2 = *fit_xi2;
      }
      const auto boot = fit_spectrum(cf, key.kind, s, seed);
      const fs::path dir = rc.output_dir;
      OrderedJson j = key_json(key, s.channel);
      j["seed"] = seed;
      j["bootstrap"] = to_json(boot);
      write_file(dir / "fit.json", j.dump(2) + "\n");
      const auto& m = boot.base.model;
      std::printf("floor %.6g  S_atomic %.6g  delta_f %.6g Hz  total %.6g%s\n", m.floor(), m.S_atomic, m.delta_f,
                  m.total(), boot.base.degenerate ? "  (flat: no significant Lorentzian)" : "");
      if (!fit_unpol.empty()) {
        const auto u = read_spectrum(fit_unpol);
        require(!u.meta.polarized, Errc::validation, "--unpolarized-input must be an unpolarized spectrum");
        const auto ub = fit_spectrum(cf, u.meta.kind, u, fit_f.seed ? *fit_f.seed : u.meta.seed);
        const auto d = decompose(ub, boot, cf.probe.state(key.kind).xibar2);
        OrderedJson dj = key_json(key, s.channel);
        dj["decomposition"] = to_json(d);
        write_file(dir / "decomposition.json", dj.dump(2) + "\n");
        std::printf("psn %.6g  spn_tot %.6g  mba_tot %.6g%s\n", d.psn, d.spn_tot, d.mba_tot,
                    d.negative_estimate ? "  (negative estimate)" : "");
      }
      write_run_config(dir, rc);
      write_manifest(dir);
    } else if (sw->parsed()) {
      RunConfig rc = load(sw_f);
      try {
        rc.campaign.validate();
      } catch (const Error& e) {
        fail(Errc::validation, std::string("invariant violated: ") + e.what());
      }
      const auto report = run_campaign(rc.campaign, rc.jobs, [](std::size_t done, std::size_t total) {
        std::fprintf(stderr, "\rcells %zu/%zu", done, total);
        if (done == total) std::fprintf(stderr, "\n");
      });
      write_report(rc.output_dir, report);
      std::printf("%zu cells, %zu failed -> %s\n", report.cells.size(), report.failures.size(),
                  rc.output_dir.c_str());
    } else if (rep->parsed()) {
      const fs::path in = rep_input;
      const fs::path out = rep_out.empty() ? in : fs::path(rep_out);
      const auto report = load_report(in);
      if (out != in) write_file(out / "config.json", read_file(in / "config.json"));
      write_tables(out, report);
      write_manifest(out);
      for (const auto& r : report.rows) {
        if (!r.fit) continue;
        std::printf("%-20s %-3s %s %-5s pump %-4g a_n %-12.6g a0 %-12.6g", r.table.c_str(), short_name(r.kind),
                    to_string(r.channel), pol_name(r.polarized).c_str(), r.pump_power, r.fit->a_n, r.fit->a0);
        if (r.exponent) std::printf(" n %.3f", r.exponent->n);
        if (r.db) std::printf(" %+.2f dB", *r.db);
        std::printf("\n");
      }
    } else if (st->parsed()) {
      acceptance::Options opt;
      if (st_f.jobs > 0) opt.jobs = st_f.jobs;
      opt.log = [](const std::string& m) { std::fprintf(stderr, "  .. %s\n", m.c_str()); };
      acceptance::Suite suite(opt);
      int failed = 0;
      auto show = [&](const acceptance::CriterionResult& r) {
        std::printf("%s\n", acceptance::format_line(r).c_str());
        std::fflush(stdout);
        failed += r.passed ? 0 : 1;
      };
      if (st_only.empty()) {
        suite.run_all(show);
      } else {
        for (int id : st_only) show(suite.run(id));
      }
      if (failed > 0) return error_exit("SelfTestFailed", std::to_string(failed) + " criteria failed", 2);
      std::printf("all criteria passed\n");
    }
  } catch (const Error& e) {
    return error_exit(to_string(e.code()), e.what(), is_user_error(e.code()) ? 1 : 2);
  } catch (const std::exception& e) {
    return error_exit("InternalError", e.what(), 2);
  }
  return 0;
}
