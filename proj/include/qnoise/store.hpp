#pragma once

// Result persistence: spectra as CSV with a JSON sidecar, fits and
// decompositions as JSON, scaling tables as CSV, plot data as XY text, and a
// manifest of every artifact with its SHA-256. All numbers are written in
// shortest round-trip form, so files depend only on the values themselves.
//
// Report layout:
//   config.json, failures.json, decompositions.json, manifest.json
//   cells/<channel>/<kind>/<pol|unpol>/ppu_<uW>/ppr_<mW>/{spectrum.csv,spectrum.json,fit.json}
//   tables/*.csv
//   plots/<table>/<kind>_<channel>_<pol|unpol>_ppu_<uW>.xy

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnoise/config.hpp"
#include "qnoise/error.hpp"
#include "qnoise/scaling.hpp"

namespace qnoise {

namespace fs = std::filesystem;

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail(Errc::parse, "bad number '" + std::string(s) + "'");
  return v;
}

inline void write_file(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) fail(Errc::io, "short write to '" + path.string() + "'");
}

inline std::string read_file(const fs::path& path) { return read_text_file(path.string()); }

inline Json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) fail(Errc::parse, "malformed JSON in '" + path.string() + "'");
  return j;
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) fail(Errc::internal, "sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectra

inline OrderedJson meta_json(const SpectrumRecord& s) {
  const auto& m = s.meta;
  return {{"channel", to_string(s.channel)},
          {"kind", to_string(m.kind)},
          {"probe_power_mW", m.probe_power},
          {"pump_power_uW", m.pump_power},
          {"polarized", m.polarized},
          {"seed", m.seed},
          {"n_segments", m.n_segments},
          {"dof_shape", m.dof_shape},
          {"bin_correlation", m.bin_correlation},
          {"f_s", m.f_s},
          {"segment_len", m.segment_len}};
}

inline std::string spectrum_csv(const SpectrumRecord& s) {
  std::string out = "freq_hz,psd,masked\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += format_double(s.freqs[i]);
    out += ',';
    out += format_double(s.psd[i]);
    out += s.included(i) ? ",0\n" : ",1\n";
  }
  return out;
}

// Writes <stem>.csv and <stem>.json.
inline void write_spectrum(const fs::path& stem, const SpectrumRecord& s) {
  write_file(fs::path(stem).replace_extension(".csv"), spectrum_csv(s));
  write_file(fs::path(stem).replace_extension(".json"), meta_json(s).dump(2) + "\n");
}

inline SpectrumRecord read_spectrum(const fs::path& csv_path) {
  SpectrumRecord s;
  const std::string text = read_file(csv_path);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line.rfind("freq_hz,psd", 0) != 0) fail(Errc::parse, "'" + csv_path.string() + "' is not a spectrum CSV");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      fail(Errc::parse, csv_path.string() + ": line " + std::to_string(lineno) + ": expected 3 columns");
    }
    s.freqs.push_back(parse_double(std::string_view(line).substr(0, c1)));
    s.psd.push_back(parse_double(std::string_view(line).substr(c1 + 1, c2 - c1 - 1)));
    s.mask.push_back(line.substr(c2 + 1) == "1" ? 1 : 0);
  }
  const fs::path side = fs::path(csv_path).replace_extension(".json");
  if (fs::exists(side)) {
    const Json m = read_json(side);
    try {
      s.channel = channel_from_string(m.at("channel").get<std::string>());
      s.meta.kind = probe_kind_from_string(m.at("kind").get<std::string>());
      s.meta.probe_power = m.at("probe_power_mW").get<double>();
      s.meta.pump_power = m.at("pump_power_uW").get<double>();
      s.meta.polarized = m.at("polarized").get<bool>();
      s.meta.seed = m.at("seed").get<std::uint64_t>();
      s.meta.n_segments = m.at("n_segments").get<std::size_t>();
      s.meta.dof_shape = m.at("dof_shape").get<double>();
      s.meta.bin_correlation = m.at("bin_correlation").get<double>();
      s.meta.f_s = m.at("f_s").get<double>();
      s.meta.segment_len = m.at("segment_len").get<std::size_t>();
    } catch (const Json::exception& e) {
      fail(Errc::parse, side.string() + ": " + e.what());
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Fits

inline OrderedJson to_json(const Percentiles& p) { return {{"p16", p.p16}, {"p50", p.p50}, {"p84", p.p84}}; }

inline OrderedJson to_json(const FitResult& f) {
  OrderedJson cov = OrderedJson::array();
  for (const auto& row : f.cov) cov.push_back({row[0], row[1], row[2]});
  const auto& m = f.model;
  return {{"S_psn", m.S_psn},         {"S_atomic", m.S_atomic}, {"delta_f", m.delta_f},
          {"xi2", m.xi2},             {"floor", m.floor()},     {"total", m.total()},
          {"loglik", f.loglik},       {"n_used", f.n_used},     {"degenerate", f.degenerate},
          {"iterations", f.iterations}, {"cov", cov}};
}

inline FitResult fit_result_from_json(const Json& j) {
  FitResult f;
  f.model.S_psn = j.at("S_psn").get<double>();
  f.model.S_atomic = j.at("S_atomic").get<double>();
  f.model.delta_f = j.at("delta_f").get<double>();
  f.model.xi2 = j.at("xi2").get<double>();
  f.loglik = j.at("loglik").get<double>();
  f.n_used = j.at("n_used").get<std::size_t>();
  f.degenerate = j.at("degenerate").get<bool>();
  f.iterations = j.at("iterations").get<int>();
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) f.cov[r][c] = j.at("cov").at(r).at(c).get<double>();
  return f;
}

inline OrderedJson to_json(const BootstrapResult& b) {
  OrderedJson ci, reps;
  const std::pair<const char*, const std::vector<double>*> params[] = {
      {"S_psn", &b.S_psn}, {"floor", &b.floor}, {"S_atomic", &b.S_atomic}, {"delta_f", &b.delta_f}, {"total", &b.total}};
  for (auto [name, v] : params) {
    if (!v->empty()) ci[name] = to_json(percentiles(*v));
    reps[name] = *v;
  }
  return {{"fit", to_json(b.base)},
          {"n_failed", b.n_failed},
          {"ci68", ci.is_null() ? OrderedJson::object() : ci},
          {"replicas", reps}};
}

inline BootstrapResult bootstrap_from_json(const Json& j) {
  BootstrapResult b;
  b.base = fit_result_from_json(j.at("fit"));
  b.n_failed = j.at("n_failed").get<std::size_t>();
  const auto& r = j.at("replicas");
  b.S_psn = r.at("S_psn").get<std::vector<double>>();
  b.floor = r.at("floor").get<std::vector<double>>();
  b.S_atomic = r.at("S_atomic").get<std::vector<double>>();
  b.delta_f = r.at("delta_f").get<std::vector<double>>();
  b.total = r.at("total").get<std::vector<double>>();
  return b;
}

inline OrderedJson key_json(const CellKey& k, Channel ch) {
  return {{"channel", to_string(ch)},
          {"kind", to_string(k.kind)},
          {"probe_power_mW", k.probe_power},
          {"pump_power_uW", k.pump_power},
          {"polarized", k.polarized}};
}

inline OrderedJson to_json(const NoiseDecomposition& d) {
  OrderedJson ci = OrderedJson::object();
  for (const auto& [k, p] : d.ci68) ci[k] = to_json(p);
  return {{"psn", d.psn},
          {"spn_tot", d.spn_tot},
          {"mba_tot", d.mba_tot},
          {"delta_f_unpol", d.delta_f_unpol},
          {"delta_f_pol", d.delta_f_pol},
          {"negative_estimate", d.negative_estimate},
          {"degenerate", d.degenerate},
          {"ci68", ci}};
}

// ---------------------------------------------------------------------------
// Tables and plots

inline std::string pol_name(bool polarized) { return polarized ? "pol" : "unpol"; }

inline fs::path cell_dir(const CellKey& k, Channel ch) {
  return fs::path("cells") / to_string(ch) / to_string(k.kind) / pol_name(k.polarized) /
         ("ppu_" + format_double(k.pump_power)) / ("ppr_" + format_double(k.probe_power));
}

struct TableFile {
  const char* file;
  std::vector<std::string> tables;
};

inline const std::vector<TableFile>& table_files() {
  static const std::vector<TableFile> t{
      {"table1_psn_vs_probe.csv", {"psn_vs_probe"}},
      {"table2_psn_vs_pump.csv", {"psn_vs_pump", "psn_vs_pump_linear"}},
      {"table3_spn_vs_probe.csv", {"spn_tot_vs_probe", "spn_peak_vs_probe"}},
      {"table4_mba_vs_probe.csv", {"mba_tot_vs_probe"}},
      {"table5_mba_vs_pump.csv", {"mba_tot_vs_pump"}},
      {"linewidth_vs_probe.csv", {"linewidth_vs_probe"}},
  };
  return t;
}

inline std::string opt_number(const std::optional<double>& v, const char* missing = "") {
  return v ? format_double(*v) : std::string(missing);
}

inline std::string scaling_csv(const CampaignReport& rep, const std::vector<std::string>& tables) {
  std::string out =
      "table,kind,channel,polarized,pump_uW,n,a_n,se_a_n,a0,se_a0,chi2,n_points,free_exponent,se_free_exponent,"
      "db_vs_coherent,se_db,error\n";
  for (const auto& r : rep.rows) {
    if (std::find(tables.begin(), tables.end(), r.table) == tables.end()) continue;
    out += r.table + "," + short_name(r.kind) + "," + to_string(r.channel) + "," + pol_name(r.polarized) + "," +
           format_double(r.pump_power) + "," + format_double(r.nominal_n) + ",";
    if (r.fit) {
      const auto& f = *r.fit;
      out += format_double(f.a_n) + "," + format_double(f.se_a_n) + "," + format_double(f.a0) + "," +
             format_double(f.se_a0) + "," + format_double(f.chi2) + "," + std::to_string(f.n_points) + ",";
    } else {
      out += ",,,,," + std::to_string(r.points.size()) + ",";
    }
    if (r.exponent) {
      out += format_double(r.exponent->n) + "," + format_double(r.exponent->se) + ",";
    } else {
      out += ",,";
    }
    out += opt_number(r.db, "---") + "," + opt_number(r.db_se) + ",";
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    out += err + "\n";
  }
  return out;
}

inline std::string decompositions_csv(const CampaignReport& rep) {
  std::string out =
      "kind,channel,pump_uW,probe_mW,psn,sigma_psn,spn_tot,sigma_spn,mba_tot,sigma_mba,delta_f_unpol,delta_f_pol,"
      "negative_estimate,degenerate\n";
  for (const auto& d : rep.decompositions) {
    out += std::string(short_name(d.kind)) + "," + to_string(d.channel) + "," + format_double(d.pump_power) + "," +
           format_double(d.probe_power) + "," + format_double(d.d.psn) + "," + format_double(d.sigma_psn) + "," +
           format_double(d.d.spn_tot) + "," + format_double(d.sigma_spn) + "," + format_double(d.d.mba_tot) + "," +
           format_double(d.sigma_mba) + "," + format_double(d.d.delta_f_unpol) + "," +
           format_double(d.d.delta_f_pol) + "," + (d.d.negative_estimate ? "1" : "0") + "," +
           (d.d.degenerate ? "1" : "0") + "\n";
  }
  return out;
}

// Columns: P, y, sigma, fixed-exponent model at P.
inline std::string plot_xy(const ScalingRow& r) {
  std::string out = "# " + r.table + " " + short_name(r.kind) + " " + to_string(r.channel) + " " +
                    pol_name(r.polarized) + " pump_uW=" + format_double(r.pump_power) + "\n# P y sigma model\n";
  for (const auto& p : r.points) {
    double model = 0.0;
    if (r.fit) model = r.nominal_n == 0.0 ? r.fit->a_n : r.fit->a0 + r.fit->a_n * std::pow(p.P, r.nominal_n);
    out += format_double(p.P) + " " + format_double(p.y) + " " + format_double(p.sigma) + " " +
           format_double(model) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

struct ManifestEntry {
  std::string path;
  std::uintmax_t bytes = 0;
  std::string sha256;
};

inline std::vector<ManifestEntry> scan_artifacts(const fs::path& dir) {
  std::vector<ManifestEntry> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel == "manifest.json") continue;
    const std::string data = read_file(e.path());
    out.push_back({rel, data.size(), sha256_hex(data)});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  return out;
}

// Written last; lists every other file under `dir`.
inline std::string write_manifest(const fs::path& dir) {
  OrderedJson files = OrderedJson::array();
  for (const auto& e : scan_artifacts(dir)) files.push_back({{"path", e.path}, {"bytes", e.bytes}, {"sha256", e.sha256}});
  const std::string text = OrderedJson{{"files", files}}.dump(2) + "\n";
  write_file(dir / "manifest.json", text);
  return text;
}

// Recomputes checksums and reports the first mismatch, if any.
inline std::optional<std::string> verify_manifest(const fs::path& dir) {
  const Json m = read_json(dir / "manifest.json");
  const auto now = scan_artifacts(dir);
  if (now.size() != m.at("files").size()) return "file count differs from manifest";
  for (std::size_t i = 0; i < now.size(); ++i) {
    const auto& f = m.at("files").at(i);
    if (f.at("path").get<std::string>() != now[i].path || f.at("sha256").get<std::string>() != now[i].sha256) {
      return "checksum mismatch for " + now[i].path;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Reports

inline void write_tables(const fs::path& dir, const CampaignReport& rep) {
  for (const auto& t : table_files()) write_file(dir / "tables" / t.file, scaling_csv(rep, t.tables));
  write_file(dir / "tables" / "decompositions.csv", decompositions_csv(rep));
  for (const auto& r : rep.rows) {
    const std::string name = std::string(short_name(r.kind)) + "_" + to_string(r.channel) + "_" +
                             pol_name(r.polarized) + "_ppu_" + format_double(r.pump_power) + ".xy";
    write_file(dir / "plots" / r.table / name, plot_xy(r));
  }
  OrderedJson dec = OrderedJson::array();
  for (const auto& d : rep.decompositions) {
    OrderedJson j = key_json({d.kind, true, d.pump_power, d.probe_power}, d.channel);
    j["decomposition"] = to_json(d.d);
    j["sigma"] = {{"psn", d.sigma_psn}, {"spn_tot", d.sigma_spn}, {"mba_tot", d.sigma_mba}};
    dec.push_back(std::move(j));
  }
  write_file(dir / "decompositions.json", dec.dump(2) + "\n");
}

inline void write_report(const fs::path& dir, const CampaignReport& rep) {
  write_file(dir / "config.json", to_json(rep.config).dump(2) + "\n");
  for (const auto& c : rep.cells) {
    if (!c.ok) continue;
    for (const auto& f : c.channels) {
      const fs::path d = dir / cell_dir(c.key, f.channel);
      write_spectrum(d / "spectrum", f.spectrum);
      OrderedJson j = key_json(c.key, f.channel);
      j["seed"] = c.seed;
      j["excursions"] = c.excursions;
      j["bootstrap"] = to_json(f.boot);
      write_file(d / "fit.json", j.dump(2) + "\n");
    }
  }
  OrderedJson failures = OrderedJson::array();
  for (const auto& f : rep.failures) {
    OrderedJson j = key_json(f.key, Channel::dc);
    j.erase("channel");
    j["error"] = f.code;
    j["message"] = f.message;
    failures.push_back(std::move(j));
  }
  write_file(dir / "failures.json", failures.dump(2) + "\n");
  write_tables(dir, rep);
  write_manifest(dir);
}

// Rebuilds a report from a directory written by write_report and reassembles
// every table from the stored fits.
inline CampaignReport load_report(const fs::path& dir) {
  CampaignReport rep;
  const std::string cfg_text = read_file(dir / "config.json");
  rep.config = parse_config(cfg_text).campaign;
  const Json failures = read_json(dir / "failures.json");
  for (const auto& key : enumerate_cells(rep.config.grid)) {
    CellResult c;
    c.key = key;
    c.seed = cell_seed(rep.config.grid.base_seed, key, 0);
    bool failed = false;
    for (const auto& f : failures) {
      if (f.at("kind").get<std::string>() == to_string(key.kind) && f.at("polarized").get<bool>() == key.polarized &&
          f.at("pump_power_uW").get<double>() == key.pump_power &&
          f.at("probe_power_mW").get<double>() == key.probe_power) {
        c.error_code = f.at("error").get<std::string>();
        c.error_message = f.at("message").get<std::string>();
        failed = true;
      }
    }
    if (!failed) {
      for (auto ch : rep.config.grid.channels) {
        const fs::path d = dir / cell_dir(key, ch);
        ChannelFit cf;
        cf.channel = ch;
        cf.spectrum = read_spectrum(d / "spectrum.csv");
        const Json j = read_json(d / "fit.json");
        try {
          c.excursions = j.at("excursions").get<std::size_t>();
          cf.boot = bootstrap_from_json(j.at("bootstrap"));
        } catch (const Json::exception& e) {
          fail(Errc::parse, (d / "fit.json").string() + ": " + e.what());
        }
        c.channels.push_back(std::move(cf));
      }
      c.ok = true;
    }
    if (!c.ok) rep.failures.push_back({c.key, c.error_code, c.error_message});
    rep.cells.push_back(std::move(c));
  }
  assemble_report(rep);
  return rep;
}

// ---------------------------------------------------------------------------
// Trajectories

inline std::string trajectory_csv(const Trajectory& tr) {
  std::string out = "t,Fx,Fy,Fz,S2_out,S3_in\n";
  for (std::size_t i = 0; i < tr.size(); ++i) {
    out += format_double(tr.time(i)) + "," + format_double(tr.F[i].x) + "," + format_double(tr.F[i].y) + "," +
           format_double(tr.F[i].z) + "," + format_double(tr.s2_noise[i]) + "," + format_double(tr.s3_noise[i]) +
           "\n";
  }
  return out;
}

inline void write_trajectory(const fs::path& stem, const Trajectory& tr, const CellKey& key, std::uint64_t seed) {
  write_file(fs::path(stem).replace_extension(".csv"), trajectory_csv(tr));
  OrderedJson j = key_json(key, Channel::dc);
  j.erase("channel");
  j["seed"] = seed;
  j["t0"] = tr.t0;
  j["f_s"] = tr.f_s;
  j["s1"] = tr.s1;
  j["excursions"] = tr.excursions;
  write_file(fs::path(stem).replace_extension(".json"), j.dump(2) + "\n");
}

struct StoredTrajectory {
  Trajectory traj;
  CellKey key;
  std::uint64_t seed = 0;
};

inline StoredTrajectory read_trajectory(const fs::path& csv_path) {
  StoredTrajectory st;
  const Json j = read_json(fs::path(csv_path).replace_extension(".json"));
  try {
    st.key.kind = probe_kind_from_string(j.at("kind").get<std::string>());
    st.key.polarized = j.at("polarized").get<bool>();
    st.key.pump_power = j.at("pump_power_uW").get<double>();
    st.key.probe_power = j.at("probe_power_mW").get<double>();
    st.seed = j.at("seed").get<std::uint64_t>();
    st.traj.t0 = j.at("t0").get<double>();
    st.traj.f_s = j.at("f_s").get<double>();
    st.traj.s1 = j.at("s1").get<double>();
    st.traj.excursions = j.at("excursions").get<std::size_t>();
  } catch (const Json::exception& e) {
    fail(Errc::parse, csv_path.string() + " sidecar: " + e.what());
  }
  const std::string text = read_file(csv_path);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line.rfind("t,Fx,Fy,Fz,S2_out", 0) != 0) fail(Errc::parse, "'" + csv_path.string() + "' is not a trajectory CSV");
  std::vector<double> cols;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    cols.clear();
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find(',', start)) != std::string::npos; start = pos + 1) {
      cols.push_back(parse_double(std::string_view(line).substr(start, pos - start)));
    }
    cols.push_back(parse_double(std::string_view(line).substr(start)));
    if (cols.size() != 6) fail(Errc::parse, csv_path.string() + ": expected 6 columns");
    st.traj.F.push_back({cols[1], cols[2], cols[3]});
    st.traj.s2_noise.push_back(cols[4]);
    st.traj.s3_noise.push_back(cols[5]);
  }
  return st;
}

}  // namespace qnoise
