#pragma once

// Run-config documents (JSON): strict parsing, derived defaults with
// provenance, environment overrides, and serialization.
//
// Environment overrides use the prefix QNOISE_ with "__" between path
// segments, matched case-insensitively: QNOISE_PHYSICAL__G_S=0 sets
// physical.G_S, QNOISE_OUTPUT_DIR=out sets output_dir. Values are read as JSON
// when they parse as JSON and as plain strings otherwise.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnoise/error.hpp"
#include "qnoise/scaling.hpp"

extern char** environ;

namespace qnoise {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

// Where each leaf value came from: "file", "env", "default" or "derived".
using Provenance = std::map<std::string, std::string>;
using EnvList = std::vector<std::pair<std::string, std::string>>;

struct RunConfig {
  CampaignConfig campaign;
  std::string output_dir = "qnoise_out";
  unsigned jobs = 1;
  Provenance provenance;

  friend bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.campaign == b.campaign && a.output_dir == b.output_dir && a.jobs == b.jobs;
  }
};

inline PumpWaveform waveform_from_string(std::string_view s) {
  if (s == "raised_cosine") return PumpWaveform::raised_cosine;
  if (s == "sinusoidal") return PumpWaveform::sinusoidal;
  if (s == "constant") return PumpWaveform::constant;
  fail(Errc::parse, "unknown pump waveform '" + std::string(s) + "'");
}

inline Window window_from_string(std::string_view s) {
  if (s == "hann") return Window::hann;
  if (s == "rectangular") return Window::rectangular;
  fail(Errc::parse, "unknown window '" + std::string(s) + "'");
}

inline const char* to_string(Detrend d) { return d == Detrend::mean ? "mean" : "none"; }

inline Detrend detrend_from_string(std::string_view s) {
  if (s == "mean") return Detrend::mean;
  if (s == "none") return Detrend::none;
  fail(Errc::parse, "unknown detrend '" + std::string(s) + "'");
}

inline BootstrapStyle bootstrap_style_from_string(std::string_view s) {
  if (s == "parametric") return BootstrapStyle::parametric;
  if (s == "segment") return BootstrapStyle::segment;
  fail(Errc::parse, "unknown bootstrap style '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Derived defaults

// Fields that may be derived from the rest of the configuration.
struct DerivedFields {
  bool sample_rate = true;
  bool omega_pump = true;
  bool dt = true;
  bool burn_in = true;
  bool decim = true;
  bool lp_cutoff = true;
  bool fit_f_min = true;
  bool fit_f_max = true;

  static DerivedFields none() { return {false, false, false, false, false, false, false, false}; }
};

inline constexpr double default_output_rate = 10.0e3;  // Hz after decimation

// Fills the selected fields in dependency order:
//   sample_rate = 6 f_L, omega_pump = omega_L,
//   dt = 1 / (m f_s) with the smallest m meeting dt * omega_L <= 0.05,
//   burn_in = max(0.05 s, 5 / Gamma0), decim so that f_out ~ 10 kHz,
//   lp_cutoff = 0.4 f_out, fit band (1.5 bins, f_out / 4].
inline void resolve_derived(CampaignConfig& c, DerivedFields which = {}, Provenance* prov = nullptr) {
  auto mark = [&](const char* key) {
    if (prov != nullptr) (*prov)[key] = "derived";
  };
  const double omega_L = larmor_frequency(c.physical);
  const double f_L = omega_L / two_pi;
  if (which.sample_rate) {
    c.detector.sample_rate = f_L > 0.0 ? 6.0 * f_L : 60.0e3;
    mark("detector.sample_rate");
  }
  if (which.omega_pump) {
    c.drive.omega_pump = omega_L;
    mark("drive.omega_pump");
  }
  if (which.dt) {
    const double f_s = c.detector.sample_rate;
    const double m = std::max(1.0, std::ceil(omega_L / (0.05 * f_s) - 1e-9));
    c.timing.dt = 1.0 / (m * f_s);
    mark("timing.dt");
  }
  if (which.burn_in) {
    c.timing.burn_in = std::max(0.05, 5.0 / c.physical.Gamma0);
    mark("timing.burn_in");
  }
  if (which.decim) {
    c.dsp.decim = static_cast<std::size_t>(std::max(1.0, std::round(c.detector.sample_rate / default_output_rate)));
    mark("dsp.decim");
  }
  const double f_out = c.f_out();
  if (which.lp_cutoff) {
    c.dsp.lp_cutoff = 0.4 * f_out;
    mark("dsp.lp_cutoff");
  }
  if (which.fit_f_max) {
    c.dsp.fit_f_max = f_out / 4.0;
    mark("dsp.fit_f_max");
  }
  if (which.fit_f_min) {
    // Mean removal under the window depresses the first non-zero bin; skip it.
    c.dsp.fit_f_min = 1.5 * f_out / static_cast<double>(c.dsp.segment_len);
    mark("dsp.fit_f_min");
  }
}

// ---------------------------------------------------------------------------
// Serialization

inline OrderedJson to_json(const CampaignConfig& c) {
  OrderedJson j;
  const auto& p = c.physical;
  j["physical"] = {{"gamma", p.gamma},       {"B_dc", p.B_dc},
                   {"field_axis", {p.field_axis.x, p.field_axis.y, p.field_axis.z}},
                   {"B_rf_amp", p.B_rf_amp}, {"omega_rf", p.omega_rf},
                   {"Gamma0", p.Gamma0},     {"alpha", p.alpha},
                   {"G_S", p.G_S},           {"F_max", p.F_max},
                   {"sigma_F2", p.sigma_F2}};
  const auto& d = c.drive;
  j["drive"] = {{"omega_pump", d.omega_pump},   {"pump_rate_peak", d.pump_rate_peak},
                {"waveform", to_string(d.waveform)}, {"duty_cycle", d.duty_cycle},
                {"pump_phase", d.pump_phase},   {"probe_range", {d.probe_range.lo, d.probe_range.hi}}};
  j["detector"] = {{"gain", c.detector.gain}, {"G_F", c.detector.G_F}, {"sample_rate", c.detector.sample_rate}};
  const auto& pr = c.probe;
  j["probe"] = {{"squeezed_xi2", pr.squeezed_xi2}, {"squeezed_xibar2", pr.squeezed_xibar2},
                {"loss", pr.loss},                 {"kappa", pr.kappa},
                {"s1_per_mW", pr.s1_per_mW}};
  j["timing"] = {{"dt", c.timing.dt}, {"duration", c.timing.duration}, {"burn_in", c.timing.burn_in}};
  OrderedJson bands = OrderedJson::array();
  for (auto [lo, hi] : c.dsp.mask_bands) bands.push_back({lo, hi});
  j["dsp"] = {{"lp_cutoff", c.dsp.lp_cutoff},   {"decim", c.dsp.decim},
              {"segment_len", c.dsp.segment_len}, {"overlap", c.dsp.overlap},
              {"window", to_string(c.dsp.window)}, {"detrend", to_string(c.dsp.detrend)},
              {"mask_bands", bands},             {"fit_f_min", c.dsp.fit_f_min},
              {"fit_f_max", c.dsp.fit_f_max}};
  j["fit"] = {{"n_boot", c.fit.n_boot},   {"bootstrap", to_string(c.fit.style)}, {"max_iter", c.fit.max_iter},
              {"tol", c.fit.tol},         {"degenerate_lr", c.fit.degenerate_lr}};
  const auto& g = c.grid;
  OrderedJson kinds = OrderedJson::array(), chans = OrderedJson::array(), pols = OrderedJson::array();
  for (auto k : g.probe_kinds) kinds.push_back(to_string(k));
  for (auto ch : g.channels) chans.push_back(to_string(ch));
  for (bool b : g.polarizations) pols.push_back(b);
  j["grid"] = {{"probe_powers", g.probe_powers}, {"pump_powers", g.pump_powers}, {"probe_kinds", kinds},
               {"channels", chans},              {"polarizations", pols},      {"replicates", g.replicates},
               {"base_seed", g.base_seed}};
  return j;
}

inline OrderedJson to_json(const RunConfig& rc) {
  OrderedJson j = to_json(rc.campaign);
  j["output_dir"] = rc.output_dir;
  j["jobs"] = rc.jobs;
  return j;
}

inline std::string serialize_config(const RunConfig& rc) { return to_json(rc).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

struct Schema {
  std::string section;  // empty for top-level scalars
  std::vector<std::string> keys;
};

inline const std::vector<Schema>& config_schema() {
  static const std::vector<Schema> s{
      {"physical", {"gamma", "B_dc", "field_axis", "B_rf_amp", "omega_rf", "Gamma0", "alpha", "G_S", "F_max", "sigma_F2"}},
      {"drive", {"omega_pump", "pump_rate_peak", "waveform", "duty_cycle", "pump_phase", "probe_range"}},
      {"detector", {"gain", "G_F", "sample_rate"}},
      {"probe", {"squeezed_xi2", "squeezed_xibar2", "loss", "kappa", "s1_per_mW"}},
      {"timing", {"dt", "duration", "burn_in"}},
      {"dsp", {"lp_cutoff", "decim", "segment_len", "overlap", "window", "detrend", "mask_bands", "fit_f_min",
               "fit_f_max"}},
      {"fit", {"n_boot", "bootstrap", "max_iter", "tol", "degenerate_lr"}},
      {"grid", {"probe_powers", "pump_powers", "probe_kinds", "channels", "polarizations", "replicates", "base_seed"}},
      {"", {"output_dir", "jobs"}},
  };
  return s;
}

inline bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

inline std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Line of the n-th (1-based) occurrence of `"key"` used as an object key.
inline std::size_t key_line(std::string_view text, const std::string& key, std::size_t occurrence = 1) {
  const std::string quoted = "\"" + key + "\"";
  std::size_t pos = 0, seen = 0;
  while ((pos = text.find(quoted, pos)) != std::string_view::npos) {
    std::size_t q = pos + quoted.size();
    while (q < text.size() && std::isspace(static_cast<unsigned char>(text[q]))) ++q;
    if (q < text.size() && text[q] == ':' && ++seen == occurrence) return line_of_offset(text, pos);
    pos += quoted.size();
  }
  return 0;
}

inline std::string at_line(std::size_t line) { return line > 0 ? "line " + std::to_string(line) + ": " : ""; }

// Parses JSON, rejecting duplicate keys within an object.
inline Json parse_strict_json(std::string_view text) {
  std::vector<std::set<std::string>> open;
  std::map<std::string, std::size_t> occurrences;
  auto cb = [&](int, Json::parse_event_t ev, Json& parsed) {
    if (ev == Json::parse_event_t::object_start) {
      open.emplace_back();
    } else if (ev == Json::parse_event_t::object_end) {
      open.pop_back();
    } else if (ev == Json::parse_event_t::key) {
      const auto k = parsed.get<std::string>();
      const std::size_t n = ++occurrences[k];
      if (!open.back().insert(k).second) {
        fail(Errc::parse, at_line(key_line(text, k, n)) + "duplicate key '" + k + "'");
      }
    }
    return true;
  };
  try {
    return Json::parse(text.begin(), text.end(), cb);
  } catch (const Json::parse_error& e) {
    fail(Errc::parse, at_line(line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0)) + "malformed document: " + e.what());
  }
}

class Reader {
 public:
  Reader(const Json& obj, std::string section, std::string_view text, const std::set<std::string>& env_keys,
         Provenance& prov)
      : obj_(obj), section_(std::move(section)), text_(text), env_keys_(env_keys), prov_(prov) {}

  std::string path(const std::string& key) const { return section_.empty() ? key : section_ + "." + key; }

  // Reads `key` into `out` when present; returns whether it was present.
  template <class T, class Convert>
  bool read(const std::string& key, T& out, Convert convert) {
    seen_.insert(key);
    const std::string p = path(key);
    if (!obj_.contains(key)) {
      prov_.emplace(p, "default");
      return false;
    }
    try {
      out = convert(obj_.at(key));
    } catch (const Json::exception& e) {
      fail(Errc::parse, at_line(key_line(text_, key)) + "key '" + p + "': " + e.what());
    } catch (const Error& e) {
      fail(e.code(), at_line(key_line(text_, key)) + "key '" + p + "': " + e.what());
    }
    prov_[p] = env_keys_.count(p) ? "env" : "file";
    return true;
  }

  bool number(const std::string& key, double& out) {
    return read(key, out, [](const Json& v) {
      if (!v.is_number()) fail(Errc::parse, "expected a number");
      return v.get<double>();
    });
  }

  template <class U>
  bool unsigned_int(const std::string& key, U& out) {
    return read(key, out, [](const Json& v) {
      if (!v.is_number_unsigned()) fail(Errc::parse, "expected a non-negative integer");
      return v.get<U>();
    });
  }

  bool integer(const std::string& key, int& out) {
    return read(key, out, [](const Json& v) {
      if (!v.is_number_integer()) fail(Errc::parse, "expected an integer");
      return v.get<int>();
    });
  }

  bool string(const std::string& key, std::string& out) {
    return read(key, out, [](const Json& v) {
      if (!v.is_string()) fail(Errc::parse, "expected a string");
      return v.get<std::string>();
    });
  }

  static std::vector<double> numbers(const Json& v, std::size_t exact = 0) {
    if (!v.is_array()) fail(Errc::parse, "expected an array of numbers");
    if (exact > 0 && v.size() != exact) fail(Errc::parse, "expected " + std::to_string(exact) + " numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) fail(Errc::parse, "expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  template <class T, class FromString>
  static std::vector<T> strings(const Json& v, FromString from) {
    if (!v.is_array()) fail(Errc::parse, "expected an array of strings");
    std::vector<T> out;
    for (const auto& x : v) {
      if (!x.is_string()) fail(Errc::parse, "expected an array of strings");
      out.push_back(from(x.get<std::string>()));
    }
    return out;
  }

  void known(const std::string& key) { seen_.insert(key); }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) fail(Errc::parse, at_line(key_line(text_, k)) + "unknown key '" + path(k) + "'");
    }
  }

 private:
  const Json& obj_;
  std::string section_;
  std::string_view text_;
  const std::set<std::string>& env_keys_;
  Provenance& prov_;
  std::set<std::string> seen_;
};

inline const Json& section_of(const Json& doc, const std::string& name, std::string_view text) {
  static const Json empty = Json::object();
  if (!doc.contains(name)) return empty;
  const Json& s = doc.at(name);
  if (!s.is_object()) fail(Errc::parse, at_line(key_line(text, name)) + "section '" + name + "' must be an object");
  return s;
}

inline ProbeKind parse_probe_kind(const std::string& s) {
  try {
    return probe_kind_from_string(s);
  } catch (const Error& e) {
    fail(Errc::parse, e.what());
  }
}

inline Channel parse_channel(const std::string& s) {
  try {
    return channel_from_string(s);
  } catch (const Error& e) {
    fail(Errc::parse, e.what());
  }
}

// Applies QNOISE_* overrides to the document; returns the dotted paths touched.
inline std::set<std::string> apply_env_overrides(Json& doc, const EnvList& env) {
  std::set<std::string> touched;
  constexpr std::string_view prefix = "QNOISE_";
  for (const auto& [name, value] : env) {
    if (name.rfind(prefix, 0) != 0) continue;
    std::vector<std::string> segs;
    std::string rest = name.substr(prefix.size());
    for (std::size_t pos; (pos = rest.find("__")) != std::string::npos; rest = rest.substr(pos + 2)) {
      segs.push_back(rest.substr(0, pos));
    }
    segs.push_back(rest);
    std::string section, key;
    bool found = false;
    for (const auto& sch : config_schema()) {
      if (sch.section.empty() ? segs.size() != 1 : (segs.size() != 2 || !iequals(segs[0], sch.section))) continue;
      for (const auto& k : sch.keys) {
        if (iequals(segs.back(), k)) {
          section = sch.section;
          key = k;
          found = true;
        }
      }
    }
    if (!found) fail(Errc::parse, "environment variable " + name + " does not name a config key");
    Json v = Json::parse(value, nullptr, false);
    if (v.is_discarded()) v = value;
    if (section.empty()) {
      doc[key] = v;
      touched.insert(key);
    } else {
      if (!doc.contains(section)) doc[section] = Json::object();
      if (!doc[section].is_object()) fail(Errc::parse, "section '" + section + "' must be an object");
      doc[section][key] = v;
      touched.insert(section + "." + key);
    }
  }
  return touched;
}

}  // namespace detail

// Environment variables with the QNOISE_ prefix, sorted by name.
inline EnvList qnoise_environment() {
  EnvList out;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    std::string_view kv(*e);
    if (kv.rfind("QNOISE_", 0) != 0) continue;
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    out.emplace_back(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Parses and fully validates a run-config document. Missing keys take library
// defaults or derived values; the provenance map records which.
inline RunConfig parse_config(std::string_view text, const EnvList& env = {}) {
  using detail::Reader;
  Json doc = detail::parse_strict_json(text);
  if (!doc.is_object()) fail(Errc::parse, "config document must be a JSON object");
  const auto env_keys = detail::apply_env_overrides(doc, env);

  RunConfig rc;
  CampaignConfig& c = rc.campaign;
  Provenance& prov = rc.provenance;
  DerivedFields derive;
  auto section = [&](const std::string& name) {
    return Reader(detail::section_of(doc, name, text), name, text, env_keys, prov);
  };

  {
    auto r = section("physical");
    auto& p = c.physical;
    r.number("gamma", p.gamma);
    r.number("B_dc", p.B_dc);
    r.read("field_axis", p.field_axis, [](const Json& v) {
      const auto a = Reader::numbers(v, 3);
      return Vec3{a[0], a[1], a[2]};
    });
    r.number("B_rf_amp", p.B_rf_amp);
    r.number("omega_rf", p.omega_rf);
    r.number("Gamma0", p.Gamma0);
    r.number("alpha", p.alpha);
    r.number("G_S", p.G_S);
    r.number("F_max", p.F_max);
    r.number("sigma_F2", p.sigma_F2);
    r.finish();
  }
  {
    auto r = section("drive");
    auto& d = c.drive;
    derive.omega_pump = !r.number("omega_pump", d.omega_pump);
    r.number("pump_rate_peak", d.pump_rate_peak);
    r.read("waveform", d.waveform, [](const Json& v) {
      if (!v.is_string()) fail(Errc::parse, "expected a string");
      return waveform_from_string(v.get<std::string>());
    });
    r.number("duty_cycle", d.duty_cycle);
    r.number("pump_phase", d.pump_phase);
    r.read("probe_range", d.probe_range, [](const Json& v) {
      const auto a = Reader::numbers(v, 2);
      return PowerRange{a[0], a[1]};
    });
    r.finish();
  }
  {
    auto r = section("detector");
    r.number("gain", c.detector.gain);
    r.number("G_F", c.detector.G_F);
    derive.sample_rate = !r.number("sample_rate", c.detector.sample_rate);
    r.finish();
  }
  {
    auto r = section("probe");
    r.number("squeezed_xi2", c.probe.squeezed_xi2);
    r.number("squeezed_xibar2", c.probe.squeezed_xibar2);
    r.number("loss", c.probe.loss);
    r.number("kappa", c.probe.kappa);
    r.number("s1_per_mW", c.probe.s1_per_mW);
    r.finish();
  }
  {
    auto r = section("timing");
    derive.dt = !r.number("dt", c.timing.dt);
    r.number("duration", c.timing.duration);
    derive.burn_in = !r.number("burn_in", c.timing.burn_in);
    r.finish();
  }
  {
    auto r = section("dsp");
    auto& d = c.dsp;
    derive.lp_cutoff = !r.number("lp_cutoff", d.lp_cutoff);
    derive.decim = !r.unsigned_int("decim", d.decim);
    r.unsigned_int("segment_len", d.segment_len);
    r.unsigned_int("overlap", d.overlap);
    r.read("window", d.window, [](const Json& v) {
      if (!v.is_string()) fail(Errc::parse, "expected a string");
      return window_from_string(v.get<std::string>());
    });
    r.read("detrend", d.detrend, [](const Json& v) {
      if (!v.is_string()) fail(Errc::parse, "expected a string");
      return detrend_from_string(v.get<std::string>());
    });
    r.read("mask_bands", d.mask_bands, [](const Json& v) {
      if (!v.is_array()) fail(Errc::parse, "expected an array of [lo, hi] pairs");
      std::vector<Band> out;
      for (const auto& b : v) {
        const auto a = Reader::numbers(b, 2);
        out.emplace_back(a[0], a[1]);
      }
      return out;
    });
    derive.fit_f_min = !r.number("fit_f_min", d.fit_f_min);
    derive.fit_f_max = !r.number("fit_f_max", d.fit_f_max);
    r.finish();
  }
  {
    auto r = section("fit");
    r.unsigned_int("n_boot", c.fit.n_boot);
    r.read("bootstrap", c.fit.style, [](const Json& v) {
      if (!v.is_string()) fail(Errc::parse, "expected a string");
      return bootstrap_style_from_string(v.get<std::string>());
    });
    r.integer("max_iter", c.fit.max_iter);
    r.number("tol", c.fit.tol);
    r.number("degenerate_lr", c.fit.degenerate_lr);
    r.finish();
  }
  {
    auto r = section("grid");
    auto& g = c.grid;
    r.read("probe_powers", g.probe_powers, [](const Json& v) { return Reader::numbers(v); });
    r.read("pump_powers", g.pump_powers, [](const Json& v) { return Reader::numbers(v); });
    r.read("probe_kinds", g.probe_kinds,
           [](const Json& v) { return Reader::strings<ProbeKind>(v, detail::parse_probe_kind); });
    r.read("channels", g.channels, [](const Json& v) { return Reader::strings<Channel>(v, detail::parse_channel); });
    r.read("polarizations", g.polarizations, [](const Json& v) {
      if (!v.is_array()) fail(Errc::parse, "expected an array of booleans");
      std::vector<bool> out;
      for (const auto& x : v) {
        if (!x.is_boolean()) fail(Errc::parse, "expected an array of booleans");
        out.push_back(x.get<bool>());
      }
      return out;
    });
    r.unsigned_int("replicates", g.replicates);
    r.unsigned_int("base_seed", g.base_seed);
    r.finish();
  }
  {
    Reader r(doc, "", text, env_keys, prov);
    for (const auto& sch : detail::config_schema())
      if (!sch.section.empty()) r.known(sch.section);
    r.string("output_dir", rc.output_dir);
    r.unsigned_int("jobs", rc.jobs);
    r.finish();
  }

  resolve_derived(c, derive, &prov);

  try {
    c.validate();
    require(rc.jobs >= 1, Errc::config, "jobs must be >= 1");
    require(!rc.output_dir.empty(), Errc::config, "output_dir must not be empty");
  } catch (const Error& e) {
    fail(Errc::validation, std::string("invariant violated: ") + e.what());
  }
  return rc;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline RunConfig load_config(const std::string& path, const EnvList& env = {}) {
  return parse_config(read_text_file(path), env);
}

inline RunConfig default_config(const EnvList& env = {}) { return parse_config("{}", env); }

}  // namespace qnoise
