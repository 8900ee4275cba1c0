#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "qnoise/acceptance.hpp"
#include "qnoise/config.hpp"
#include "qnoise/store.hpp"

using namespace qnoise;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinRel;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::internal;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qnoise_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("minimal config takes defaults at 6 uT", "[config]") {
  const auto rc = parse_config(R"({"physical": {"B_dc": 6e-6}, "grid": {"probe_powers": [1, 2, 3]}})");
  const auto& c = rc.campaign;
  CHECK_THAT(larmor_frequency(c.physical) / two_pi, WithinRel(42.0e3, 1e-9));
  CHECK_THAT(c.detector.sample_rate, WithinRel(6.0 * 42.0e3, 1e-12));
  CHECK(c.timing.dt * larmor_frequency(c.physical) <= 0.05);
  CHECK(c.dsp.decim == 25);
  CHECK(rc.provenance.at("physical.B_dc") == "file");
  CHECK(rc.provenance.at("physical.Gamma0") == "default");
  CHECK(rc.provenance.at("timing.dt") == "derived");
}

TEST_CASE("config round-trips through its serialized form", "[config][property]") {
  for (const auto& c : {default_config().campaign, acceptance::tiny_config(), acceptance::squeezing_config(),
                        acceptance::broadening_config()}) {
    RunConfig rc;
    rc.campaign = c;
    rc.output_dir = "elsewhere";
    rc.jobs = 3;
    const auto back = parse_config(serialize_config(rc));
    CHECK(back == rc);
    CHECK(serialize_config(back) == serialize_config(rc));
  }
}

TEST_CASE("strict parsing", "[config]") {
  const auto dup = [] { parse_config("{\n  \"physical\": {\n    \"B_dc\": 6e-6,\n    \"B_dc\": 5e-6\n  }\n}"); };
  CHECK(code_of(dup) == Errc::parse);
  CHECK_THAT(message_of(dup), ContainsSubstring("line 4") && ContainsSubstring("B_dc"));

  const auto unknown = [] { parse_config("{\n  \"physical\": {\n    \"B_cd\": 6e-6\n  }\n}"); };
  CHECK(code_of(unknown) == Errc::parse);
  CHECK_THAT(message_of(unknown), ContainsSubstring("line 3") && ContainsSubstring("B_cd"));

  CHECK(code_of([] { parse_config("{\"physical\": {\"B_dc\": 6e-6,"); }) == Errc::parse);
  CHECK(code_of([] { parse_config("{\"physical\": {\"B_dc\": \"six\"}}"); }) == Errc::parse);
  CHECK(code_of([] { parse_config("{\"surprise\": 1}"); }) == Errc::parse);
}

TEST_CASE("violated invariants are validation errors", "[config]") {
  const auto big_dt = [] { parse_config(R"({"timing": {"dt": 1e-6}})"); };
  CHECK(code_of(big_dt) == Errc::validation);
  CHECK_THAT(message_of(big_dt), ContainsSubstring("dt * omega_L"));
  CHECK(code_of([] { parse_config(R"({"physical": {"Gamma0": -1}})"); }) == Errc::validation);
  CHECK(code_of([] { parse_config(R"({"jobs": 0})"); }) == Errc::validation);
}

TEST_CASE("environment overrides any key", "[config]") {
  const EnvList env{{"QNOISE_PHYSICAL__G_S", "0.5"}, {"QNOISE_output_dir", "from_env"}, {"QNOISE_GRID__PUMP_POWERS", "[7]"}};
  const auto rc = parse_config(R"({"physical": {"G_S": 0.1}})", env);
  CHECK(rc.campaign.physical.G_S == 0.5);
  CHECK(rc.output_dir == "from_env");
  CHECK(rc.campaign.grid.pump_powers == std::vector<double>{7.0});
  CHECK(rc.provenance.at("physical.G_S") == "env");
  CHECK(code_of([] { parse_config("{}", {{"QNOISE_PHYSICAL__NOPE", "1"}}); }) == Errc::parse);
}

TEST_CASE("numbers are written in shortest round-trip form", "[store][property]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int i = 0; i < 5000; ++i) {
    const double v = std::ldexp(u(rng), static_cast<int>(u(rng) * 10));
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK_THROWS_AS(parse_double("1.5x"), Error);
}

TEST_CASE("sha256 of a known vector", "[store]") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("spectrum CSV round-trips bit-exactly", "[store]") {
  SpectrumRecord s;
  std::mt19937_64 rng(1);
  std::exponential_distribution<double> e(0.3);
  for (int i = 0; i < 300; ++i) {
    s.freqs.push_back(12.6 * i);
    s.psd.push_back(e(rng));
    s.mask.push_back(i % 17 == 3 ? 1 : 0);
  }
  s.channel = Channel::rf;
  s.meta = {2.5, 10.0, ProbeKind::antisqueezed, true, 1234567890123ull, 49, 92.61, 1.94, 10080.0, 800};
  const fs::path dir = scratch("spectrum");
  write_spectrum(dir / "s", s);
  const auto back = read_spectrum(dir / "s.csv");
  CHECK(back.freqs == s.freqs);
  CHECK(back.psd == s.psd);
  CHECK(back.mask == s.mask);
  CHECK(back.channel == s.channel);
  CHECK(back.meta == s.meta);
  fs::remove_all(dir);
}

TEST_CASE("manifest lists every artifact and detects tampering", "[store]") {
  const fs::path dir = scratch("manifest");
  write_file(dir / "a.txt", "alpha\n");
  write_file(dir / "sub" / "b.txt", "beta\n");
  write_manifest(dir);
  const Json m = read_json(dir / "manifest.json");
  REQUIRE(m.at("files").size() == 2);
  CHECK(m.at("files")[0].at("path") == "a.txt");
  CHECK(m.at("files")[1].at("path") == "sub/b.txt");
  CHECK(m.at("files")[0].at("sha256") == sha256_hex("alpha\n"));
  CHECK_FALSE(verify_manifest(dir));
  write_file(dir / "sub" / "b.txt", "gamma\n");
  CHECK(verify_manifest(dir));
  fs::remove_all(dir);
}

TEST_CASE("report store reloads to identical tables", "[store]") {
  auto cfg = acceptance::tiny_config();
  cfg.grid.channels = {Channel::dc};
  const auto rep = run_campaign(cfg, 2);
  REQUIRE(rep.failures.empty());
  const fs::path a = scratch("report_a"), b = scratch("report_b");
  write_report(a, rep);
  CHECK_FALSE(verify_manifest(a));
  const auto back = load_report(a);
  CHECK(back.config == rep.config);
  REQUIRE(back.rows.size() == rep.rows.size());
  write_tables(b, back);
  for (const auto& t : table_files()) CHECK(read_file(a / "tables" / t.file) == read_file(b / "tables" / t.file));
  CHECK(read_file(a / "decompositions.json") == read_file(b / "decompositions.json"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("trajectory CSV round-trips", "[store]") {
  Trajectory tr;
  tr.t0 = 0.05;
  tr.f_s = 6.0e4;
  tr.s1 = 6.4e5;
  tr.excursions = 2;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int i = 0; i < 200; ++i) {
    tr.F.push_back({g(rng), g(rng), g(rng)});
    tr.s2_noise.push_back(g(rng));
    tr.s3_noise.push_back(g(rng));
  }
  const CellKey key{ProbeKind::squeezed, true, 5.0, 1.5};
  const fs::path dir = scratch("trajectory");
  write_trajectory(dir / "t", tr, key, 42);
  const auto back = read_trajectory(dir / "t.csv");
  CHECK(back.key == key);
  CHECK(back.seed == 42);
  CHECK(back.traj.t0 == tr.t0);
  CHECK(back.traj.s1 == tr.s1);
  CHECK(back.traj.excursions == 2);
  CHECK(back.traj.s2_noise == tr.s2_noise);
  CHECK(back.traj.s3_noise == tr.s3_noise);
  REQUIRE(back.traj.F.size() == tr.F.size());
  for (std::size_t i = 0; i < tr.F.size(); ++i) CHECK(back.traj.F[i].z == tr.F[i].z);
  fs::remove_all(dir);
}
