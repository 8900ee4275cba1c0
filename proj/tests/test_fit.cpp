#include <catch_amalgamated.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "qnoise/fit.hpp"

using namespace qnoise;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

NoiseFitModel model(double psn, double atomic, double width, double xi2 = 1.0) {
  NoiseFitModel m;
  m.S_psn = psn;
  m.S_atomic = atomic;
  m.delta_f = width;
  m.xi2 = xi2;
  return m;
}

// Expected spectrum times independent Gamma(K, 1/K) bin noise; K = 0 gives
// the noise-free expectation.
SpectrumRecord spectrum(const NoiseFitModel& truth, std::size_t K, std::uint64_t seed, double df = 2.5,
                        std::size_t n = 1001) {
  SpectrumRecord s;
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> g(K > 0 ? static_cast<double>(K) : 1.0, K > 0 ? 1.0 / static_cast<double>(K) : 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = df * static_cast<double>(i);
    s.freqs.push_back(f);
    s.psd.push_back(truth(f) * (K > 0 ? g(rng) : 1.0));
  }
  s.mask.assign(n, 0);
  s.meta.n_segments = K > 0 ? K : 1000;
  s.meta.dof_shape = static_cast<double>(s.meta.n_segments);
  return s;
}

BootstrapResult boot(const SpectrumRecord& s, std::size_t n, std::uint64_t seed) {
  BootstrapOptions o;
  o.n_boot = n;
  o.seed = seed;
  return bootstrap_fit(s, 1.0, o);
}

}  // namespace

TEST_CASE("lorentzian normalization", "[fit]") {
  CHECK(lorentzian(0.0, 80.0) == 1.0);
  CHECK_THAT(lorentzian(80.0, 80.0), WithinRel(0.5, 1e-15));
  CHECK_THAT(lorentzian(300.0, 100.0), WithinRel(0.1, 1e-15));
}

TEST_CASE("total power closed form", "[fit]") {
  CHECK_THAT(total_power(4.0, 100.0), WithinAbs(628.32, 0.005));
  CHECK(total_power(0.0, 100.0) == 0.0);
  CHECK_THROWS_AS(total_power(-1.0, 1.0), Error);
}

TEST_CASE("total power matches adaptive quadrature of the Lorentzian", "[fit][oracle]") {
  using boost::math::quadrature::gauss_kronrod;
  auto f = [](double x) { return 4.0 * lorentzian(x, 100.0); };
  double integral = gauss_kronrod<double, 31>::integrate(f, 0.0, 1.0, 15, 1e-12);
  for (double lo = 1.0; lo < 1.0e6; lo *= 10.0) integral += gauss_kronrod<double, 31>::integrate(f, lo, 10.0 * lo, 15, 1e-12);
  CHECK_THAT(integral, WithinRel(628.3, 0.001));
  // The closed form runs to infinity; the tail beyond 1 MHz is S df^2 / f.
  CHECK_THAT(integral + 4.0 * 100.0 * 100.0 / 1.0e6, WithinRel(total_power(4.0, 100.0), 1e-9));
}

TEST_CASE("total power is linear in S and in the half-width", "[fit][property]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 1000.0);
  for (int i = 0; i < 500; ++i) {
    const double S = u(rng), w = u(rng), c = u(rng) / 100.0;
    CHECK_THAT(total_power(c * S, w), WithinRel(c * total_power(S, w), 1e-14));
    CHECK_THAT(total_power(S, c * w), WithinRel(c * total_power(S, w), 1e-14));
  }
}

TEST_CASE("refitting the expected spectrum is a fixed point", "[fit][property]") {
  const auto truth = model(4.0, 10.0, 80.0);
  const auto r = fit_noise_spectrum(spectrum(truth, 0, 0), 1.0);
  CHECK_FALSE(r.degenerate);
  CHECK_THAT(r.model.S_psn, WithinRel(4.0, 1e-6));
  CHECK_THAT(r.model.S_atomic, WithinRel(10.0, 1e-6));
  CHECK_THAT(r.model.delta_f, WithinRel(80.0, 1e-6));
}

TEST_CASE("synthetic 4 + 10 L(f; 80 Hz) is recovered within 5%", "[fit][oracle]") {
  // A fine grid keeps the statistical error (about 1%) well inside the tolerance.
  const auto truth = model(4.0, 10.0, 80.0);
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto r = fit_noise_spectrum(spectrum(truth, 200, seed, 0.5, 5001), 1.0);
    CHECK_THAT(r.model.S_psn, WithinRel(4.0, 0.05));
    CHECK_THAT(r.model.S_atomic, WithinRel(10.0, 0.05));
    CHECK_THAT(r.model.delta_f, WithinRel(80.0, 0.05));
  }
}

TEST_CASE("flat spectrum is flagged degenerate at the mean level", "[fit]") {
  const auto s = spectrum(model(7.0, 0.0, 50.0), 100, 4);
  const auto r = fit_noise_spectrum(s, 1.0);
  CHECK(r.degenerate);
  CHECK(r.model.S_atomic == 0.0);
  double mean = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) mean += s.psd[i];
  mean /= static_cast<double>(s.size() - 1);
  CHECK_THAT(r.model.S_psn, WithinRel(mean, 1e-6));
}

TEST_CASE("unpolarized spectrum at 3 mW recovers the 55.11 floor", "[fit]") {
  // Floor 55.11 with an SPN peak of 6.74 P^2.
  const auto r = fit_noise_spectrum(spectrum(model(55.11, 6.74 * 9.0, 150.0), 200, 8), 1.0);
  CHECK_THAT(r.model.S_psn, WithinRel(55.11, 0.01));
}

TEST_CASE("xi2 multiplies only the flat term", "[fit][property]") {
  const auto base = spectrum(model(4.0, 10.0, 80.0), 0, 0);
  const auto r1 = fit_noise_spectrum(base, 1.0);
  const auto r2 = fit_noise_spectrum(base, 0.5);
  CHECK_THAT(r2.model.S_psn, WithinRel(2.0 * r1.model.S_psn, 1e-6));
  CHECK_THAT(r2.model.S_atomic, WithinRel(r1.model.S_atomic, 1e-6));

  const auto r3 = fit_noise_spectrum(spectrum(model(4.0 * 1.7, 10.0, 80.0), 0, 0), 1.0);
  CHECK_THAT(r3.model.S_psn, WithinRel(1.7 * r1.model.S_psn, 1e-6));
  CHECK_THAT(r3.model.S_atomic, WithinRel(r1.model.S_atomic, 1e-6));
  CHECK_THAT(r3.model.delta_f, WithinRel(r1.model.delta_f, 1e-6));
}

TEST_CASE("fit input validation", "[fit]") {
  auto s = spectrum(model(4.0, 10.0, 80.0), 4, 1);
  CHECK_THROWS_AS(fit_noise_spectrum(s, 1.0), Error);  // too few segments
  s = spectrum(model(4.0, 10.0, 80.0), 100, 1);
  s.mask.assign(s.size(), 1);
  CHECK_THROWS_AS(fit_noise_spectrum(s, 1.0), Error);
  CHECK_THROWS_AS(fit_noise_spectrum(s, 0.0), Error);
}

TEST_CASE("single bootstrap replica gives a degenerate interval", "[fit]") {
  const auto b = boot(spectrum(model(4.0, 10.0, 80.0), 100, 5), 1, 9);
  REQUIRE(b.S_atomic.size() == 1);
  const auto ci = b.ci(b.S_atomic);
  CHECK(ci.p16 == ci.p50);
  CHECK(ci.p50 == ci.p84);
}

TEST_CASE("bootstrap is reproducible and thread-count independent", "[fit]") {
  const auto s = spectrum(model(4.0, 10.0, 80.0), 100, 5);
  BootstrapOptions o;
  o.n_boot = 24;
  o.seed = 77;
  const auto a = bootstrap_fit(s, 1.0, o);
  o.threads = 3;
  const auto b = bootstrap_fit(s, 1.0, o);
  CHECK(a.total == b.total);
  CHECK(a.S_psn == b.S_psn);
}

TEST_CASE("doubling the segment count shrinks intervals by sqrt(2)", "[fit][oracle]") {
  const auto truth = model(4.0, 10.0, 80.0);
  const auto a = boot(spectrum(truth, 100, 11), 300, 1);
  const auto b = boot(spectrum(truth, 200, 12), 300, 2);
  const double ratio = b.ci(b.total).sigma() / a.ci(a.total).sigma();
  CHECK_THAT(ratio, WithinRel(1.0 / std::sqrt(2.0), 0.15));
  const double ratio_psn = b.ci(b.S_psn).sigma() / a.ci(a.S_psn).sigma();
  CHECK_THAT(ratio_psn, WithinRel(1.0 / std::sqrt(2.0), 0.15));
}

TEST_CASE("SPN extraction", "[fit]") {
  FitResult u;
  u.model = model(4.0, 6.74, 120.0);
  const auto e = extract_spn(u);
  CHECK(e.spn_peak == 6.74);
  CHECK_THAT(e.spn_tot, WithinRel(6.74 * 120.0 * std::numbers::pi / 2.0, 1e-15));
  u.model.S_atomic = 0.0;
  CHECK(extract_spn(u).spn_tot == 0.0);
}

TEST_CASE("MBA vanishes when polarized and unpolarized atomic parts agree", "[fit]") {
  FitResult u, p;
  u.model = model(4.0, 9.0, 130.0);
  p.model = model(4.2, 9.0, 130.0);
  const auto m = extract_mba(p, extract_spn(u).spn_tot, 1.85);
  CHECK(m.mba_tot == 0.0);
  CHECK_FALSE(m.negative);
  p.model.S_atomic = 5.0;
  CHECK(extract_mba(p, extract_spn(u).spn_tot, 1.85).negative);
}

TEST_CASE("decomposition reconstructs the polarized spectrum", "[fit][property]") {
  const auto u = boot(spectrum(model(4.0, 10.0, 80.0), 200, 21), 30, 1);
  const auto p = boot(spectrum(model(4.0, 25.0, 90.0), 200, 22), 30, 2);
  const auto d = decompose(u, p, 1.0);
  CHECK_THAT(d.psn, WithinRel(p.base.model.floor(), 1e-15));
  CHECK_THAT(d.spn_tot + d.mba_tot, WithinRel(p.base.model.total(), 1e-12));
  CHECK_THAT(d.mba_tot, WithinRel(total_power(25.0, 90.0) - total_power(10.0, 80.0), 0.1));
  CHECK(d.mba_replicas.size() == 30);
  CHECK(d.ci68.count("mba_tot") == 1);
}
