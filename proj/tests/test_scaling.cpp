#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "qnoise/config.hpp"
#include "qnoise/scaling.hpp"

using namespace qnoise;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<PowerPoint> sample(const std::vector<double>& P, auto f) {
  std::vector<PowerPoint> out;
  for (double p : P) out.push_back({p, f(p), 1.0});
  return out;
}

const std::vector<double> probe_grid{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};

}  // namespace

TEST_CASE("fixed-exponent power-law fits", "[scaling]") {
  auto f = fit_power_law(sample(probe_grid, [](double P) { return 19.59 * P - 0.48; }), 1.0);
  CHECK_THAT(f.a_n, WithinRel(19.59, 1e-12));
  CHECK_THAT(f.a0, WithinAbs(-0.48, 1e-12));
  CHECK_THAT(f.chi2, WithinAbs(0.0, 1e-18));

  f = fit_power_law(sample(probe_grid, [](double) { return 5.5; }), 1.0);
  CHECK_THAT(f.a_n, WithinAbs(0.0, 1e-13));
  CHECK_THAT(f.a0, WithinRel(5.5, 1e-13));

  f = fit_power_law(sample({1, 2, 3}, [](double P) { return 2 * P * P * P + 1; }), 3.0);
  CHECK_THAT(f.a_n, WithinRel(2.0, 1e-12));
  CHECK_THAT(f.a0, WithinRel(1.0, 1e-12));
}

TEST_CASE("power-law fit standard errors follow weighted least squares", "[scaling]") {
  // Two-parameter line through equally weighted points: se(slope) = sigma / sqrt(Sxx).
  std::vector<PowerPoint> pts;
  for (double P : probe_grid) pts.push_back({P, 3.0 * P, 0.2});
  const auto f = fit_power_law(pts, 1.0);
  double mean = 0.0, sxx = 0.0;
  for (double P : probe_grid) mean += P / 6.0;
  for (double P : probe_grid) sxx += (P - mean) * (P - mean);
  CHECK_THAT(f.se_a_n, WithinRel(0.2 / std::sqrt(sxx), 1e-12));
}

TEST_CASE("power-law fit rejects degenerate designs", "[scaling]") {
  CHECK_THROWS_AS(fit_power_law(sample({1, 1, 1}, [](double) { return 1.0; }), 1.0), Error);
  CHECK_THROWS_AS(fit_power_law(sample({1, 2}, [](double) { return 1.0; }), 1.0), Error);
  CHECK(fit_constant(sample({1, 2, 3}, [](double) { return 2.0; })).a_n == 2.0);
}

TEST_CASE("free exponent from log-log regression", "[scaling]") {
  auto e = fit_free_exponent(sample(probe_grid, [](double P) { return 7.0 * P * P; }), 2.0, 0.0);
  CHECK_THAT(e.n, WithinAbs(2.0, 0.001));
  CHECK_THAT(e.scale, WithinRel(7.0, 1e-9));

  // Cubic with a large offset, removed by the fixed-exponent fit.
  e = fit_free_exponent(sample(probe_grid, [](double P) { return 320.0 * P * P * P + 1520.0; }), 3.0);
  CHECK_THAT(e.a0, WithinRel(1520.0, 1e-9));
  CHECK_THAT(e.n, WithinAbs(3.0, 1e-9));

  e = fit_free_exponent(sample(probe_grid, [](double P) { return 4.2 * std::pow(P, 2.5); }), 2.5, 0.0);
  CHECK_THAT(e.n, WithinAbs(2.5, 1e-12));

  CHECK_THROWS_AS(fit_free_exponent(sample(probe_grid, [](double P) { return P - 1.0; }), 1.0, 0.0), Error);
}

TEST_CASE("dB ratios against the coherent reference", "[scaling]") {
  CHECK_THAT(db_ratio(14.50, 19.59), WithinAbs(-1.31, 0.005));
  CHECK_THAT(db_ratio(36.25, 19.59), WithinAbs(2.67, 0.005));
  CHECK(db_ratio(3.3, 3.3) == 0.0);
  CHECK_THROWS_AS(db_ratio(-1.0, 19.59), Error);
  CHECK_THAT(db_ratio_se(10.0, 0.1, 10.0, 0.0), WithinRel(10.0 / std::log(10.0) * 0.01, 1e-12));
}

TEST_CASE("campaign grid enumeration", "[scaling]") {
  CampaignGrid g;
  g.probe_powers = {1.0, 2.0};
  g.pump_powers = {5.0, 10.0, 15.0};
  g.probe_kinds = {ProbeKind::coherent, ProbeKind::squeezed};
  const auto cells = enumerate_cells(g);
  // Per kind: one unpolarized cell and one per pump at every probe power.
  CHECK(cells.size() == 2 * 2 * (1 + 3));
  std::set<std::uint64_t> seeds;
  for (const auto& k : cells) {
    if (!k.polarized) CHECK(k.pump_power == 0.0);
    seeds.insert(cell_seed(g.base_seed, k, 0));
  }
  CHECK(seeds.size() == cells.size());
}

TEST_CASE("cell seeds depend only on base seed and key", "[scaling]") {
  const CellKey k{ProbeKind::squeezed, true, 10.0, 2.0};
  CHECK(cell_seed(7, k, 0) == cell_seed(7, k, 0));
  CHECK(cell_seed(7, k, 0) != cell_seed(8, k, 0));
  CHECK(cell_seed(7, k, 0) != cell_seed(7, k, 1));
}

TEST_CASE("campaign config validation", "[scaling]") {
  CampaignConfig c = default_config().campaign;
  CHECK_NOTHROW(c.validate());
  CHECK_THROWS_AS(CampaignConfig{}.validate(), Error);  // derived fields unresolved
  c.grid.probe_powers = {0.2};  // below the simulated probe range
  CHECK_THROWS_AS(c.validate(), Error);
}
