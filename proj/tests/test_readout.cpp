#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "qnoise/dsp.hpp"
#include "qnoise/readout.hpp"

using namespace qnoise;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double mean_psd(const std::vector<double>& x, double f_s) {
  const auto s = welch_psd(TimeSeries{x, f_s, 0.0}, 1024, 512);
  double m = 0.0;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) m += s.psd[i];
  return m / static_cast<double>(s.size() - 2);
}

ProbeState unit_kappa(ProbeState p) {
  p.kappa = 1.0;
  return p;
}

}  // namespace

TEST_CASE("coherent shot noise has PSD kappa * P in both streams", "[readout][oracle]") {
  const auto n = sample_probe_noise(unit_kappa({}), 1.0, 1.0e5, 1000000, 3);
  CHECK_THAT(mean_psd(n.s2, 1.0e5), WithinRel(1.0, 0.03));
  CHECK_THAT(mean_psd(n.s3, 1.0e5), WithinRel(1.0, 0.03));
  double s = 0.0;
  for (double v : n.s2) s += v;
  CHECK(std::abs(s / static_cast<double>(n.s2.size())) < 5.0 * white_sigma(1.0, 1.0e5) / 1000.0);
}

TEST_CASE("squeezed S2 sits 1.2 dB below coherent", "[readout]") {
  ProbeState sq = unit_kappa(ProbeState::from_db(ProbeKind::squeezed, 1.19, 2.67));
  sq.xi2 = 0.76;
  const auto a = sample_probe_noise(unit_kappa({}), 2.0, 1.0e5, 400000, 5);
  const auto b = sample_probe_noise(sq, 2.0, 1.0e5, 400000, 6);
  const double db = 10.0 * std::log10(mean_psd(b.s2, 1.0e5) / mean_psd(a.s2, 1.0e5));
  CHECK_THAT(db, WithinAbs(-1.2, 0.1));
}

TEST_CASE("no light means no shot noise", "[readout]") {
  const auto n = sample_probe_noise({}, 0.0, 1.0e4, 100, 1);
  for (double v : n.s2) CHECK(v == 0.0);
  for (double v : n.s3) CHECK(v == 0.0);
}

TEST_CASE("shot-noise level is linear in probe power", "[readout][property]") {
  for (auto kind : {ProbeKind::coherent, ProbeKind::squeezed, ProbeKind::antisqueezed}) {
    const auto p = ProbeState::from_db(kind, 1.2, 2.7);
    const ProbeNoiseSource one(p, 1.0, 1), many(p, 2.7, 1);
    CHECK_THAT(many.s2_psd(), WithinRel(2.7 * one.s2_psd(), 1e-14));
    CHECK_THAT(many.s3_psd(), WithinRel(2.7 * one.s3_psd(), 1e-14));
  }
}

TEST_CASE("swapping squeezed and antisqueezed swaps S2 and S3", "[readout][property]") {
  const auto sq = ProbeState::from_db(ProbeKind::squeezed, 1.3, 2.9);
  const auto asq = ProbeState::from_db(ProbeKind::antisqueezed, 1.3, 2.9);
  const ProbeNoiseSource a(sq, 1.5, 4), b(asq, 1.5, 4);
  CHECK(a.s2_psd() == b.s3_psd());
  CHECK(a.s3_psd() == b.s2_psd());
}

TEST_CASE("probe state invariants", "[readout]") {
  CHECK_NOTHROW(ProbeState{}.validate());
  ProbeState p;
  p.xi2 = 0.9;
  CHECK_THROWS_AS(p.validate(), Error);
  p = ProbeState::from_db(ProbeKind::squeezed, 1.2, 2.7);
  CHECK_NOTHROW(p.validate());
  p.xibar2 = 1.0;  // xi2 * xibar2 < 1
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("loss model", "[readout]") {
  const auto sq = ProbeState::from_db(ProbeKind::squeezed, 2.0, 3.0);
  CHECK(apply_loss(sq, 1.0) == sq);

  // Transmission taking -2.0 dB to -1.8 dB, from inverting the beam-splitter mix.
  const double xi2 = std::pow(10.0, -0.2), target = std::pow(10.0, -0.18);
  const double eta = (1.0 - target) / (1.0 - xi2);
  CHECK_THAT(eta, WithinAbs(0.919, 0.001));
  CHECK_THAT(apply_loss(sq, eta).xi2, WithinRel(target, 1e-12));

  const ProbeState coh;
  for (double e : {0.1, 0.5, 0.93}) {
    CHECK(apply_loss(coh, e).xi2 == 1.0);
    CHECK(apply_loss(coh, e).xibar2 == 1.0);
  }
  CHECK_THROWS_AS(apply_loss(coh, 0.0), Error);
}

TEST_CASE("loss pulls both factors toward 1 and keeps the uncertainty bound", "[readout][property]") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    ProbeState p;
    p.kind = ProbeKind::squeezed;
    p.xi2 = 0.05 + 0.9 * u(rng);
    p.xibar2 = (1.0 / p.xi2) * (1.0 + 2.0 * u(rng));
    const double eta = 0.01 + 0.98 * u(rng);
    const auto q = apply_loss(p, eta);
    CHECK(q.xi2 > p.xi2);
    CHECK(q.xibar2 < p.xibar2);
    CHECK(q.xi2 * q.xibar2 >= 1.0);
  }
}

TEST_CASE("polarimeter readout is linear in F_z", "[readout]") {
  DetectorConfig det;
  det.gain = 2.0;
  det.G_F = 1.0e-4;
  const std::vector<double> zero(64, 0.0);
  for (double v : polarimeter_readout(zero, zero, 1.0e5, det)) CHECK(v == 0.0);

  const double A = 300.0, s1 = 2.0e5, f = 1000.0, f_s = 64000.0;
  std::vector<double> fz(640);
  for (std::size_t i = 0; i < fz.size(); ++i) fz[i] = A * std::cos(two_pi * f * static_cast<double>(i) / f_s);
  const auto v = polarimeter_readout(fz, std::vector<double>(fz.size(), 0.0), s1, det);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK_THAT(v[i], WithinAbs(det.gain * det.G_F * s1 * fz[i], 1e-9));

  fz.assign(4, 2000.0);  // 0.2 rad
  CHECK_THROWS_AS(polarimeter_readout(fz, std::vector<double>(4, 0.0), s1, det), Error);
}

TEST_CASE("shot noise alone gives a flat voltage PSD of gain^2 kappa P", "[readout][oracle]") {
  DetectorConfig det;
  det.gain = 3.0;
  ProbeState p;
  p.kappa = 9.8;
  const double P = 1.5, f_s = 5.0e4;
  const auto n = sample_probe_noise(p, P, f_s, 600000, 8);
  const auto v = polarimeter_readout(std::vector<double>(n.s2.size(), 0.0), n.s2, 1.0e5, det);
  CHECK_THAT(mean_psd(v, f_s), WithinRel(det.gain * det.gain * p.kappa * P, 0.03));
}
