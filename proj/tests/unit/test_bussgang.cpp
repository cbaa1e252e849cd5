// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "qmimo/bussgang.hpp"
#include "qmimo/errors.hpp"
#include "qmimo/montecarlo.hpp"
#include "qmimo/rng.hpp"
#include "qmimo/scenario.hpp"

using namespace qmimo;

namespace {

constexpr double kTwoOverPi = 2.0 / M_PI;

ScenarioConfig small_two_bs(int antennas = 4, int ues = 2) {
  ScenarioConfig config;
  config.bs_positions = {{0.0, 0.0}, {100.0, 0.0}};
  config.ue_positions = {{25.0, 4.0}, {60.0, 7.0}, {40.0, 12.0}, {80.0, 2.0}};
  config.ue_positions.resize(ues);
  config.antennas_per_bs = antennas;
  config.seed = 2024;
  return config;
}

// Mid-SNR operating point: isolated x around 0.4 keeps the arcsin law well
// away from both the linear and the saturated regime.
OperatingPoint mid_snr_point(const ChannelSet& channels, double floor_mw,
                             double x_scale = 400.0) {
  const int num_ues = channels.num_ues();
  const int m = channels.antennas_per_bs;
  Eigen::VectorXd noise(channels.num_bs());
  for (int b = 0; b < channels.num_bs(); ++b) {
    noise(b) = floor_mw * (1.0 + 0.3 * b);
  }
  Eigen::VectorXd powers(num_ues);
  for (int k = 0; k < num_ues; ++k) {
    double slope = 0.0;
    for (int i = 0; i < channels.total_antennas(); ++i) {
      slope += kTwoOverPi * std::norm(channels.h(i, k)) / noise(i / m);
    }
    powers(k) = x_scale * 1e-3 / slope;
  }
  return {powers, noise};
}

}  // namespace

TEST_CASE("quantizer sign patterns") {
  Eigen::VectorXcd in(3);
  in << std::complex<double>(1.0, 1.0), std::complex<double>(-0.3, 2.0),
      std::complex<double>(0.0, -0.1);
  const Eigen::VectorXcd out = quantize_1bit(in);
  const double amp = 1.0 / std::sqrt(2.0);
  CHECK(out(0) == std::complex<double>(amp, amp));
  CHECK(out(1) == std::complex<double>(-amp, amp));
  // sgn(0) = +1 by convention
  CHECK(out(2) == std::complex<double>(amp, -amp));
}

TEST_CASE("quantizer is invariant to positive scaling") {
  SplitRng rng(5, {77});
  Eigen::VectorXcd samples(64);
  for (int i = 0; i < samples.size(); ++i) {
    samples(i) = rng.next_cgaussian(1.0);
  }
  const Eigen::VectorXcd base = quantize_1bit(samples);
  for (double c : {1e-6, 0.5, 3.0, 1e8}) {
    const Eigen::VectorXcd scaled = quantize_1bit(c * samples);
    CHECK((scaled - base).norm() == 0.0);
  }
}

TEST_CASE("noise-only statistics are the identity case") {
  ChannelSet channels;
  channels.h.resize(4, 0);
  channels.delta.resize(2, 0);
  channels.antennas_per_bs = 2;
  OperatingPoint point{Eigen::VectorXd(0), Eigen::VectorXd::Constant(2, 1.0)};
  const SystemStatistics stats = compute_statistics(channels, point);
  CHECK((stats.c_y - Eigen::MatrixXcd::Identity(4, 4)).norm() == 0.0);
  for (int i = 0; i < 4; ++i) {
    CHECK(stats.a_diag(i) == doctest::Approx(std::sqrt(kTwoOverPi)));
  }
  CHECK((stats.c_r - Eigen::MatrixXcd::Identity(4, 4)).norm() == 0.0);
  CHECK((stats.c_q - (1.0 - kTwoOverPi) * Eigen::MatrixXcd::Identity(4, 4))
            .norm() < 1e-15);
}

TEST_CASE("scalar statistics") {
  ChannelSet channels;
  channels.h.resize(1, 1);
  channels.h(0, 0) = std::complex<double>(0.6, -0.8);  // |h|^2 = 1
  channels.delta = Eigen::MatrixXd::Constant(1, 1, 1.0);
  channels.antennas_per_bs = 1;
  const double rho = 2.5;
  const double sigma2 = 0.7;
  OperatingPoint point{Eigen::VectorXd::Constant(1, rho),
                       Eigen::VectorXd::Constant(1, sigma2)};
  const SystemStatistics stats = compute_statistics(channels, point);
  CHECK(stats.c_y(0, 0).real() == doctest::Approx(rho + sigma2));
  CHECK(stats.a_diag(0) ==
        doctest::Approx(std::sqrt(kTwoOverPi / (rho + sigma2))));
  CHECK(stats.c_r(0, 0) == std::complex<double>(1.0, 0.0));
  CHECK(stats.c_q(0, 0).real() == doctest::Approx(1.0 - kTwoOverPi));
}

TEST_CASE("statistics validate the operating point") {
  const ScenarioConfig config = small_two_bs();
  const ChannelSet channels = draw_channels(config, 0);
  OperatingPoint point = mid_snr_point(channels, config.noise_floor_mw());
  SUBCASE("negative power") {
    point.powers_mw(0) = -1e-6;
    CHECK_THROWS_AS(compute_statistics(channels, point),
                    std::invalid_argument);
  }
  SUBCASE("zero noise") {
    point.noise_mw(1) = 0.0;
    CHECK_THROWS_AS(compute_statistics(channels, point),
                    std::invalid_argument);
  }
  SUBCASE("dimension mismatch") {
    point.powers_mw.conservativeResize(3);
    CHECK_THROWS_AS(compute_statistics(channels, point),
                    std::invalid_argument);
  }
}

TEST_CASE("structural invariants on a random instance") {
  const ScenarioConfig config = small_two_bs(4, 2);
  const ChannelSet channels = draw_channels(config, 1);
  const OperatingPoint point = mid_snr_point(channels, config.noise_floor_mw());
  const SystemStatistics stats = compute_statistics(channels, point);
  const int n = channels.total_antennas();

  CHECK((stats.c_y - stats.c_y.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((stats.c_r - stats.c_r.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((stats.c_q - stats.c_q.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < n; ++i) {
    CHECK(stats.c_r(i, i) == std::complex<double>(1.0, 0.0));
    CHECK(stats.a_diag(i) ==
          doctest::Approx(std::sqrt(kTwoOverPi / stats.c_y(i, i).real())));
    for (int j = 0; j < n; ++j) {
      CHECK(std::abs(stats.c_r(i, j)) <= 1.0 + 1e-12);
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(stats.c_q);
  const double norm2 = eig.eigenvalues().cwiseAbs().maxCoeff();
  CHECK(eig.eigenvalues().minCoeff() >= -1e-9 * norm2);
}

TEST_CASE("arcsin law matches the Monte-Carlo oracle at 4 standard errors") {
  const ScenarioConfig config = small_two_bs(4, 2);
  const ChannelSet channels = draw_channels(config, 2);
  const OperatingPoint point = mid_snr_point(channels, config.noise_floor_mw());
  const SystemStatistics stats = compute_statistics(channels, point);

  const MonteCarloMoments moments = estimate_quantized_moments(
      channels, point, stats.a_diag, 1000000, 314159);

  CHECK(max_error_over_4se(moments.e_rr, stats.c_r, moments.se_rr_re,
                           moments.se_rr_im) <= 1.0);

  Eigen::MatrixXcd a_cy = stats.c_y;
  for (Eigen::Index i = 0; i < a_cy.rows(); ++i) {
    a_cy.row(i) *= stats.a_diag(i);
  }
  CHECK(max_error_over_4se(moments.e_ry, a_cy, moments.se_ry_re,
                           moments.se_ry_im) <= 1.0);
  CHECK(max_error_over_4se(moments.e_qy,
                           Eigen::MatrixXcd::Zero(a_cy.rows(), a_cy.cols()),
                           moments.se_qy_re, moments.se_qy_im) <= 1.0);
}

TEST_CASE("MMSE combiners") {
  const ScenarioConfig config = small_two_bs(4, 3);
  ScenarioConfig cfg = config;
  cfg.ue_positions = {{25.0, 4.0}, {60.0, 7.0}, {40.0, 12.0}};
  const ChannelSet channels = draw_channels(cfg, 3);
  OperatingPoint point = mid_snr_point(channels, cfg.noise_floor_mw());

  SUBCASE("columns match an independent linear solve") {
    const SystemStatistics stats = compute_statistics(channels, point);
    const CombinerSet combiners = mmse_combiners(channels, point, stats);
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(stats.c_r);
    for (int k = 0; k < channels.num_ues(); ++k) {
      Eigen::VectorXcd rhs(channels.total_antennas());
      for (int i = 0; i < rhs.size(); ++i) {
        rhs(i) = std::sqrt(point.powers_mw(k)) * stats.a_diag(i) *
                 channels.h(i, k);
      }
      const Eigen::VectorXcd reference = lu.solve(rhs);
      CHECK((combiners.w.col(k) - reference).norm() <=
            1e-10 * reference.norm());
    }
  }

  SUBCASE("small-power combiner is a matched filter") {
    point.powers_mw *= 1e-4;
    const SystemStatistics stats = compute_statistics(channels, point);
    const CombinerSet combiners = mmse_combiners(channels, point, stats);
    for (int k = 0; k < channels.num_ues(); ++k) {
      Eigen::VectorXcd ah(channels.total_antennas());
      for (int i = 0; i < ah.size(); ++i) {
        ah(i) = stats.a_diag(i) * channels.h(i, k);
      }
      const Eigen::VectorXcd w = combiners.w.col(k);
      const double cosine = std::abs(ah.dot(w)) / (ah.norm() * w.norm());
      CHECK(cosine > 1.0 - 1e-5);
    }
  }

  SUBCASE("zero power gives the zero combiner") {
    point.powers_mw(1) = 0.0;
    const SystemStatistics stats = compute_statistics(channels, point);
    const CombinerSet combiners = mmse_combiners(channels, point, stats);
    CHECK(combiners.w.col(1).norm() == 0.0);
  }

  SUBCASE("MMSE is a local (indeed global) MSE minimum") {
    const SystemStatistics stats = compute_statistics(channels, point);
    const CombinerSet combiners = mmse_combiners(channels, point, stats);
    const int k = 0;
    const double mse_star =
        mse_of_combiner(k, combiners.w.col(k), channels, point, stats);
    CHECK(mse_star ==
          doctest::Approx(mse(k, channels, point, stats)).epsilon(1e-10));
    SplitRng rng(11, {static_cast<std::uint64_t>(k)});
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXcd v(channels.total_antennas());
      for (int i = 0; i < v.size(); ++i) {
        v(i) = rng.next_cgaussian(1.0);
      }
      v *= combiners.w.col(k).norm() / v.norm();
      const double perturbed = mse_of_combiner(
          k, combiners.w.col(k) + 1e-3 * v, channels, point, stats);
      CHECK(perturbed >= mse_star - 1e-15);
    }
  }
}

TEST_CASE("general SINDR") {
  const ScenarioConfig config = small_two_bs(4, 2);
  const ChannelSet channels = draw_channels(config, 4);
  const OperatingPoint point = mid_snr_point(channels, config.noise_floor_mw());
  const SystemStatistics stats = compute_statistics(channels, point);
  const CombinerSet combiners = mmse_combiners(channels, point, stats);

  SUBCASE("matches the closed form under MMSE combining") {
    for (int k = 0; k < channels.num_ues(); ++k) {
      const double general =
          sindr_general(k, combiners.w.col(k), channels, point, stats);
      const double closed = sindr_closed_form(k, channels, point, stats);
      CHECK(general == doctest::Approx(closed).epsilon(1e-8));
    }
  }

  SUBCASE("invariant to combiner scaling") {
    const double base =
        sindr_general(0, combiners.w.col(0), channels, point, stats);
    for (double c : {-2.0, 1e-6, 42.0}) {
      CHECK(sindr_general(0, c * combiners.w.col(0), channels, point,
                          stats) == doctest::Approx(base).epsilon(1e-12));
    }
  }

  SUBCASE("combiner orthogonal to A h_k scores zero") {
    Eigen::VectorXcd ah(channels.total_antennas());
    for (int i = 0; i < ah.size(); ++i) {
      ah(i) = stats.a_diag(i) * channels.h(i, 0);
    }
    SplitRng rng(17, {3});
    Eigen::VectorXcd w(channels.total_antennas());
    for (int i = 0; i < w.size(); ++i) {
      w(i) = rng.next_cgaussian(1.0);
    }
    w -= ah * (ah.dot(w) / ah.squaredNorm());
    CHECK(std::abs(ah.dot(w)) < 1e-12 * ah.norm() * w.norm());
    CHECK(sindr_general(0, w, channels, point, stats) < 1e-20);
  }

  SUBCASE("zero combiner is rejected") {
    CHECK_THROWS_AS(
        sindr_general(0, Eigen::VectorXcd::Zero(channels.total_antennas()),
                      channels, point, stats),
        std::invalid_argument);
  }
}

TEST_CASE("closed-form SINDR") {
  const ScenarioConfig config = small_two_bs(4, 2);
  const ChannelSet channels = draw_channels(config, 5);
  OperatingPoint point = mid_snr_point(channels, config.noise_floor_mw());

  SUBCASE("zero power means zero SINDR and unit MSE") {
    point.powers_mw(0) = 0.0;
    const SystemStatistics stats = compute_statistics(channels, point);
    CHECK(sindr_closed_form(0, channels, point, stats) == 0.0);
    CHECK(mse(0, channels, point, stats) == doctest::Approx(1.0));
  }

  SUBCASE("joint power/noise rescaling leaves SINDR unchanged") {
    const SystemStatistics stats = compute_statistics(channels, point);
    std::vector<double> base;
    for (int k = 0; k < channels.num_ues(); ++k) {
      base.push_back(sindr_closed_form(k, channels, point, stats));
    }
    for (double c : {1e-3, 0.1, 7.0, 1e4}) {
      const OperatingPoint scaled{c * point.powers_mw, c * point.noise_mw};
      const SystemStatistics stats_c = compute_statistics(channels, scaled);
      CHECK((stats_c.c_r - stats.c_r).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((stats_c.c_q - stats.c_q).cwiseAbs().maxCoeff() < 1e-12);
      for (int i = 0; i < channels.total_antennas(); ++i) {
        CHECK(stats_c.a_diag(i) ==
              doctest::Approx(stats.a_diag(i) / std::sqrt(c)).epsilon(1e-12));
      }
      for (int k = 0; k < channels.num_ues(); ++k) {
        CHECK(sindr_closed_form(k, channels, scaled, stats_c) ==
              doctest::Approx(base[k]).epsilon(1e-9));
      }
    }
  }

  SUBCASE("low-SNR limit is 2/pi times the unquantized SNR") {
    ScenarioConfig single = small_two_bs(8, 1);
    single.bs_positions = {{0.0, 0.0}};
    const ChannelSet ch = draw_channels(single, 6);
    const double sigma2 = single.noise_floor_mw();
    const double snr_target = 1e-3;
    const double rho = snr_target * sigma2 / ch.h.col(0).squaredNorm();
    const OperatingPoint pt{Eigen::VectorXd::Constant(1, rho),
                            Eigen::VectorXd::Constant(1, sigma2)};
    const SystemStatistics stats = compute_statistics(ch, pt);
    const double sindr = sindr_closed_form(0, ch, pt, stats);
    CHECK(sindr == doctest::Approx(kTwoOverPi * snr_target).epsilon(0.02));
  }

  SUBCASE("SINDR-MSE identity") {
    const SystemStatistics stats = compute_statistics(channels, point);
    for (int k = 0; k < channels.num_ues(); ++k) {
      const double m = mse(k, channels, point, stats);
      CHECK((1.0 - m) / m ==
            doctest::Approx(sindr_closed_form(k, channels, point, stats))
                .epsilon(1e-9));
    }
  }
}

TEST_CASE("physical bound x in [0,1) over random operating points") {
  const ScenarioConfig config = small_two_bs(4, 4);
  const ChannelSet channels = draw_channels(config, 7);
  SplitRng rng(1234, {200});
  const double floor_mw = config.noise_floor_mw();
  for (int trial = 0; trial < 500; ++trial) {
    Eigen::VectorXd powers(channels.num_ues());
    for (int k = 0; k < powers.size(); ++k) {
      powers(k) = dbm_to_linear(-30.0 + 60.0 * rng.next_double());
    }
    Eigen::VectorXd noise(channels.num_bs());
    for (int b = 0; b < noise.size(); ++b) {
      noise(b) = floor_mw * std::pow(10.0, 3.0 * rng.next_double());
    }
    const SindrReport report = evaluate_sindr(channels, {powers, noise});
    for (int k = 0; k < channels.num_ues(); ++k) {
      CHECK(report.x(k) >= 0.0);
      CHECK(report.x(k) < 1.0);
    }
  }
}

TEST_CASE("dithering lowers the MSE of a near-BS UE at high power") {
  // Two BSs 100 m apart, single UE at 10 m transmitting at 20 dBm: raising
  // the near-BS noise level acts as dithering and must help.
  ScenarioConfig config = small_two_bs(128, 1);
  config.ue_positions = {{10.0, 0.0}};
  const ChannelSet channels = draw_channels(config, 8);
  const double floor_mw = config.noise_floor_mw();
  const Eigen::VectorXd powers =
      Eigen::VectorXd::Constant(1, dbm_to_linear(20.0));

  Eigen::VectorXd noise = Eigen::VectorXd::Constant(2, floor_mw);
  const SystemStatistics base = compute_statistics(channels, {powers, noise});
  const double mse_base = mse(0, channels, {powers, noise}, base);

  noise(0) = 2.0 * floor_mw;
  const SystemStatistics dithered =
      compute_statistics(channels, {powers, noise});
  const double mse_dithered = mse(0, channels, {powers, noise}, dithered);
  CHECK(mse_dithered < mse_base);
}

TEST_CASE("single-BS SNDR is unimodal in transmit power") {
  ScenarioConfig config;
  config.bs_positions = {{0.0, 0.0}};
  config.ue_positions = {{30.0, 0.0}};
  config.antennas_per_bs = 128;
  config.seed = 31;
  const ChannelSet channels = draw_channels(config, 0);
  const Eigen::VectorXd noise =
      Eigen::VectorXd::Constant(1, config.noise_floor_mw());

  std::vector<double> curve;
  double peak = 0.0;
  for (int dbm = -20; dbm <= 60; ++dbm) {
    const Eigen::VectorXd powers =
        Eigen::VectorXd::Constant(1, dbm_to_linear(dbm));
    curve.push_back(evaluate_sindr(channels, {powers, noise}).sindr(0));
    peak = std::max(peak, curve.back());
  }
  int peaks = 0;
  bool ascending = true;
  double run_max = curve.front();
  double run_min = curve.front();
  const double prominence = 1e-3 * peak;
  for (double v : curve) {
    if (ascending) {
      run_max = std::max(run_max, v);
      if (v < run_max - prominence) {
        ++peaks;
        ascending = false;
        run_min = v;
      }
    } else {
      run_min = std::min(run_min, v);
      if (v > run_min + prominence) {
        ascending = true;
        run_max = v;
      }
    }
  }
  if (ascending) {
    ++peaks;
  }
  CHECK(peaks == 1);
}

TEST_CASE("statistics dump round-trips through its text format") {
  const ScenarioConfig config = small_two_bs(3, 2);
  const ChannelSet channels = draw_channels(config, 9);
  const OperatingPoint point = mid_snr_point(channels, config.noise_floor_mw());
  const SystemStatistics stats = compute_statistics(channels, point);

  const std::string path = "stats_dump_test.txt";
  write_statistics_dump(stats, config.num_bs(), config.antennas_per_bs,
                        config.num_ues(), path);

  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  CHECK(line == "# qmimo statistics dump");
  std::getline(in, line);
  CHECK(line == "# B 2");
  std::getline(in, line);
  CHECK(line == "# M 3");
  std::getline(in, line);
  CHECK(line == "# K 2");
  std::getline(in, line);
  CHECK(line == "# BM 6");
  std::getline(in, line);
  CHECK(line.find("# matrix c_y rows 6 cols 6") == 0);
  std::getline(in, line);
  std::istringstream row(line);
  for (int j = 0; j < 6; ++j) {
    double re = 0.0;
    double im = 0.0;
    row >> re >> im;
    CHECK(re == stats.c_y(0, j).real());
    CHECK(im == stats.c_y(0, j).imag());
  }
}

TEST_CASE("Monte-Carlo moments are independent of the worker count") {
  const ScenarioConfig config = small_two_bs(2, 1);
  const ChannelSet channels = draw_channels(config, 10);
  const OperatingPoint point = mid_snr_point(channels, config.noise_floor_mw());
  const SystemStatistics stats = compute_statistics(channels, point);

  setenv("QMIMO_WORKERS", "1", 1);
  const MonteCarloMoments serial = estimate_quantized_moments(
      channels, point, stats.a_diag, 200000, 909);
  setenv("QMIMO_WORKERS", "3", 1);
  const MonteCarloMoments threaded = estimate_quantized_moments(
      channels, point, stats.a_diag, 200000, 909);
  unsetenv("QMIMO_WORKERS");

  CHECK((serial.e_rr - threaded.e_rr).cwiseAbs().maxCoeff() == 0.0);
  CHECK((serial.e_ry - threaded.e_ry).cwiseAbs().maxCoeff() == 0.0);
  CHECK((serial.e_qy - threaded.e_qy).cwiseAbs().maxCoeff() == 0.0);
  CHECK((serial.se_rr_re - threaded.se_rr_re).cwiseAbs().maxCoeff() == 0.0);
}
