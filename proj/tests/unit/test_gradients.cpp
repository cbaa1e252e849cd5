// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <array>
#include <cmath>
#include <complex>

#include "qmimo/bussgang.hpp"
#include "qmimo/errors.hpp"
#include "qmimo/gradients.hpp"
#include "qmimo/rng.hpp"
#include "qmimo/scenario.hpp"

using namespace qmimo;

namespace {

constexpr double kTwoOverPi = 2.0 / M_PI;

ScenarioConfig sized_scenario(int num_bs, int antennas, int num_ues,
                              std::uint64_t seed) {
  ScenarioConfig config;
  config.bs_positions = {{0.0, 0.0}, {100.0, 0.0}, {50.0, 86.6}};
  config.bs_positions.resize(num_bs);
  config.ue_positions = {{25.0, 4.0}, {60.0, 7.0}, {40.0, 12.0}, {80.0, 2.0}};
  config.ue_positions.resize(num_ues);
  config.antennas_per_bs = antennas;
  config.seed = seed;
  return config;
}

// Unit-scale instance for derivative checks: O(1) gains and noise keep the
// central differences far from the cancellation floor of the step policy.
ChannelSet unit_scale_channels(int num_bs, int antennas, int num_ues,
                               std::uint64_t seed) {
  ChannelSet channels;
  channels.antennas_per_bs = antennas;
  channels.seed_used = seed;
  channels.delta.resize(num_bs, num_ues);
  channels.h.resize(static_cast<Eigen::Index>(num_bs) * antennas, num_ues);
  SplitRng rng(seed, {static_cast<std::uint64_t>(num_bs),
                      static_cast<std::uint64_t>(num_ues)});
  for (int b = 0; b < num_bs; ++b) {
    for (int k = 0; k < num_ues; ++k) {
      const double delta = 0.2 + 1.8 * rng.next_double();
      channels.delta(b, k) = delta;
      for (int m = 0; m < antennas; ++m) {
        channels.h(b * antennas + m, k) = rng.next_cgaussian(delta);
      }
    }
  }
  return channels;
}

// Random operating point spanning the low-to-near-saturated regime.
OperatingPoint random_point(const ChannelSet& channels, double floor_mw,
                            SplitRng& rng) {
  const int m = channels.antennas_per_bs;
  Eigen::VectorXd noise(channels.num_bs());
  for (int b = 0; b < channels.num_bs(); ++b) {
    noise(b) = floor_mw * std::pow(10.0, 2.5 * rng.next_double());
  }
  Eigen::VectorXd powers(channels.num_ues());
  for (int k = 0; k < channels.num_ues(); ++k) {
    double slope = 0.0;
    for (int i = 0; i < channels.total_antennas(); ++i) {
      slope += kTwoOverPi * std::norm(channels.h(i, k)) / noise(i / m);
    }
    const double x_scale = std::pow(10.0, -1.0 + 1.8 * rng.next_double());
    powers(k) = 0.4 * x_scale / slope;
  }
  return {powers, noise};
}

double fd_tolerance(double analytic, double numeric, double rel, double abs) {
  return std::max(rel * std::max(std::abs(analytic), std::abs(numeric)), abs);
}

}  // namespace

TEST_CASE("Bussgang gain derivative") {
  const ChannelSet channels = unit_scale_channels(2, 3, 2, 51);
  SplitRng rng(7, {1});
  const OperatingPoint point = random_point(channels, 1.0, rng);
  const SystemStatistics stats = compute_statistics(channels, point);

  SUBCASE("all entries are non-positive") {
    for (int k = 0; k < channels.num_ues(); ++k) {
      const Eigen::VectorXd grad = d_bussgang_gain(k, channels, stats);
      CHECK(grad.maxCoeff() <= 0.0);
    }
  }

  SUBCASE("zero channel gives a zero derivative") {
    ChannelSet zeroed = channels;
    zeroed.h.col(1).setZero();
    const SystemStatistics s = compute_statistics(zeroed, point);
    CHECK(d_bussgang_gain(1, zeroed, s).norm() == 0.0);
  }

  SUBCASE("matches finite differences entrywise") {
    for (int k = 0; k < channels.num_ues(); ++k) {
      const Eigen::VectorXd analytic = d_bussgang_gain(k, channels, stats);
      const double h = 1e-5 * point.powers_mw(k);
      OperatingPoint plus = point;
      OperatingPoint minus = point;
      plus.powers_mw(k) += h;
      minus.powers_mw(k) -= h;
      const Eigen::VectorXd fd =
          (compute_statistics(channels, plus).a_diag -
           compute_statistics(channels, minus).a_diag) /
          (2.0 * h);
      for (int i = 0; i < analytic.size(); ++i) {
        CHECK(std::abs(analytic(i) - fd(i)) <=
              fd_tolerance(analytic(i), fd(i), 1e-6, 1e-14));
      }
    }
  }
}

TEST_CASE("quantized covariance derivative") {
  const ChannelSet channels = unit_scale_channels(2, 3, 2, 52);
  SplitRng rng(8, {2});
  const OperatingPoint point = random_point(channels, 1.0, rng);
  const SystemStatistics stats = compute_statistics(channels, point);

  SUBCASE("Hermitian with an exactly zero diagonal") {
    for (int k = 0; k < channels.num_ues(); ++k) {
      const Eigen::MatrixXcd grad = d_quantized_covariance(k, channels, stats);
      CHECK((grad - grad.adjoint()).cwiseAbs().maxCoeff() == 0.0);
      CHECK(grad.diagonal().cwiseAbs().maxCoeff() == 0.0);
    }
  }

  SUBCASE("zero channel gives a zero derivative") {
    ChannelSet zeroed = channels;
    zeroed.h.col(0).setZero();
    const SystemStatistics s = compute_statistics(zeroed, point);
    CHECK(d_quantized_covariance(0, zeroed, s).norm() == 0.0);
  }

  SUBCASE("normalized-input convention matches finite differences; the "
          "raw-entry reading does not") {
    const int n = channels.total_antennas();
    for (int k = 0; k < channels.num_ues(); ++k) {
      const Eigen::MatrixXcd analytic =
          d_quantized_covariance(k, channels, stats);
      const Eigen::MatrixXcd alt = d_quantized_covariance(
          k, channels, stats, ArcsinDerivativeFactor::QuantizedOutputEntry);
      const double h = std::max(1e-5 * point.powers_mw(k), 1e-9);
      OperatingPoint plus = point;
      OperatingPoint minus = point;
      plus.powers_mw(k) += h;
      minus.powers_mw(k) -= h;
      const Eigen::MatrixXcd fd = (compute_statistics(channels, plus).c_r -
                                   compute_statistics(channels, minus).c_r) /
                                  (2.0 * h);
      double alt_worst = 0.0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          CHECK(std::abs(analytic(i, j).real() - fd(i, j).real()) <=
                fd_tolerance(analytic(i, j).real(), fd(i, j).real(), 1e-6,
                             1e-10));
          CHECK(std::abs(analytic(i, j).imag() - fd(i, j).imag()) <=
                fd_tolerance(analytic(i, j).imag(), fd(i, j).imag(), 1e-6,
                             1e-10));
          const double scale = std::abs(fd(i, j));
          if (scale > 0.0) {
            alt_worst =
                std::max(alt_worst, std::abs(alt(i, j) - fd(i, j)) / scale);
          }
        }
      }
      // The raw-entry reading deviates by orders of magnitude more than the
      // finite-difference noise: the oracle singles out one convention.
      CHECK(alt_worst > 1e-3);
    }
  }
}

TEST_CASE("constraint derivative") {
  SUBCASE("scalar system matches the hand-derived expression") {
    ChannelSet channels;
    channels.h.resize(1, 1);
    channels.h(0, 0) = std::complex<double>(1.2, -0.5);
    channels.delta = Eigen::MatrixXd::Constant(1, 1, 1.0);
    channels.antennas_per_bs = 1;
    const double g = std::norm(channels.h(0, 0));
    const double rho = 0.8;
    const double sigma2 = 0.6;
    const OperatingPoint point{Eigen::VectorXd::Constant(1, rho),
                               Eigen::VectorXd::Constant(1, sigma2)};
    const SystemStatistics stats = compute_statistics(channels, point);
    CrSolver solver(stats.c_r);
    const Eigen::VectorXd da = d_bussgang_gain(0, channels, stats);
    const Eigen::MatrixXcd dcr = d_quantized_covariance(0, channels, stats);
    const double analytic =
        d_constraint(0, 0, channels, stats, da, dcr, solver);
    // f = (2/pi) g / (rho g + sigma^2), so df/drho = -(2/pi) g^2 / C_y^2.
    const double cy = rho * g + sigma2;
    CHECK(analytic ==
          doctest::Approx(-kTwoOverPi * g * g / (cy * cy)).epsilon(1e-12));
  }

  SUBCASE("finite-difference match on a (2,4,3) instance") {
    const ChannelSet channels = unit_scale_channels(2, 4, 3, 53);
    SplitRng rng(9, {3});
    const OperatingPoint point = random_point(channels, 1.0, rng);
    const SystemStatistics stats = compute_statistics(channels, point);
    CrSolver solver(stats.c_r);
    for (int k = 0; k < channels.num_ues(); ++k) {
      const Eigen::VectorXd da = d_bussgang_gain(k, channels, stats);
      const Eigen::MatrixXcd dcr = d_quantized_covariance(k, channels, stats);
      for (int kb = 0; kb < channels.num_ues(); ++kb) {
        const double analytic =
            d_constraint(kb, k, channels, stats, da, dcr, solver);
        const auto f = [&](const Eigen::VectorXd& powers) {
          const SystemStatistics s =
              compute_statistics(channels, {powers, point.noise_mw});
          CrSolver inner(s.c_r);
          return constraint_value(kb, channels, s, inner);
        };
        const FiniteDifferenceReport report =
            finite_difference_check(f, point.powers_mw, k, analytic);
        CHECK(report.abs_error <=
              fd_tolerance(report.analytic, report.numeric, 1e-5, 1e-10));
      }
    }
  }

  SUBCASE("own-constraint value x_k grows from zero power") {
    const ScenarioConfig config = sized_scenario(1, 3, 1, 54);
    const ChannelSet channels = draw_channels(config, 0);
    const double floor_mw = config.noise_floor_mw();
    const double rho = 1e-9;
    const OperatingPoint point{Eigen::VectorXd::Constant(1, rho),
                               Eigen::VectorXd::Constant(1, floor_mw)};
    const SystemStatistics stats = compute_statistics(channels, point);
    CrSolver solver(stats.c_r);
    const Eigen::VectorXd da = d_bussgang_gain(0, channels, stats);
    const Eigen::MatrixXcd dcr = d_quantized_covariance(0, channels, stats);
    const double df = d_constraint(0, 0, channels, stats, da, dcr, solver);
    const double f = constraint_value(0, channels, stats, solver);
    // d x / d rho = f + rho df > 0: the SINDR grows from zero.
    CHECK(f + rho * df > 0.0);
  }
}

TEST_CASE("Lagrangian gradient") {
  const ChannelSet channels = unit_scale_channels(2, 3, 2, 55);
  SplitRng rng(10, {4});
  const OperatingPoint point = random_point(channels, 1.0, rng);
  const SystemStatistics stats = compute_statistics(channels, point);

  SUBCASE("zero duals give the all-ones vector") {
    const Eigen::VectorXd grad = lagrangian_gradient(
        point, Eigen::VectorXd::Zero(channels.num_ues()), channels, stats);
    CHECK((grad - Eigen::VectorXd::Ones(channels.num_ues())).norm() == 0.0);
  }

  SUBCASE("negative duals are rejected") {
    Eigen::VectorXd duals = Eigen::VectorXd::Zero(channels.num_ues());
    duals(0) = -1.0;
    CHECK_THROWS_AS(lagrangian_gradient(point, duals, channels, stats),
                    std::invalid_argument);
  }

  SUBCASE("matches finite differences of the assembled Lagrangian") {
    Eigen::VectorXd duals(channels.num_ues());
    Eigen::VectorXd t(channels.num_ues());
    for (int k = 0; k < channels.num_ues(); ++k) {
      duals(k) = 0.3 + 2.0 * rng.next_double();
      t(k) = 0.5;
    }
    const Eigen::VectorXd grad =
        lagrangian_gradient(point, duals, channels, stats);
    const auto lagrangian = [&](const Eigen::VectorXd& powers) {
      const SindrReport report =
          evaluate_sindr(channels, {powers, point.noise_mw});
      return powers.sum() -
             (duals.array() * (report.x.array() - t.array())).sum();
    };
    for (int k = 0; k < channels.num_ues(); ++k) {
      const FiniteDifferenceReport report =
          finite_difference_check(lagrangian, point.powers_mw, k, grad(k));
      CHECK(report.abs_error <=
            fd_tolerance(report.analytic, report.numeric, 1e-5, 1e-10));
    }
  }

  SUBCASE("large dual at small power pushes power upward") {
    const ScenarioConfig single = sized_scenario(1, 3, 1, 56);
    const ChannelSet ch = draw_channels(single, 0);
    const double floor_mw = single.noise_floor_mw();
    const OperatingPoint pt{Eigen::VectorXd::Constant(1, 1e-8),
                            Eigen::VectorXd::Constant(1, floor_mw)};
    const SystemStatistics s = compute_statistics(ch, pt);
    const Eigen::VectorXd grad =
        lagrangian_gradient(pt, Eigen::VectorXd::Constant(1, 1e6), ch, s);
    CHECK(grad(0) < 0.0);
  }
}

TEST_CASE("finite-difference harness basics") {
  Eigen::VectorXd powers(2);
  powers << 0.5, 2.0;

  SUBCASE("exact for linear functions") {
    const auto f = [](const Eigen::VectorXd& p) { return 3.0 * p(0) - p(1); };
    const FiniteDifferenceReport report =
        finite_difference_check(f, powers, 0, 3.0);
    CHECK(report.rel_error <= 1e-10);
  }

  SUBCASE("exact zero for constants") {
    const auto f = [](const Eigen::VectorXd&) { return 42.0; };
    const FiniteDifferenceReport report =
        finite_difference_check(f, powers, 1, 0.0);
    CHECK(report.abs_error <= 1e-12);
  }

  SUBCASE("one-sided stencil engages at the zero boundary") {
    Eigen::VectorXd boundary(1);
    boundary << 0.0;
    const auto f = [](const Eigen::VectorXd& p) { return p(0) * p(0) + p(0); };
    const FiniteDifferenceReport report =
        finite_difference_check(f, boundary, 0, 1.0);
    CHECK(report.abs_error <= 1e-6);
  }
}

TEST_CASE("reduced finite-difference suite across instance sizes") {
  const std::array<std::array<int, 3>, 3> sizes = {
      {{{1, 2, 1}}, {{2, 3, 2}}, {{2, 4, 4}}}};
  // A reduced sweep here; the acceptance suite runs >= 20 points per size.
  const int points_per_size = 5;
  for (const auto& size : sizes) {
    const int num_bs = size[0];
    const int antennas = size[1];
    const int num_ues = size[2];
    const ChannelSet channels =
        unit_scale_channels(num_bs, antennas, num_ues, 60 + num_bs);
    SplitRng rng(20, {static_cast<std::uint64_t>(num_bs),
                      static_cast<std::uint64_t>(num_ues)});
    for (int trial = 0; trial < points_per_size; ++trial) {
      const OperatingPoint point = random_point(channels, 1.0, rng);
      const SystemStatistics stats = compute_statistics(channels, point);
      Eigen::VectorXd duals(num_ues);
      for (int k = 0; k < num_ues; ++k) {
        duals(k) = 2.0 * rng.next_double();
      }
      const GradientBundle bundle =
          compute_gradient_bundle(channels, point, stats, duals);
      for (int k = 0; k < num_ues; ++k) {
        for (int kb = 0; kb < num_ues; ++kb) {
          const auto f = [&](const Eigen::VectorXd& powers) {
            const SystemStatistics s =
                compute_statistics(channels, {powers, point.noise_mw});
            CrSolver inner(s.c_r);
            return constraint_value(kb, channels, s, inner);
          };
          const FiniteDifferenceReport report = finite_difference_check(
              f, point.powers_mw, k, bundle.dconstraint(kb, k));
          CHECK(report.abs_error <=
                fd_tolerance(report.analytic, report.numeric, 1e-5, 1e-10));
        }
      }
    }
  }
}
