// SPDX-License-Identifier: Apache-2.0
#include "qmimo/gradients.hpp"

#include <cmath>

#include "qmimo/errors.hpp"

namespace qmimo {

namespace {

constexpr double kSingularGuard = 1e-14;  // on 1 - u^2

inline Eigen::VectorXcd diag_scale(const Eigen::VectorXd& a,
                                   const Eigen::VectorXcd& v) {
  Eigen::VectorXcd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out(i) = a(i) * v(i);
  }
  return out;
}

inline double guarded_deriv_factor(double u) {
  const double one_minus = 1.0 - u * u;
  if (one_minus <= kSingularGuard) {
    throw SingularDerivativeError(
        "arcsin derivative singular: |normalized correlation| = 1");
  }
  return 1.0 / std::sqrt(one_minus);
}

}  // namespace

Eigen::VectorXd d_bussgang_gain(int k, const ChannelSet& channels,
                                const SystemStatistics& stats) {
  const int n = channels.total_antennas();
  const double coeff = -std::sqrt(1.0 / (2.0 * M_PI));
  Eigen::VectorXd grad(n);
  for (int i = 0; i < n; ++i) {
    const double cii = stats.c_y(i, i).real();
    grad(i) = coeff * std::pow(cii, -1.5) * std::norm(channels.h(i, k));
  }
  return grad;
}

Eigen::MatrixXcd d_quantized_covariance(int k, const ChannelSet& channels,
                                        const SystemStatistics& stats,
                                        ArcsinDerivativeFactor factor) {
  const int n = channels.total_antennas();
  const double two_over_pi = 2.0 / M_PI;
  Eigen::MatrixXcd grad = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double cii = stats.c_y(i, i).real();
    const double hi2 = std::norm(channels.h(i, k));
    for (int j = 0; j < i; ++j) {
      const double cjj = stats.c_y(j, j).real();
      const double hj2 = std::norm(channels.h(j, k));
      const double inv_scale = 1.0 / std::sqrt(cii * cjj);
      const double u_re = stats.c_y(i, j).real() * inv_scale;
      const double u_im = stats.c_y(i, j).imag() * inv_scale;
      // d c_y(i,j) / d rho_k and the diagonal-growth rates.
      const std::complex<double> dcy =
          channels.h(i, k) * std::conj(channels.h(j, k));
      const double diag_rate = 0.5 * (hi2 / cii + hj2 / cjj);

      double d_re = 0.0;
      double d_im = 0.0;
      if (factor == ArcsinDerivativeFactor::NormalizedInput) {
        const double du_re = dcy.real() * inv_scale - u_re * diag_rate;
        const double du_im = dcy.imag() * inv_scale - u_im * diag_rate;
        d_re = two_over_pi * guarded_deriv_factor(u_re) * du_re;
        d_im = two_over_pi * guarded_deriv_factor(u_im) * du_im;
      } else {
        // Alternative reading: c_r entry inside the square root and a 1/2
        // coefficient with A^2 diagonal scaling. Kept for comparison only.
        const double q2 = std::norm(stats.c_r(i, j));
        if (1.0 - q2 <= kSingularGuard) {
          throw SingularDerivativeError(
              "arcsin derivative singular: |c_r entry| = 1");
        }
        const double aii = stats.a_diag(i);
        const double ajj = stats.a_diag(j);
        const double common = aii * ajj / std::sqrt(1.0 - q2);
        const double braces = hi2 * aii * aii + hj2 * ajj * ajj;
        d_re = common * (dcy.real() -
                         0.5 * stats.c_y(i, j).real() * braces);
        d_im = common * (dcy.imag() -
                         0.5 * stats.c_y(i, j).imag() * braces);
      }
      grad(i, j) = {d_re, d_im};
      grad(j, i) = std::conj(grad(i, j));
    }
  }
  return grad;  // diagonal stays exactly zero
}

double d_constraint(int k_bar, [[maybe_unused]] int k,
                    const ChannelSet& channels, const SystemStatistics& stats,
                    const Eigen::VectorXd& da_k, const Eigen::MatrixXcd& dcr_k,
                    const CrSolver& solver) {
  // k identifies the differentiation variable; the da_k/dcr_k pieces already
  // encode it, so it only documents the call site.
  const Eigen::VectorXcd ah = diag_scale(stats.a_diag, channels.h.col(k_bar));
  const Eigen::VectorXcd v = solver.solve(ah);  // c_r^{-1} A h_kbar
  const Eigen::VectorXcd dah = diag_scale(da_k, channels.h.col(k_bar));
  const double term1 = 2.0 * dah.dot(v).real();
  const double term2 = v.dot(dcr_k * v).real();
  return term1 - term2;
}

GradientBundle compute_gradient_bundle(const ChannelSet& channels,
                                       const OperatingPoint& point,
                                       const SystemStatistics& stats,
                                       const Eigen::VectorXd& duals) {
  const int num_ues = channels.num_ues();
  const int n = channels.total_antennas();
  CrSolver solver(stats.c_r);

  GradientBundle bundle;
  bundle.da_drho.resize(n, num_ues);
  bundle.dcr_drho.resize(num_ues);
  bundle.dconstraint.resize(num_ues, num_ues);
  bundle.constraint_values.resize(num_ues);
  bundle.dl_drho.resize(num_ues);

  // v_kbar = c_r^{-1} A h_kbar is shared by every derivative column.
  std::vector<Eigen::VectorXcd> ah(num_ues);
  std::vector<Eigen::VectorXcd> v(num_ues);
  for (int kb = 0; kb < num_ues; ++kb) {
    ah[kb] = diag_scale(stats.a_diag, channels.h.col(kb));
    v[kb] = solver.solve(ah[kb]);
    bundle.constraint_values(kb) = ah[kb].dot(v[kb]).real();
  }

  for (int k = 0; k < num_ues; ++k) {
    bundle.da_drho.col(k) = d_bussgang_gain(k, channels, stats);
    bundle.dcr_drho[k] = d_quantized_covariance(k, channels, stats);
    for (int kb = 0; kb < num_ues; ++kb) {
      const Eigen::VectorXcd dah =
          diag_scale(bundle.da_drho.col(k), channels.h.col(kb));
      const double term1 = 2.0 * dah.dot(v[kb]).real();
      const double term2 = v[kb].dot(bundle.dcr_drho[k] * v[kb]).real();
      bundle.dconstraint(kb, k) = term1 - term2;
    }
  }

  for (int k = 0; k < num_ues; ++k) {
    double coupled = 0.0;
    for (int kb = 0; kb < num_ues; ++kb) {
      coupled += duals(kb) * point.powers_mw(kb) * bundle.dconstraint(kb, k);
    }
    bundle.dl_drho(k) = 1.0 - duals(k) * bundle.constraint_values(k) - coupled;
  }
  return bundle;
}

Eigen::VectorXd lagrangian_gradient(const OperatingPoint& point,
                                    const Eigen::VectorXd& duals,
                                    const ChannelSet& channels,
                                    const SystemStatistics& stats) {
  for (Eigen::Index k = 0; k < duals.size(); ++k) {
    if (!(duals(k) >= 0.0)) {
      throw std::invalid_argument("lagrangian_gradient: duals must be >= 0");
    }
  }
  return compute_gradient_bundle(channels, point, stats, duals).dl_drho;
}

FiniteDifferenceReport finite_difference_check(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& powers_mw, int k, double analytic) {
  FiniteDifferenceReport report;
  report.analytic = analytic;
  const double h = std::max(1e-6 * powers_mw(k), 1e-9);
  report.step = h;

  Eigen::VectorXd p = powers_mw;
  if (powers_mw(k) - h >= 0.0) {
    p(k) = powers_mw(k) + h;
    const double fp = f(p);
    p(k) = powers_mw(k) - h;
    const double fm = f(p);
    report.numeric = (fp - fm) / (2.0 * h);
  } else {
    // Second-order one-sided stencil for the rho_k = 0 boundary.
    const double f0 = f(powers_mw);
    p(k) = powers_mw(k) + h;
    const double f1 = f(p);
    p(k) = powers_mw(k) + 2.0 * h;
    const double f2 = f(p);
    report.numeric = (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h);
  }

  report.abs_error = std::abs(report.numeric - report.analytic);
  const double scale =
      std::max(std::abs(report.analytic), std::abs(report.numeric));
  report.rel_error = scale > 0.0 ? report.abs_error / scale : 0.0;
  return report;
}

}  // namespace qmimo
