// SPDX-License-Identifier: Apache-2.0
#include "qmimo/bussgang.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "qmimo/errors.hpp"

namespace qmimo {

namespace {

constexpr double kTwoOverPi = 2.0 / M_PI;
constexpr double kArcsinClampTol = 1e-12;
constexpr double kXUpperTol = 1e-9;
constexpr double kSindrCap = 1e12;

inline double sgn_pos(double v) { return v >= 0.0 ? 1.0 : -1.0; }

// Applies the (real, diagonal) Bussgang gain to a complex vector.
inline Eigen::VectorXcd diag_scale(const Eigen::VectorXd& a,
                                   const Eigen::VectorXcd& v) {
  Eigen::VectorXcd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out(i) = a(i) * v(i);
  }
  return out;
}

// Clamp an arcsin argument to [-1, 1]; violations beyond the tolerance are
// internal errors, not input errors.
inline double clamp_unit(double u) {
  if (u > 1.0) {
    if (u > 1.0 + kArcsinClampTol) {
      throw InternalConsistencyError(
          "arcsin argument " + std::to_string(u) + " exceeds 1");
    }
    return 1.0;
  }
  if (u < -1.0) {
    if (u < -1.0 - kArcsinClampTol) {
      throw InternalConsistencyError(
          "arcsin argument " + std::to_string(u) + " below -1");
    }
    return -1.0;
  }
  return u;
}

void check_point(const ChannelSet& channels, const OperatingPoint& point) {
  if (point.powers_mw.size() != channels.num_ues()) {
    throw std::invalid_argument("operating point: power count " +
                                std::to_string(point.powers_mw.size()) +
                                " does not match UE count " +
                                std::to_string(channels.num_ues()));
  }
  if (point.noise_mw.size() != channels.num_bs()) {
    throw std::invalid_argument("operating point: noise count does not match "
                                "BS count");
  }
  for (Eigen::Index k = 0; k < point.powers_mw.size(); ++k) {
    if (!(point.powers_mw(k) >= 0.0) || !std::isfinite(point.powers_mw(k))) {
      throw std::invalid_argument("operating point: power of UE " +
                                  std::to_string(k) + " must be >= 0");
    }
  }
  for (Eigen::Index b = 0; b < point.noise_mw.size(); ++b) {
    if (!(point.noise_mw(b) > 0.0) || !std::isfinite(point.noise_mw(b))) {
      throw std::invalid_argument("operating point: noise level of BS " +
                                  std::to_string(b) + " must be > 0");
    }
  }
}

}  // namespace

Eigen::VectorXcd quantize_1bit(const Eigen::VectorXcd& samples) {
  const double amp = 1.0 / std::sqrt(2.0);
  Eigen::VectorXcd out(samples.size());
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    out(i) = {amp * sgn_pos(samples(i).real()),
              amp * sgn_pos(samples(i).imag())};
  }
  return out;
}

SystemStatistics compute_statistics(const ChannelSet& channels,
                                    const OperatingPoint& point) {
  check_point(channels, point);
  const int n = channels.total_antennas();
  const int num_ues = channels.num_ues();
  const int m = channels.antennas_per_bs;

  SystemStatistics stats;
  stats.c_y = Eigen::MatrixXcd::Zero(n, n);
  if (num_ues > 0) {
    const Eigen::MatrixXcd scaled =
        channels.h * point.powers_mw.cwiseSqrt().asDiagonal();
    stats.c_y.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
    stats.c_y = stats.c_y.selfadjointView<Eigen::Lower>();
  }
  for (int b = 0; b < channels.num_bs(); ++b) {
    for (int i = 0; i < m; ++i) {
      auto& d = stats.c_y(b * m + i, b * m + i);
      d = std::complex<double>(d.real() + point.noise_mw(b), 0.0);
    }
  }

  stats.a_diag.resize(n);
  for (int i = 0; i < n; ++i) {
    const double cii = stats.c_y(i, i).real();
    if (!(cii > 0.0)) {
      throw InternalConsistencyError("c_y diagonal must be positive");
    }
    stats.a_diag(i) = std::sqrt(kTwoOverPi / cii);
  }

  // Arcsin law on the diagonal-normalized real and imaginary parts. The
  // unit diagonal of c_r is exact: asin(1) * 2/pi == 1.
  stats.c_r.resize(n, n);
  for (int i = 0; i < n; ++i) {
    stats.c_r(i, i) = 1.0;
    const double cii = stats.c_y(i, i).real();
    for (int j = 0; j < i; ++j) {
      const double cjj = stats.c_y(j, j).real();
      const double inv_scale = 1.0 / std::sqrt(cii * cjj);
      const double u_re = clamp_unit(stats.c_y(i, j).real() * inv_scale);
      const double u_im = clamp_unit(stats.c_y(i, j).imag() * inv_scale);
      const std::complex<double> value(kTwoOverPi * std::asin(u_re),
                                       kTwoOverPi * std::asin(u_im));
      stats.c_r(i, j) = value;
      stats.c_r(j, i) = std::conj(value);
    }
  }

  stats.c_q.resize(n, n);
  for (int i = 0; i < n; ++i) {
    stats.c_q(i, i) = 1.0 - stats.a_diag(i) * stats.a_diag(i) *
                                stats.c_y(i, i).real();
    for (int j = 0; j < i; ++j) {
      const std::complex<double> value =
          stats.c_r(i, j) -
          stats.a_diag(i) * stats.a_diag(j) * stats.c_y(i, j);
      stats.c_q(i, j) = value;
      stats.c_q(j, i) = std::conj(value);
    }
  }
  return stats;
}

CrSolver::CrSolver(const Eigen::MatrixXcd& c_r) {
  llt_.compute(c_r);
  if (llt_.info() != Eigen::Success) {
    const double jitter =
        1e-12 * c_r.real().trace() / static_cast<double>(c_r.rows());
    Eigen::MatrixXcd bumped = c_r;
    bumped.diagonal().array() += jitter;
    llt_.compute(bumped);
    jitter_applied_ = true;
    if (llt_.info() != Eigen::Success) {
      throw SingularMatrixError(
          "quantized covariance is singular even after diagonal jitter");
    }
  }
}

Eigen::VectorXcd CrSolver::solve(const Eigen::VectorXcd& rhs) const {
  return llt_.solve(rhs);
}

Eigen::MatrixXcd CrSolver::solve(const Eigen::MatrixXcd& rhs) const {
  return llt_.solve(rhs);
}

CombinerSet mmse_combiners(const ChannelSet& channels,
                           const OperatingPoint& point,
                           const SystemStatistics& stats) {
  check_point(channels, point);
  const int n = channels.total_antennas();
  const int num_ues = channels.num_ues();
  CrSolver solver(stats.c_r);

  CombinerSet combiners;
  combiners.w.resize(n, num_ues);
  for (int k = 0; k < num_ues; ++k) {
    const Eigen::VectorXcd rhs =
        std::sqrt(point.powers_mw(k)) *
        diag_scale(stats.a_diag, channels.h.col(k));
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) {
      combiners.w.col(k).setZero();
      continue;
    }
    Eigen::VectorXcd w = solver.solve(rhs);
    // One step of iterative refinement keeps the relative residual at the
    // contract level even when the jitter fallback fired.
    Eigen::VectorXcd residual = rhs - stats.c_r * w;
    w += solver.solve(residual);
    residual = rhs - stats.c_r * w;
    if (residual.norm() > 1e-10 * rhs_norm) {
      throw SingularMatrixError("MMSE combiner solve residual " +
                                std::to_string(residual.norm() / rhs_norm) +
                                " exceeds 1e-10");
    }
    combiners.w.col(k) = w;
  }
  return combiners;
}

double sindr_general(int k, const Eigen::VectorXcd& w,
                     const ChannelSet& channels, const OperatingPoint& point,
                     const SystemStatistics& stats) {
  check_point(channels, point);
  if (w.norm() == 0.0) {
    throw std::invalid_argument("sindr_general: combiner must be nonzero");
  }
  const int m = channels.antennas_per_bs;
  const Eigen::VectorXcd wa = diag_scale(stats.a_diag, w.conjugate());

  double signal = 0.0;
  double interference = 0.0;
  for (int j = 0; j < channels.num_ues(); ++j) {
    const double gain =
        std::norm(wa.cwiseProduct(channels.h.col(j)).sum());
    if (j == k) {
      signal = point.powers_mw(j) * gain;
    } else {
      interference += point.powers_mw(j) * gain;
    }
  }

  double awgn = 0.0;
  for (int i = 0; i < channels.total_antennas(); ++i) {
    awgn += std::norm(wa(i)) * point.noise_mw(i / m);
  }

  const double distortion = w.dot(stats.c_q * w).real();
  const double denom = interference + awgn + distortion;
  if (!(denom > 0.0)) {
    throw InternalConsistencyError("sindr_general: non-positive denominator");
  }
  return signal / denom;
}

double sindr_from_x(double x) {
  if (x > 1.0 + kXUpperTol) {
    throw InternalConsistencyError(
        "constraint value x = " + std::to_string(x) +
        " violates the physical bound x < 1");
  }
  if (x >= 1.0 - kXUpperTol) {
    return kSindrCap;  // cannot occur physically; keeps comparisons total
  }
  if (x < 0.0) {
    x = 0.0;
  }
  return x / (1.0 - x);
}

double constraint_value(int k, const ChannelSet& channels,
                        const SystemStatistics& stats,
                        const CrSolver& solver) {
  const Eigen::VectorXcd ah = diag_scale(stats.a_diag, channels.h.col(k));
  const Eigen::VectorXcd v = solver.solve(ah);
  return ah.dot(v).real();
}

double sindr_closed_form(int k, const ChannelSet& channels,
                         const OperatingPoint& point,
                         const SystemStatistics& stats) {
  check_point(channels, point);
  CrSolver solver(stats.c_r);
  const double x =
      point.powers_mw(k) * constraint_value(k, channels, stats, solver);
  return sindr_from_x(x);
}

double mse(int k, const ChannelSet& channels, const OperatingPoint& point,
           const SystemStatistics& stats) {
  check_point(channels, point);
  CrSolver solver(stats.c_r);
  const double x =
      point.powers_mw(k) * constraint_value(k, channels, stats, solver);
  if (x > 1.0 + kXUpperTol) {
    throw InternalConsistencyError("mse: constraint value exceeds 1");
  }
  return std::max(1.0 - x, std::numeric_limits<double>::min());
}

double mse_of_combiner(int k, const Eigen::VectorXcd& w,
                       const ChannelSet& channels, const OperatingPoint& point,
                       const SystemStatistics& stats) {
  check_point(channels, point);
  const Eigen::VectorXcd ah = diag_scale(stats.a_diag, channels.h.col(k));
  const double quad = w.dot(stats.c_r * w).real();
  const double cross = w.dot(ah).real();
  return quad - 2.0 * std::sqrt(point.powers_mw(k)) * cross + 1.0;
}

SindrReport evaluate_sindr(const ChannelSet& channels,
                           const OperatingPoint& point) {
  const SystemStatistics stats = compute_statistics(channels, point);
  CrSolver solver(stats.c_r);
  const int num_ues = channels.num_ues();
  SindrReport report;
  report.x.resize(num_ues);
  report.sindr.resize(num_ues);
  for (int k = 0; k < num_ues; ++k) {
    report.x(k) =
        point.powers_mw(k) * constraint_value(k, channels, stats, solver);
    report.sindr(k) = sindr_from_x(report.x(k));
  }
  return report;
}

double evaluate_sindr_single(const ChannelSet& channels,
                             const OperatingPoint& point, int k) {
  const SystemStatistics stats = compute_statistics(channels, point);
  CrSolver solver(stats.c_r);
  const double x =
      point.powers_mw(k) * constraint_value(k, channels, stats, solver);
  return sindr_from_x(x);
}

namespace {

void write_matrix(std::ofstream& out, const char* name,
                  const Eigen::MatrixXcd& mat) {
  out << "# matrix " << name << " rows " << mat.rows() << " cols "
      << mat.cols() << " layout row-major complex (re im)\n";
  char buf[64];
  for (Eigen::Index i = 0; i < mat.rows(); ++i) {
    for (Eigen::Index j = 0; j < mat.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g %.17g", mat(i, j).real(),
                    mat(i, j).imag());
      out << buf << (j + 1 == mat.cols() ? "\n" : " ");
    }
  }
}

}  // namespace

void write_statistics_dump(const SystemStatistics& stats, int num_bs,
                           int antennas_per_bs, int num_ues,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot open statistics dump path '" + path + "'");
  }
  out << "# qmimo statistics dump\n";
  out << "# B " << num_bs << "\n";
  out << "# M " << antennas_per_bs << "\n";
  out << "# K " << num_ues << "\n";
  out << "# BM " << stats.c_y.rows() << "\n";
  write_matrix(out, "c_y", stats.c_y);
  out << "# vector a_diag length " << stats.a_diag.size() << "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < stats.a_diag.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", stats.a_diag(i));
    out << buf << "\n";
  }
  write_matrix(out, "c_r", stats.c_r);
  write_matrix(out, "c_q", stats.c_q);
  if (!out) {
    throw ConfigError("failed writing statistics dump to '" + path + "'");
  }
}

}  // namespace qmimo
