// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <Eigen/Dense>

#include "qmimo/scenario.hpp"

namespace qmimo {

/// UE transmit powers and per-BS noise levels, both linear mW. Any excess of
/// a noise level above the scenario noise floor acts as Gaussian dithering.
struct OperatingPoint {
  Eigen::VectorXd powers_mw;  // length K
  Eigen::VectorXd noise_mw;   // length B
};

/// Exact second-order statistics of the 1-bit quantized system at one
/// operating point.
///
/// c_y  = sum_k rho_k h_k h_k^H + blockdiag(sigma_b^2 I_M)
/// a    = sqrt(2/pi) diag(c_y)^(-1/2)            (Bussgang gain, diagonal)
/// c_r  = (2/pi) [asin(Re) + j asin(Im)] of the diag-normalized c_y
/// c_q  = c_r - A c_y A                          (distortion covariance)
struct SystemStatistics {
  Eigen::MatrixXcd c_y;
  Eigen::VectorXd a_diag;
  Eigen::MatrixXcd c_r;
  Eigen::MatrixXcd c_q;
};

/// MMSE combining vectors, column k = sqrt(rho_k) c_r^{-1} A h_k.
struct CombinerSet {
  Eigen::MatrixXcd w;  // (B*M) x K
};

/// Complex sign quantizer: Q(a) = (sgn Re[a] + j sgn Im[a]) / sqrt(2),
/// with sgn(0) = +1.
Eigen::VectorXcd quantize_1bit(const Eigen::VectorXcd& samples);

SystemStatistics compute_statistics(const ChannelSet& channels,
                                    const OperatingPoint& point);

/// Hermitian positive-definite solver for c_r with a one-shot diagonal
/// jitter fallback (1e-12 * trace / n), after which failure is terminal.
class CrSolver {
 public:
  explicit CrSolver(const Eigen::MatrixXcd& c_r);

  Eigen::VectorXcd solve(const Eigen::VectorXcd& rhs) const;
  Eigen::MatrixXcd solve(const Eigen::MatrixXcd& rhs) const;
  bool jitter_applied() const { return jitter_applied_; }

 private:
  Eigen::LLT<Eigen::MatrixXcd> llt_;
  bool jitter_applied_ = false;
};

CombinerSet mmse_combiners(const ChannelSet& channels,
                           const OperatingPoint& point,
                           const SystemStatistics& stats);

/// SINDR of UE k for an arbitrary nonzero combiner, evaluated from the
/// four-term ratio (signal / interference + noise-through-A + distortion).
double sindr_general(int k, const Eigen::VectorXcd& w,
                     const ChannelSet& channels, const OperatingPoint& point,
                     const SystemStatistics& stats);

/// Closed-form SINDR of UE k under MMSE combining: x / (1 - x) with
/// x = rho_k h_k^H A c_r^{-1} A h_k. x is physically confined to [0, 1);
/// values within 1e-9 above 1 are clamped, larger ones raise an error, and
/// x within 1e-9 below 1 reports the capped value 1e12.
double sindr_closed_form(int k, const ChannelSet& channels,
                         const OperatingPoint& point,
                         const SystemStatistics& stats);

/// MSE of UE k under MMSE combining, 1 - x. Satisfies
/// sindr = (1 - mse) / mse.
double mse(int k, const ChannelSet& channels, const OperatingPoint& point,
           const SystemStatistics& stats);

/// MSE of an arbitrary combiner: w^H c_r w - 2 sqrt(rho_k) Re[w^H A h_k] + 1.
double mse_of_combiner(int k, const Eigen::VectorXcd& w,
                       const ChannelSet& channels, const OperatingPoint& point,
                       const SystemStatistics& stats);

// Batch evaluation helpers used by the solvers: one factorization of c_r
// serves all UEs.

struct SindrReport {
  Eigen::VectorXd x;      // rho_k h_k^H A c_r^{-1} A h_k per UE
  Eigen::VectorXd sindr;  // x / (1 - x), capped as in sindr_closed_form
};

SindrReport evaluate_sindr(const ChannelSet& channels,
                           const OperatingPoint& point);

/// SINDR of a single UE only (one factorization, one solve).
double evaluate_sindr_single(const ChannelSet& channels,
                             const OperatingPoint& point, int k);

/// Constraint value f_k = h_k^H A c_r^{-1} A h_k (so x_k = rho_k f_k).
double constraint_value(int k, const ChannelSet& channels,
                        const SystemStatistics& stats, const CrSolver& solver);

double sindr_from_x(double x);

/// Plain-text dump of the statistics (17 significant digits, row-major,
/// header carrying B/M/K) for cross-language comparison.
void write_statistics_dump(const SystemStatistics& stats, int num_bs,
                           int antennas_per_bs, int num_ues,
                           const std::string& path);

}  // namespace qmimo
