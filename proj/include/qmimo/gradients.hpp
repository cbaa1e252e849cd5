// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include <Eigen/Dense>

#include "qmimo/bussgang.hpp"
#include "qmimo/scenario.hpp"

namespace qmimo {

/// Which correlation enters the arcsin-derivative factor 1/sqrt(1 - u^2).
///
/// NormalizedInput uses the diag-normalized entry of c_y (the actual arcsin
/// argument, which is what the finite-difference oracle confirms).
/// QuantizedOutputEntry instead plugs in the c_r entry together with a 1/2
/// coefficient on the diagonal-scaling term; it is retained only so tests
/// can demonstrate the two readings differ.
enum class ArcsinDerivativeFactor { NormalizedInput, QuantizedOutputEntry };

/// d a_diag / d rho_k, entry i: -sqrt(1/(2 pi)) c_y(i,i)^{-3/2} |h_k(i)|^2.
Eigen::VectorXd d_bussgang_gain(int k, const ChannelSet& channels,
                                const SystemStatistics& stats);

/// d c_r / d rho_k. Hermitian with an exactly zero diagonal.
Eigen::MatrixXcd d_quantized_covariance(
    int k, const ChannelSet& channels, const SystemStatistics& stats,
    ArcsinDerivativeFactor factor = ArcsinDerivativeFactor::NormalizedInput);

/// d (h_kbar^H A c_r^{-1} A h_kbar) / d rho_k from the assembled pieces:
/// 2 Re[h^H (dA) c_r^{-1} A h] - h^H A c_r^{-1} (dC_r) c_r^{-1} A h.
double d_constraint(int k_bar, int k, const ChannelSet& channels,
                    const SystemStatistics& stats, const Eigen::VectorXd& da_k,
                    const Eigen::MatrixXcd& dcr_k, const CrSolver& solver);

/// Gradient of the min-power Lagrangian:
/// dL/d rho_k = 1 - mu_k f_k - sum_kbar mu_kbar rho_kbar d f_kbar / d rho_k.
Eigen::VectorXd lagrangian_gradient(const OperatingPoint& point,
                                    const Eigen::VectorXd& duals,
                                    const ChannelSet& channels,
                                    const SystemStatistics& stats);

/// All per-UE derivative objects at one operating point.
struct GradientBundle {
  Eigen::MatrixXd da_drho;                 // (B*M) x K, column k = dA/drho_k
  std::vector<Eigen::MatrixXcd> dcr_drho;  // K matrices
  Eigen::MatrixXd dconstraint;             // (k_bar, k) = d f_kbar / d rho_k
  Eigen::VectorXd constraint_values;       // f_k
  Eigen::VectorXd dl_drho;                 // Lagrangian gradient
};

GradientBundle compute_gradient_bundle(const ChannelSet& channels,
                                       const OperatingPoint& point,
                                       const SystemStatistics& stats,
                                       const Eigen::VectorXd& duals);

struct FiniteDifferenceReport {
  double analytic = 0.0;
  double numeric = 0.0;
  double abs_error = 0.0;
  double rel_error = 0.0;  // vs max(|analytic|, |numeric|)
  double step = 0.0;
};

/// Central difference of a scalar function of the power vector with step
/// h = max(1e-6 rho_k, 1e-9 mW); falls back to a second-order one-sided
/// stencil at the rho_k = 0 boundary.
FiniteDifferenceReport finite_difference_check(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& powers_mw, int k, double analytic);

}  // namespace qmimo
