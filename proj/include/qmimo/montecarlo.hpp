// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "qmimo/bussgang.hpp"
#include "qmimo/scenario.hpp"

namespace qmimo {

/// Empirical second-order moments of the quantized system, estimated from
/// Monte-Carlo draws of Gaussian symbols and noise pushed through the 1-bit
/// quantizer. Serves as the independent oracle for the arcsin law, the
/// Bussgang cross-correlation E[r y^H] = A C_y, and the uncorrelatedness of
/// the distortion q = r - A y with y.
struct MonteCarloMoments {
  Eigen::MatrixXcd e_rr;  // empirical E[r r^H]
  Eigen::MatrixXcd e_ry;  // empirical E[r y^H]
  Eigen::MatrixXcd e_qy;  // empirical E[q y^H]
  // Entrywise standard errors of the real/imaginary parts of the means.
  Eigen::MatrixXd se_rr_re, se_rr_im;
  Eigen::MatrixXd se_ry_re, se_ry_im;
  Eigen::MatrixXd se_qy_re, se_qy_im;
  long long draws = 0;
};

/// a_diag is the gain used to form q = r - A y (pass the model value, or a
/// deliberately corrupted one for negative controls). Draws are split into
/// fixed-size substream chunks and reduced in chunk order, so the result is
/// independent of the worker count.
MonteCarloMoments estimate_quantized_moments(const ChannelSet& channels,
                                             const OperatingPoint& point,
                                             const Eigen::VectorXd& a_diag,
                                             long long draws,
                                             std::uint64_t seed);

/// max over entries of |empirical - reference| / (4 se + abs_floor),
/// checking real and imaginary parts separately. Values <= 1 pass.
double max_error_over_4se(const Eigen::MatrixXcd& empirical,
                          const Eigen::MatrixXcd& reference,
                          const Eigen::MatrixXd& se_re,
                          const Eigen::MatrixXd& se_im,
                          double abs_floor = 1e-12);

}  // namespace qmimo
