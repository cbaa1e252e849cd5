// SPDX-License-Identifier: Apache-2.0
#include "qmimo/montecarlo.hpp"

#include <cmath>
#include <vector>

#include "qmimo/parallel.hpp"
#include "qmimo/rng.hpp"

namespace qmimo {

namespace {

constexpr std::uint64_t kDomainMonteCarlo = 0x3C0FULL;
constexpr long long kChunkSize = 1 << 16;

struct MomentSums {
  // Means and mean-squares of Re/Im per entry, accumulated as plain sums.
  Eigen::MatrixXcd rr, ry, qy;
  Eigen::MatrixXd rr_re2, rr_im2, ry_re2, ry_im2, qy_re2, qy_im2;

  explicit MomentSums(int n)
      : rr(Eigen::MatrixXcd::Zero(n, n)),
        ry(Eigen::MatrixXcd::Zero(n, n)),
        qy(Eigen::MatrixXcd::Zero(n, n)),
        rr_re2(Eigen::MatrixXd::Zero(n, n)),
        rr_im2(Eigen::MatrixXd::Zero(n, n)),
        ry_re2(Eigen::MatrixXd::Zero(n, n)),
        ry_im2(Eigen::MatrixXd::Zero(n, n)),
        qy_re2(Eigen::MatrixXd::Zero(n, n)),
        qy_im2(Eigen::MatrixXd::Zero(n, n)) {}

  void absorb(const MomentSums& other) {
    rr += other.rr;
    ry += other.ry;
    qy += other.qy;
    rr_re2 += other.rr_re2;
    rr_im2 += other.rr_im2;
    ry_re2 += other.ry_re2;
    ry_im2 += other.ry_im2;
    qy_re2 += other.qy_re2;
    qy_im2 += other.qy_im2;
  }
};

inline void accumulate_outer(const Eigen::VectorXcd& a,
                             const Eigen::VectorXcd& b, Eigen::MatrixXcd& mean,
                             Eigen::MatrixXd& re2, Eigen::MatrixXd& im2) {
  const int n = static_cast<int>(a.size());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const std::complex<double> value = a(i) * std::conj(b(j));
      mean(i, j) += value;
      re2(i, j) += value.real() * value.real();
      im2(i, j) += value.imag() * value.imag();
    }
  }
}

}  // namespace

MonteCarloMoments estimate_quantized_moments(const ChannelSet& channels,
                                             const OperatingPoint& point,
                                             const Eigen::VectorXd& a_diag,
                                             long long draws,
                                             std::uint64_t seed) {
  const int n = channels.total_antennas();
  const int num_ues = channels.num_ues();
  const int m = channels.antennas_per_bs;
  const long long num_chunks = (draws + kChunkSize - 1) / kChunkSize;

  const Eigen::VectorXd amp = point.powers_mw.cwiseSqrt();
  std::vector<MomentSums> partial(static_cast<std::size_t>(num_chunks),
                                  MomentSums(n));

  parallel_for(static_cast<std::size_t>(num_chunks), [&](std::size_t chunk) {
    SplitRng rng(seed, {kDomainMonteCarlo, static_cast<std::uint64_t>(chunk)});
    MomentSums& sums = partial[chunk];
    const long long begin = static_cast<long long>(chunk) * kChunkSize;
    const long long count = std::min<long long>(kChunkSize, draws - begin);
    Eigen::VectorXcd y(n);
    Eigen::VectorXcd q(n);
    for (long long d = 0; d < count; ++d) {
      y.setZero();
      for (int k = 0; k < num_ues; ++k) {
        const std::complex<double> symbol = rng.next_cgaussian(1.0);
        y += (amp(k) * symbol) * channels.h.col(k);
      }
      for (int b = 0; b < channels.num_bs(); ++b) {
        for (int i = 0; i < m; ++i) {
          y(b * m + i) += rng.next_cgaussian(point.noise_mw(b));
        }
      }
      const Eigen::VectorXcd r = quantize_1bit(y);
      for (int i = 0; i < n; ++i) {
        q(i) = r(i) - a_diag(i) * y(i);
      }
      accumulate_outer(r, r, sums.rr, sums.rr_re2, sums.rr_im2);
      accumulate_outer(r, y, sums.ry, sums.ry_re2, sums.ry_im2);
      accumulate_outer(q, y, sums.qy, sums.qy_re2, sums.qy_im2);
    }
  });

  MomentSums total(n);
  for (const auto& sums : partial) {
    total.absorb(sums);
  }

  const double count = static_cast<double>(draws);
  const double inv = 1.0 / count;
  MonteCarloMoments moments;
  moments.draws = draws;
  // Divide rather than multiply by the reciprocal: constant samples (for
  // example |r|^2 = 1) must average to the constant exactly.
  moments.e_rr = total.rr / count;
  moments.e_ry = total.ry / count;
  moments.e_qy = total.qy / count;

  auto standard_error = [&](const Eigen::MatrixXd& sum_sq,
                            const Eigen::MatrixXd& mean) {
    // se = sqrt(max(E[X^2] - E[X]^2, 0) / draws)
    return ((sum_sq * inv - mean.cwiseProduct(mean)).cwiseMax(0.0) * inv)
        .cwiseSqrt();
  };
  moments.se_rr_re = standard_error(total.rr_re2, moments.e_rr.real());
  moments.se_rr_im = standard_error(total.rr_im2, moments.e_rr.imag());
  moments.se_ry_re = standard_error(total.ry_re2, moments.e_ry.real());
  moments.se_ry_im = standard_error(total.ry_im2, moments.e_ry.imag());
  moments.se_qy_re = standard_error(total.qy_re2, moments.e_qy.real());
  moments.se_qy_im = standard_error(total.qy_im2, moments.e_qy.imag());
  return moments;
}

double max_error_over_4se(const Eigen::MatrixXcd& empirical,
                          const Eigen::MatrixXcd& reference,
                          const Eigen::MatrixXd& se_re,
                          const Eigen::MatrixXd& se_im, double abs_floor) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < empirical.rows(); ++i) {
    for (Eigen::Index j = 0; j < empirical.cols(); ++j) {
      const double err_re =
          std::abs(empirical(i, j).real() - reference(i, j).real());
      const double err_im =
          std::abs(empirical(i, j).imag() - reference(i, j).imag());
      worst = std::max(worst, err_re / (4.0 * se_re(i, j) + abs_floor));
      worst = std::max(worst, err_im / (4.0 * se_im(i, j) + abs_floor));
    }
  }
  return worst;
}

}  // namespace qmimo
