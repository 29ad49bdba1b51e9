#pragma once

// Exact zero-mean Gaussian process regression with a unit-variance RBF
// kernel and one Gram matrix shared by all output columns.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "gpc/errors.hpp"

namespace gpc {

/// exp(-1/2 (x - x')^T diag(l)^-2 (x - x'))
template <typename DerivedA, typename DerivedB, typename DerivedL>
typename DerivedA::Scalar rbfKernel(const Eigen::MatrixBase<DerivedA>& x,
                                    const Eigen::MatrixBase<DerivedB>& x_prime,
                                    const Eigen::MatrixBase<DerivedL>& length_scales) {
  return std::exp(typename DerivedA::Scalar(-0.5) *
                  (x - x_prime).cwiseQuotient(length_scales).squaredNorm());
}

/// Gram matrix K_ij = k(a_i, b_j) over the rows of `a` and `b`.
template <typename DerivedA, typename DerivedB, typename DerivedL>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> gramMatrix(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
    const Eigen::MatrixBase<DerivedL>& length_scales) {
  using Scalar = typename DerivedA::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const auto inv = length_scales.cwiseInverse().transpose().eval();
  const Matrix as = (a.array().rowwise() * inv.array()).matrix();
  const Matrix bs = (b.array().rowwise() * inv.array()).matrix();
  Matrix k(as.rows(), bs.rows());
  for (Eigen::Index j = 0; j < bs.rows(); ++j) {
    k.col(j) = (Scalar(-0.5) * (as.rowwise() - bs.row(j)).rowwise().squaredNorm().array())
                   .exp()
                   .matrix();
  }
  return k;
}

struct RbfHyperparams {
  Eigen::VectorXd length_scales;  // one per feature dimension
  double noise = 1e-6;            // sigma_n^2 added to the Gram diagonal

  static RbfHyperparams isotropic(Eigen::Index dimension, double length_scale = 1.0,
                                  double noise = 1e-6);
  void validate(Eigen::Index dimension) const;
};

/// Per-dimension standardization applied to every input before the kernel.
struct FeatureScaling {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static FeatureScaling identity(Eigen::Index dimension);
  /// Column means and population standard deviations; a constant column
  /// gets unit scale.
  static FeatureScaling fromData(const Eigen::MatrixXd& x);

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
};

struct GpFitOptions {
  bool standardize = true;
  double jitter_growth = 10.0;  // noise multiplier after a failed factorization
  double jitter_cap = 1e-2;     // largest noise tried before giving up
};

struct GpPrediction {
  Eigen::VectorXd mean;  // one entry per output column
  double variance = 0.0;
};

class GpModel {
 public:
  /// Factorizes K + sigma_n^2 I on the (optionally standardized) inputs.
  /// A failed factorization multiplies the noise by `jitter_growth` until
  /// `jitter_cap` is exceeded; zero noise is never escalated.
  static GpModel fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const RbfHyperparams& h,
                     const GpFitOptions& options = {});

  GpPrediction predict(const Eigen::VectorXd& x_star) const;

  /// Sum over outputs of the per-column Gaussian log evidence.
  double logMarginalLikelihood() const;

  Eigen::Index size() const { return x_.rows(); }
  Eigen::Index inputDimension() const { return x_.cols(); }
  Eigen::Index outputDimension() const { return y_.cols(); }

  const Eigen::MatrixXd& inputs() const { return x_; }
  const Eigen::MatrixXd& targets() const { return y_; }
  const RbfHyperparams& hyperparams() const { return h_; }
  const FeatureScaling& scaling() const { return scaling_; }
  /// Noise actually used in the factorization, after any escalation.
  double effectiveNoise() const { return noise_used_; }
  const Eigen::MatrixXd& choleskyFactor() const { return l_; }
  const Eigen::MatrixXd& weights() const { return alpha_; }

  /// Length scales expressed in raw input units.
  Eigen::VectorXd inputLengthScales() const;

  std::string toJson() const;
  static GpModel fromJson(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static GpModel load(const std::filesystem::path& path);

 private:
  static GpModel build(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const RbfHyperparams& h,
                       FeatureScaling scaling, const GpFitOptions& options);

  Eigen::MatrixXd x_;
  Eigen::MatrixXd y_;
  RbfHyperparams h_;
  FeatureScaling scaling_;
  Eigen::MatrixXd x_scaled_;
  Eigen::MatrixXd points_;  // d x n, scaled inputs divided by the length scales
  double noise_used_ = 0.0;
  Eigen::MatrixXd l_;
  Eigen::MatrixXd alpha_;
};

struct HyperparameterSearch {
  int restarts = 3;          // extra random starting points besides h0
  int max_sweeps = 8;        // coordinate sweeps per start
  double initial_step = 1.0; // in log space
  double min_step = 0.05;
  double log_bound = 4.0;    // |log(l / l0)| limit around h0
  bool fit_noise = false;    // also search the noise, within [min_noise, max_noise]
  double min_noise = 1e-6;
  double max_noise = 1.0;
  Eigen::Index subsample = 500;
  std::uint64_t seed = 0;
};

/// Maximizes the log marginal likelihood over log length scales (and log
/// noise when requested) with gradient-free coordinate search from h0 and
/// seeded random restarts. The likelihood is evaluated on a seeded subsample
/// when x has more rows than `search.subsample`; on that subsample the
/// result is never worse than h0.
RbfHyperparams fitHyperparameters(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                  const RbfHyperparams& h0,
                                  const HyperparameterSearch& search = {},
                                  const GpFitOptions& options = {});

}  // namespace gpc
