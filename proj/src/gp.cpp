#include "gpc/gp.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace gpc {

namespace {

constexpr double kNegligible = 1e-150;

// Smallest accepted squared Cholesky pivot. The Gram diagonal is 1 + noise,
// so this is relative to unit scale.
constexpr double kMinSquaredPivot = 1e-14;

bool factorize(Eigen::MatrixXd k, double noise, Eigen::MatrixXd& l) {
  k.diagonal().array() += noise;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) return false;
  l = llt.matrixL();
  return l.diagonal().array().square().minCoeff() >= kMinSquaredPivot;
}

std::vector<double> toVector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

nlohmann::json matrixToJson(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows.push_back(toVector(m.row(i).transpose()));
  }
  return rows;
}

Eigen::MatrixXd matrixFromJson(const nlohmann::json& rows, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto& row = rows.at(i);
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw DimensionMismatch("model file has a ragged matrix");
    }
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = row.at(j).get<double>();
  }
  return m;
}

Eigen::VectorXd vectorFromJson(const nlohmann::json& values) {
  const auto v = values.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

RbfHyperparams RbfHyperparams::isotropic(Eigen::Index dimension, double length_scale,
                                         double noise) {
  return {Eigen::VectorXd::Constant(dimension, length_scale), noise};
}

void RbfHyperparams::validate(Eigen::Index dimension) const {
  if (length_scales.size() != dimension) {
    throw DimensionMismatch("expected " + std::to_string(dimension) + " length scales, got " +
                            std::to_string(length_scales.size()));
  }
  if (!length_scales.allFinite() || (length_scales.array() <= 0.0).any()) {
    throw ConfigError("length scales must be finite and positive");
  }
  if (!(noise >= 0.0) || !std::isfinite(noise)) {
    throw ConfigError("noise must be finite and non-negative");
  }
}

FeatureScaling FeatureScaling::identity(Eigen::Index dimension) {
  return {Eigen::RowVectorXd::Zero(dimension), Eigen::RowVectorXd::Ones(dimension)};
}

FeatureScaling FeatureScaling::fromData(const Eigen::MatrixXd& x) {
  FeatureScaling s;
  s.mean = x.colwise().mean();
  s.scale = ((x.rowwise() - s.mean).colwise().squaredNorm() / static_cast<double>(x.rows()))
                .cwiseSqrt();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
    if (!(s.scale(j) > 1e-12)) s.scale(j) = 1.0;
  }
  return s;
}

Eigen::MatrixXd FeatureScaling::apply(const Eigen::MatrixXd& x) const {
  return (x.rowwise() - mean).array().rowwise() / scale.array();
}

Eigen::VectorXd FeatureScaling::apply(const Eigen::VectorXd& x) const {
  return (x - mean.transpose()).cwiseQuotient(scale.transpose());
}

GpModel GpModel::fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const RbfHyperparams& h,
                     const GpFitOptions& options) {
  if (x.rows() < 1) throw DimensionMismatch("a GP needs at least one training point");
  if (x.rows() != y.rows()) {
    throw DimensionMismatch("feature and target row counts differ");
  }
  if (!x.allFinite() || !y.allFinite()) {
    throw DimensionMismatch("training data contains non-finite values");
  }
  h.validate(x.cols());
  FeatureScaling scaling =
      options.standardize ? FeatureScaling::fromData(x) : FeatureScaling::identity(x.cols());
  return build(x, y, h, std::move(scaling), options);
}

GpModel GpModel::build(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const RbfHyperparams& h,
                       FeatureScaling scaling, const GpFitOptions& options) {
  GpModel m;
  m.x_ = x;
  m.y_ = y;
  m.h_ = h;
  m.scaling_ = std::move(scaling);
  m.x_scaled_ = m.scaling_.apply(x);
  m.points_ = (m.x_scaled_.array().rowwise() / h.length_scales.transpose().array())
                  .matrix()
                  .transpose();

  const Eigen::MatrixXd k = gramMatrix(m.x_scaled_, m.x_scaled_, h.length_scales);
  double noise = h.noise;
  while (!factorize(k, noise, m.l_)) {
    if (noise == 0.0 || noise * options.jitter_growth > options.jitter_cap) {
      throw NotPositiveDefinite("Gram matrix is not positive definite at noise " +
                                std::to_string(noise));
    }
    noise *= options.jitter_growth;
  }
  m.noise_used_ = noise;
  m.alpha_ = m.l_.triangularView<Eigen::Lower>().solve(y);
  m.l_.triangularView<Eigen::Lower>().transpose().solveInPlace(m.alpha_);
  // Entries this small only matter as a source of subnormal products in the
  // variance solve, which are very slow on common hardware.
  m.l_ = (m.l_.array().abs() < kNegligible).select(0.0, m.l_);
  return m;
}

GpPrediction GpModel::predict(const Eigen::VectorXd& x_star) const {
  if (x_star.size() != inputDimension()) {
    throw DimensionMismatch("query has " + std::to_string(x_star.size()) + " features, model " +
                            std::to_string(inputDimension()));
  }
  const Eigen::VectorXd q = scaling_.apply(x_star).cwiseQuotient(h_.length_scales);
  // Column by column: no n x d temporaries on the query path.
  Eigen::VectorXd k_star(points_.cols());
  for (Eigen::Index i = 0; i < points_.cols(); ++i) {
    // Cut off at kNegligible (exp(-345) ~ 1e-150) so that the triangular
    // solve below never multiplies two tiny numbers into a subnormal.
    const double e = 0.5 * (points_.col(i) - q).squaredNorm();
    k_star(i) = e < 345.0 ? std::exp(-e) : 0.0;
  }
  GpPrediction p;
  p.mean = alpha_.transpose() * k_star;
  const Eigen::VectorXd v = l_.triangularView<Eigen::Lower>().solve(k_star);
  p.variance = std::max(0.0, 1.0 - v.squaredNorm());
  return p;
}

double GpModel::logMarginalLikelihood() const {
  const double n = static_cast<double>(size());
  const double m = static_cast<double>(outputDimension());
  const double fit_term = -0.5 * y_.cwiseProduct(alpha_).sum();
  const double complexity = -m * l_.diagonal().array().log().sum();
  return fit_term + complexity - 0.5 * n * m * std::log(2.0 * std::numbers::pi);
}

Eigen::VectorXd GpModel::inputLengthScales() const {
  return h_.length_scales.cwiseProduct(scaling_.scale.transpose());
}

std::string GpModel::toJson() const {
  nlohmann::json j;
  j["format"] = "gpclab-gp";
  j["version"] = 1;
  j["input_dimension"] = inputDimension();
  j["output_dimension"] = outputDimension();
  j["length_scales"] = toVector(h_.length_scales);
  j["noise"] = h_.noise;
  j["effective_noise"] = noise_used_;
  j["feature_mean"] = toVector(scaling_.mean.transpose());
  j["feature_scale"] = toVector(scaling_.scale.transpose());
  j["inputs"] = matrixToJson(x_);
  j["targets"] = matrixToJson(y_);
  return j.dump();
}

GpModel GpModel::fromJson(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed model file: ") + e.what());
  }
  if (j.value("format", "") != "gpclab-gp") throw IoError("not a GP model file");
  try {
    const auto d = j.at("input_dimension").get<Eigen::Index>();
    const auto m = j.at("output_dimension").get<Eigen::Index>();
    RbfHyperparams h{vectorFromJson(j.at("length_scales")), j.at("noise").get<double>()};
    h.validate(d);
    FeatureScaling scaling{vectorFromJson(j.at("feature_mean")).transpose(),
                           vectorFromJson(j.at("feature_scale")).transpose()};
    if (scaling.mean.size() != d || scaling.scale.size() != d) {
      throw DimensionMismatch("model file normalization has the wrong size");
    }
    const Eigen::MatrixXd x = matrixFromJson(j.at("inputs"), d);
    const Eigen::MatrixXd y = matrixFromJson(j.at("targets"), m);
    if (x.rows() < 1 || x.rows() != y.rows()) {
      throw DimensionMismatch("model file inputs and targets disagree");
    }
    // Refactorize at the noise that succeeded when the model was trained.
    const double noise = j.at("effective_noise").get<double>();
    GpFitOptions options;
    options.jitter_cap = noise;
    GpModel model =
        build(x, y, RbfHyperparams{h.length_scales, noise}, std::move(scaling), options);
    model.h_.noise = h.noise;
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("incomplete model file: ") + e.what());
  }
}

void GpModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file " + path.string());
  out << toJson() << '\n';
  if (!out) throw IoError("failed writing model file " + path.string());
}

GpModel GpModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read model file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return fromJson(buffer.str());
}

RbfHyperparams fitHyperparameters(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                  const RbfHyperparams& h0, const HyperparameterSearch& search,
                                  const GpFitOptions& options) {
  if (x.rows() < 1 || x.rows() != y.rows()) {
    throw DimensionMismatch("feature and target row counts differ");
  }
  h0.validate(x.cols());
  if (search.fit_noise && !(search.min_noise > 0.0 && search.min_noise <= search.max_noise)) {
    throw ConfigError("noise search needs 0 < min_noise <= max_noise");
  }
  const FeatureScaling scaling =
      options.standardize ? FeatureScaling::fromData(x) : FeatureScaling::identity(x.cols());

  std::mt19937_64 rng(search.seed);
  Eigen::MatrixXd xs = scaling.apply(x);
  Eigen::MatrixXd ys = y;
  if (search.subsample > 0 && x.rows() > search.subsample) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(search.subsample));
    std::sort(idx.begin(), idx.end());
    xs = xs(idx, Eigen::all).eval();
    ys = ys(idx, Eigen::all).eval();
  }

  // Search coordinates: log length scales, then log noise when it is free.
  const Eigen::Index d = x.cols();
  const Eigen::Index dims = d + (search.fit_noise ? 1 : 0);
  auto unpack = [&](const Eigen::VectorXd& p) {
    return RbfHyperparams{p.head(d).array().exp(),
                          search.fit_noise ? std::exp(p(d)) : h0.noise};
  };

  GpFitOptions scaled_options = options;
  scaled_options.standardize = false;
  auto objective = [&](const Eigen::VectorXd& p) {
    try {
      return GpModel::fit(xs, ys, unpack(p), scaled_options).logMarginalLikelihood();
    } catch (const NotPositiveDefinite&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  Eigen::VectorXd origin(dims);
  Eigen::VectorXd lower(dims);
  Eigen::VectorXd upper(dims);
  origin.head(d) = h0.length_scales.array().log();
  lower.head(d) = origin.head(d).array() - search.log_bound;
  upper.head(d) = origin.head(d).array() + search.log_bound;
  if (search.fit_noise) {
    lower(d) = std::log(search.min_noise);
    upper(d) = std::log(search.max_noise);
    origin(d) = std::clamp(std::log(std::max(h0.noise, search.min_noise)), lower(d), upper(d));
  }

  Eigen::VectorXd best = origin;
  double best_value = objective(best);

  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  for (int start = 0; start <= search.restarts; ++start) {
    Eigen::VectorXd current = origin;
    if (start > 0) {
      for (Eigen::Index i = 0; i < dims; ++i) {
        current(i) = std::clamp(current(i) + jitter(rng), lower(i), upper(i));
      }
    }
    double value = start == 0 ? best_value : objective(current);
    double step = search.initial_step;
    for (int sweep = 0; sweep < search.max_sweeps && step >= search.min_step; ++sweep) {
      bool improved = false;
      for (Eigen::Index i = 0; i < dims; ++i) {
        for (double direction : {1.0, -1.0}) {
          Eigen::VectorXd candidate = current;
          candidate(i) = std::clamp(candidate(i) + direction * step, lower(i), upper(i));
          if (candidate(i) == current(i)) continue;
          const double v = objective(candidate);
          if (v > value) {
            current = std::move(candidate);
            value = v;
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    if (value > best_value) {
      best_value = value;
      best = current;
    }
  }
  return unpack(best);
}

}  // namespace gpc
