#pragma once

#include "error.hpp"
#include "kernels.hpp"
#include "numeric.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace smooth_threshold {

// n observations of (x, y, z): x real, y in {-1, +1}, z in R^d.
class Dataset
{
public:
  Dataset(Vector x, Vector y, Matrix z)
    : x_(std::move(x))
    , y_(std::move(y))
    , z_(std::move(z))
  {
    detail::require(x_.size() >= 1, "dataset must contain at least one sample");
    detail::require(z_.cols() >= 1, "dataset must have at least one covariate");
    detail::require(y_.size() == x_.size() && z_.rows() == x_.size(),
                    "x, y and z must have the same number of rows");
    detail::require(x_.allFinite() && z_.allFinite(),
                    "dataset entries must be finite");
    for (Eigen::Index i = 0; i < y_.size(); ++i)
      detail::require(y_(i) == 1.0 || y_(i) == -1.0,
                      "labels must be -1 or +1 (row " + std::to_string(i) + ")");
  }

  Eigen::Index n() const { return x_.size(); }
  Eigen::Index d() const { return z_.cols(); }
  const Vector& x() const { return x_; }
  const Vector& y() const { return y_; }
  const Matrix& z() const { return z_; }

  Eigen::Index count(double label) const
  {
    return static_cast<Eigen::Index>((y_.array() == label).count());
  }

  //! Rows selected by index, in the given order.
  Dataset subset(const std::vector<Eigen::Index>& rows) const
  {
    Vector x(rows.size()), y(rows.size());
    Matrix z(rows.size(), d());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      x(r) = x_(rows[r]);
      y(r) = y_(rows[r]);
      z.row(r) = z_.row(rows[r]);
    }
    return Dataset(std::move(x), std::move(y), std::move(z));
  }

private:
  Vector x_;
  Vector y_;
  Matrix z_;
};

// Per-sample weights w_i entering the risk. The inverse-class-probability
// scheme is the plug-in version of w(y) = 1 / P(Y = y).
class WeightScheme
{
public:
  enum class Kind
  {
    unit,
    inverse_class_probability,
    per_sample
  };

  static WeightScheme unit() { return WeightScheme(Kind::unit); }

  static WeightScheme inverse_class_probability(double w_pos, double w_neg)
  {
    detail::require(std::isfinite(w_pos) && std::isfinite(w_neg) && w_pos >= 0 &&
                      w_neg >= 0,
                    "class weights must be finite and nonnegative");
    WeightScheme s(Kind::inverse_class_probability);
    s.class_weights_ = { w_pos, w_neg };
    return s;
  }

  static WeightScheme per_sample(Vector weights)
  {
    detail::require(weights.allFinite() && (weights.array() >= 0.0).all(),
                    "per-sample weights must be finite and nonnegative");
    WeightScheme s(Kind::per_sample);
    s.per_sample_ = std::move(weights);
    return s;
  }

  Kind kind() const { return kind_; }
  double positive_weight() const { return class_weights_.first; }
  double negative_weight() const { return class_weights_.second; }
  const Vector& sample_weights() const { return per_sample_; }

  //! Effective weight for every sample of `data`.
  Vector resolve(const Dataset& data) const
  {
    switch (kind_) {
      case Kind::unit:
        return Vector::Ones(data.n());
      case Kind::inverse_class_probability:
        return data.y().unaryExpr([this](double y) {
          return y > 0 ? class_weights_.first : class_weights_.second;
        });
      case Kind::per_sample:
        detail::require(per_sample_.size() == data.n(),
                        "per-sample weight count does not match the dataset");
        return per_sample_;
    }
    return Vector();
  }

  //! Same scheme with every weight multiplied by c.
  WeightScheme scaled(double c) const
  {
    WeightScheme s = *this;
    if (kind_ == Kind::unit) {
      s.kind_ = Kind::inverse_class_probability;
      s.class_weights_ = { c, c };
    } else {
      s.class_weights_ = { c * class_weights_.first, c * class_weights_.second };
      s.per_sample_ = c * per_sample_;
    }
    return s;
  }

  std::string describe() const
  {
    switch (kind_) {
      case Kind::unit:
        return "unit";
      case Kind::inverse_class_probability:
        return "inverse_class_probability";
      case Kind::per_sample:
        return "per_sample";
    }
    return "?";
  }

private:
  explicit WeightScheme(Kind kind)
    : kind_(kind)
  {}

  Kind kind_;
  std::pair<double, double> class_weights_{ 1.0, 1.0 };
  Vector per_sample_;
};

//! w(y) = n / #{i : y_i = y}; both classes must be present.
inline WeightScheme
class_weights(const Dataset& data)
{
  const auto pos = data.count(1.0);
  const auto neg = data.count(-1.0);
  if (pos == 0)
    throw InputError("class weights need both labels; class +1 is missing");
  if (neg == 0)
    throw InputError("class weights need both labels; class -1 is missing");
  const double n = static_cast<double>(data.n());
  return WeightScheme::inverse_class_probability(n / static_cast<double>(pos),
                                                 n / static_cast<double>(neg));
}

struct RiskAndGradient
{
  double risk;
  Vector gradient;
};

// The weighted smoothed empirical risk
//   R(theta) = (1/n) sum_i w_i L(y_i (x_i - theta' z_i))
// and its gradient (1/n) sum_i w_i y_i z_i K(u_i / delta) / delta.
// The dataset is shared, not copied; all sums use a fixed pairwise order so
// results are reproducible bit for bit.
class SmoothedRisk
{
public:
  SmoothedRisk(std::shared_ptr<const Dataset> data,
               SurrogateLoss loss,
               WeightScheme weights)
    : data_(std::move(data))
    , loss_(std::move(loss))
    , scheme_(std::move(weights))
  {
    detail::require(data_ != nullptr, "risk needs a dataset");
    weights_ = scheme_.resolve(*data_);
  }

  SmoothedRisk(Dataset data, SurrogateLoss loss, WeightScheme weights)
    : SmoothedRisk(std::make_shared<const Dataset>(std::move(data)),
                   std::move(loss),
                   std::move(weights))
  {}

  const Dataset& data() const { return *data_; }
  std::shared_ptr<const Dataset> shared_data() const { return data_; }
  const SurrogateLoss& loss() const { return loss_; }
  const WeightScheme& weight_scheme() const { return scheme_; }
  const Vector& weights() const { return weights_; }
  Eigen::Index dim() const { return data_->d(); }

  //! u_i = y_i (x_i - theta' z_i).
  Vector margins(const Vector& theta) const
  {
    check_dim(theta);
    Vector u = data_->x() - data_->z() * theta;
    return u.cwiseProduct(data_->y());
  }

  double risk(const Vector& theta) const { return risk_from_margins(margins(theta)); }

  Vector gradient(const Vector& theta) const
  {
    return gradient_from_margins(margins(theta));
  }

  RiskAndGradient risk_and_gradient(const Vector& theta) const
  {
    const Vector u = margins(theta);
    return { risk_from_margins(u), gradient_from_margins(u) };
  }

  double risk_from_margins(const Vector& u) const
  {
    const Eigen::Index n = u.size();
    Vector terms(n);
    const double delta = loss_.bandwidth();
    const Kernel& k = loss_.kernel();
    for (Eigen::Index i = 0; i < n; ++i)
      terms(i) = weights_(i) * k.upper_tail(u(i) / delta);
    return numeric::pairwise_sum(terms) / static_cast<double>(n);
  }

  Vector gradient_from_margins(const Vector& u) const
  {
    const Eigen::Index n = u.size();
    const double delta = loss_.bandwidth();
    const Kernel& k = loss_.kernel();
    Vector c(n);
    for (Eigen::Index i = 0; i < n; ++i)
      c(i) = weights_(i) * data_->y()(i) * k(u(i) / delta) / delta;

    // Block partial products, then a pairwise reduction over blocks.
    constexpr Eigen::Index block = 256;
    const Matrix& z = data_->z();
    std::vector<Vector> parts;
    parts.reserve(static_cast<std::size_t>((n + block - 1) / block));
    for (Eigen::Index start = 0; start < n; start += block) {
      const Eigen::Index len = std::min(block, n - start);
      parts.emplace_back(z.middleRows(start, len).transpose() * c.segment(start, len));
    }
    Vector g = numeric::pairwise_reduce(parts);
    g /= static_cast<double>(n);
    return g;
  }

  //! Same data and weights at another bandwidth.
  SmoothedRisk with_bandwidth(double delta) const
  {
    return SmoothedRisk(data_, SurrogateLoss(loss_.kernel(), delta), scheme_);
  }

private:
  void check_dim(const Vector& theta) const
  {
    if (theta.size() != data_->d())
      throw InputError("theta has dimension " + std::to_string(theta.size()) +
                       ", expected " + std::to_string(data_->d()));
    if (!theta.allFinite())
      throw InputError("theta must be finite");
  }

  std::shared_ptr<const Dataset> data_;
  SurrogateLoss loss_;
  WeightScheme scheme_;
  Vector weights_;
};

inline double
empirical_risk(const SmoothedRisk& spec, const Vector& theta)
{
  return spec.risk(theta);
}

inline Vector
empirical_gradient(const SmoothedRisk& spec, const Vector& theta)
{
  return spec.gradient(theta);
}

//! Penalized objective R(theta) + lambda * |theta|_1.
inline double
objective(const SmoothedRisk& spec, const Vector& theta, double lambda)
{
  detail::require(lambda >= 0.0, "lambda must be nonnegative");
  return spec.risk(theta) + lambda * theta.lpNorm<1>();
}

//! (1/n) sum_i w_i (1 - sign(u_i)) / 2 with sign(0) = 0.
inline double
zero_one_risk(const Dataset& data, const Vector& theta, const WeightScheme& weights)
{
  if (theta.size() != data.d())
    throw InputError("theta has dimension " + std::to_string(theta.size()) +
                     ", expected " + std::to_string(data.d()));
  detail::require(theta.allFinite(), "theta must be finite");
  const Vector w = weights.resolve(data);
  const Vector u = (data.x() - data.z() * theta).cwiseProduct(data.y());
  Vector terms(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double sgn = u(i) > 0 ? 1.0 : (u(i) < 0 ? -1.0 : 0.0);
    terms(i) = w(i) * 0.5 * (1.0 - sgn);
  }
  return numeric::pairwise_sum(terms) / static_cast<double>(u.size());
}

} // namespace smooth_threshold
