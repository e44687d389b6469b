#pragma once

#include "error.hpp"
#include "numeric.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace smooth_threshold {

// A smoothing kernel K together with the metadata needed by the smoothed
// 0-1 loss: declared order (moments 1..order vanish), sup bound, support
// radius, and optionally closed forms for the upper tail and the moments.
// Immutable after construction; evaluation is pure and thread-safe.
class Kernel
{
public:
  using Density = std::function<double(double)>;
  using Tail = std::function<double(double)>;
  using Moment = std::function<double(unsigned)>;

  struct Properties
  {
    std::string name = "custom";
    unsigned order = 1;
    double sup_bound = infinity;
    double support_radius = infinity;
    //! Integration window [-r, r] used by quadrature; defaults to the support.
    double quadrature_radius = infinity;
    bool nonnegative = false;
  };

  Kernel(Density density, Properties props, Tail tail = {}, Moment moment = {})
    : impl_(std::make_shared<Impl>(Impl{ std::move(density),
                                         std::move(tail),
                                         std::move(moment),
                                         resolved(std::move(props)) }))
  {
    detail::require(static_cast<bool>(impl_->density),
                    "kernel density must be callable");
  }

  //! K(t); exactly zero outside a compact support.
  double operator()(double t) const
  {
    if (std::abs(t) > impl_->props.support_radius)
      return 0.0;
    return impl_->density(t);
  }

  //! Checked evaluation: rejects non-finite arguments.
  double eval(double t) const
  {
    if (!std::isfinite(t))
      throw InputError("kernel argument must be finite");
    return (*this)(t);
  }

  //! Integral of K over (a, inf): closed form when available, else quadrature.
  double upper_tail(double a) const
  {
    if (impl_->tail)
      return impl_->tail(a);
    const double r = impl_->props.quadrature_radius;
    if (a >= r)
      return 0.0;
    const double lo = std::max(a, -r);
    const std::string what = "kernel tail of " + name();
    // split at the peak; kinks there (triangular) inflate the GK error estimate
    if (lo < 0.0)
      return numeric::integrate(*this, lo, 0.0, 0.5e-10, what).value +
             numeric::integrate(*this, 0.0, r, 0.5e-10, what).value;
    return numeric::integrate(*this, lo, r, 1e-10, what).value;
  }

  //! Integral of t^j K(t): closed form when available, else quadrature.
  double moment(unsigned j) const
  {
    if (impl_->moment)
      return impl_->moment(j);
    return quadrature_moment(j);
  }

  //! Integral of t^j K(t) by adaptive quadrature, ignoring any closed form.
  double quadrature_moment(unsigned j) const
  {
    const double r = impl_->props.quadrature_radius;
    auto integrand = [this, j](double t) {
      const double k = (*this)(t);
      return k == 0.0 ? 0.0 : std::pow(t, static_cast<int>(j)) * k;
    };
    return numeric::integrate(integrand,
                              -r,
                              r,
                              1e-10,
                              "moment " + std::to_string(j) + " of " + name())
      .value;
  }

  const std::string& name() const { return impl_->props.name; }
  unsigned order() const { return impl_->props.order; }
  double sup_bound() const { return impl_->props.sup_bound; }
  double support_radius() const { return impl_->props.support_radius; }
  double quadrature_radius() const { return impl_->props.quadrature_radius; }
  bool nonnegative() const { return impl_->props.nonnegative; }
  bool has_closed_form_tail() const { return static_cast<bool>(impl_->tail); }
  bool compact() const { return std::isfinite(impl_->props.support_radius); }

private:
  static Properties resolved(Properties p)
  {
    detail::require(p.support_radius > 0.0, "kernel support radius must be positive");
    if (std::isinf(p.quadrature_radius))
      p.quadrature_radius = p.support_radius;
    return p;
  }

  struct Impl
  {
    Density density;
    Tail tail;
    Moment moment;
    Properties props;
  };
  std::shared_ptr<const Impl> impl_;
};

//! K(t) with a finiteness check on t.
inline double
eval_kernel(const Kernel& k, double t)
{
  return k.eval(t);
}

//! Integral of t^j K(t) dt.
inline double
kernel_moment(const Kernel& k, unsigned j)
{
  return k.moment(j);
}

// The smoothed 0-1 loss L(u) = integral of K over (u / bandwidth, inf).
class SurrogateLoss
{
public:
  SurrogateLoss(Kernel kernel, double bandwidth)
    : kernel_(std::move(kernel))
    , bandwidth_(bandwidth)
  {
    detail::require(std::isfinite(bandwidth) && bandwidth > 0.0,
                    "bandwidth must be positive and finite");
  }

  double operator()(double u) const
  {
    if (!std::isfinite(u))
      throw InputError("surrogate loss argument must be finite");
    return kernel_.upper_tail(u / bandwidth_);
  }

  //! dL/du = -K(u / bandwidth) / bandwidth.
  double slope(double u) const { return -kernel_(u / bandwidth_) / bandwidth_; }

  const Kernel& kernel() const { return kernel_; }
  double bandwidth() const { return bandwidth_; }

private:
  Kernel kernel_;
  double bandwidth_;
};

inline double
surrogate_loss(const SurrogateLoss& s, double u)
{
  return s(u);
}

namespace kernels {

namespace detail {

inline double
double_factorial_odd(unsigned p) // (2p - 1)!!, with (-1)!! = 1
{
  double r = 1.0;
  for (unsigned k = 1; k <= p; ++k)
    r *= static_cast<double>(2 * k - 1);
  return r;
}

//! Integral of t^j phi(t) over the real line.
inline double
gaussian_moment(unsigned j)
{
  return (j % 2 == 1) ? 0.0 : double_factorial_odd(j / 2);
}

// Integrals of t^{2k} phi(t) over (a, inf), k = 0..kmax, via
// I_k = a^{2k-1} phi(a) + (2k - 1) I_{k-1}.
inline std::vector<double>
gaussian_even_tails(double a, unsigned kmax)
{
  std::vector<double> out(kmax + 1);
  out[0] = numeric::normal_upper_tail(a);
  const double pdf = numeric::normal_pdf(a);
  for (unsigned k = 1; k <= kmax; ++k)
    out[k] = std::pow(a, static_cast<int>(2 * k - 1)) * pdf +
             static_cast<double>(2 * k - 1) * out[k - 1];
  return out;
}

} // namespace detail

inline Kernel
gaussian()
{
  Kernel::Properties p;
  p.name = "gaussian";
  p.order = 1;
  p.sup_bound = numeric::inv_sqrt_2pi;
  p.quadrature_radius = 12.0;
  p.nonnegative = true;
  return Kernel(numeric::normal_pdf,
                p,
                numeric::normal_upper_tail,
                detail::gaussian_moment);
}

//! K(t) = 1/2 on [-1, 1].
inline Kernel
rectangular()
{
  Kernel::Properties p;
  p.name = "rectangular";
  p.order = 1;
  p.sup_bound = 0.5;
  p.support_radius = 1.0;
  p.nonnegative = true;
  return Kernel([](double) { return 0.5; },
                p,
                [](double a) { return std::clamp(0.5 * (1.0 - a), 0.0, 1.0); },
                [](unsigned j) {
                  return j % 2 == 1 ? 0.0 : 1.0 / static_cast<double>(j + 1);
                });
}

//! K(t) = 3/4 (1 - t^2) on [-1, 1].
inline Kernel
epanechnikov()
{
  Kernel::Properties p;
  p.name = "epanechnikov";
  p.order = 1;
  p.sup_bound = 0.75;
  p.support_radius = 1.0;
  p.nonnegative = true;
  return Kernel([](double t) { return 0.75 * (1.0 - t * t); },
                p,
                [](double a) {
                  if (a >= 1.0)
                    return 0.0;
                  if (a <= -1.0)
                    return 1.0;
                  return 0.5 - 0.75 * a + 0.25 * a * a * a;
                },
                [](unsigned j) {
                  if (j % 2 == 1)
                    return 0.0;
                  const double jj = static_cast<double>(j);
                  return 1.5 * (1.0 / (jj + 1.0) - 1.0 / (jj + 3.0));
                });
}

// Polynomial-times-Gaussian kernel K(t) = phi(t) * sum_k a_k t^{2k},
// k = 0..l/2, with moments 1..l vanishing and unit mass. The coefficients
// solve the (l/2 + 1)-dimensional moment system sum_k a_k m_{2k+2i} = [i == 0].
inline Kernel
higher_order_gaussian(unsigned l)
{
  if (l != 2 && l != 4 && l != 6)
    throw InputError("higher-order Gaussian kernels support l in {2, 4, 6}, got " +
                     std::to_string(l));
  const unsigned m = l / 2 + 1;
  Matrix system(m, m);
  Vector rhs = Vector::Zero(m);
  rhs(0) = 1.0;
  for (unsigned i = 0; i < m; ++i)
    for (unsigned k = 0; k < m; ++k)
      system(i, k) = detail::gaussian_moment(2 * k + 2 * i);
  const Vector coef = system.fullPivLu().solve(rhs);
  std::vector<double> a(coef.data(), coef.data() + m);

  auto density = [a](double t) {
    const double t2 = t * t;
    double poly = 0.0;
    for (auto it = a.rbegin(); it != a.rend(); ++it)
      poly = poly * t2 + *it;
    return poly * numeric::normal_pdf(t);
  };
  auto tail = [a](double x) {
    const auto parts = detail::gaussian_even_tails(x, a.size() - 1);
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
      s += a[k] * parts[k];
    return s;
  };
  auto moment = [a](unsigned j) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
      s += a[k] * detail::gaussian_moment(static_cast<unsigned>(2 * k) + j);
    return s;
  };

  // sup |K| on a fine grid, padded; the peak sits at t = 0 for l <= 6.
  double sup = 0.0;
  for (int i = 0; i <= 24000; ++i)
    sup = std::max(sup, std::abs(density(i * 5e-4)));

  Kernel::Properties p;
  p.name = "gaussian-order-" + std::to_string(l);
  p.order = l;
  p.sup_bound = sup * (1.0 + 1e-9);
  p.quadrature_radius = 12.0;
  p.nonnegative = false;
  return Kernel(density, p, tail, moment);
}

//! Built-in kernel by name.
inline Kernel
by_name(const std::string& name)
{
  if (name == "gaussian")
    return gaussian();
  if (name == "rectangular")
    return rectangular();
  if (name == "epanechnikov")
    return epanechnikov();
  if (name == "gaussian-order-2")
    return higher_order_gaussian(2);
  if (name == "gaussian-order-4")
    return higher_order_gaussian(4);
  if (name == "gaussian-order-6")
    return higher_order_gaussian(6);
  throw InputError("unknown kernel '" + name + "'");
}

inline const std::vector<std::string>&
builtin_names()
{
  static const std::vector<std::string> names{ "gaussian",
                                               "rectangular",
                                               "epanechnikov",
                                               "gaussian-order-2",
                                               "gaussian-order-4",
                                               "gaussian-order-6" };
  return names;
}

} // namespace kernels

inline Kernel
make_higher_order_gaussian(unsigned l)
{
  return kernels::higher_order_gaussian(l);
}

struct KernelCheck
{
  std::string name;
  bool passed;
  double residual;
  double tolerance;
};

struct ProperKernelReport
{
  std::vector<KernelCheck> checks;

  bool passed() const
  {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) {
      return c.passed;
    });
  }

  const KernelCheck* find(const std::string& name) const
  {
    for (const auto& c : checks)
      if (c.name == name)
        return &c;
    return nullptr;
  }
};

// Checks symmetry, boundedness, unit mass, square integrability and the
// vanishing moments 1..order by probing and quadrature. Failures are
// reported, never thrown.
inline ProperKernelReport
verify_proper(const Kernel& k)
{
  ProperKernelReport report;
  const double r = std::isfinite(k.quadrature_radius()) ? k.quadrature_radius()
                                                        : 50.0;

  double asym = 0.0;
  double excess = 0.0;
  constexpr int probes = 20000;
  for (int i = 0; i <= probes; ++i) {
    const double t = 1.1 * r * i / probes;
    const double kp = k(t);
    const double km = k(-t);
    asym = std::max(asym, std::abs(kp - km));
    excess = std::max(excess, std::max(std::abs(kp), std::abs(km)) - k.sup_bound());
  }
  report.checks.push_back({ "symmetry", asym <= 1e-12, asym, 1e-12 });
  report.checks.push_back(
    { "bounded", excess <= 0.0, std::max(excess, 0.0), 0.0 });

  auto quadrature_check = [&](const std::string& name, auto&& f, double target) {
    try {
      const double v = f();
      const double res = std::abs(v - target);
      report.checks.push_back({ name, res <= 1e-8, res, 1e-8 });
    } catch (const NumericError&) {
      report.checks.push_back({ name, false, infinity, 1e-8 });
    }
  };

  quadrature_check("unit_mass", [&] { return k.quadrature_moment(0); }, 1.0);

  try {
    const double qr = k.quadrature_radius();
    const auto sq = numeric::integrate(
      [&k](double t) {
        const double v = k(t);
        return v * v;
      },
      -qr,
      qr,
      1e-8,
      "square of " + k.name());
    report.checks.push_back({ "square_integrable", true, sq.error, 1e-8 });
  } catch (const NumericError&) {
    report.checks.push_back({ "square_integrable", false, infinity, 1e-8 });
  }

  for (unsigned j = 1; j <= k.order(); ++j)
    quadrature_check(
      "moment_" + std::to_string(j), [&] { return k.quadrature_moment(j); }, 0.0);
  return report;
}

} // namespace smooth_threshold
