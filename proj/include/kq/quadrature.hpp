#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <type_traits>
#include <vector>

#include "kq/errors.hpp"

namespace kq::quad {

struct Options {
  double rel_tol = 1e-8;
  double abs_tol = 0.0;
  int max_intervals = 4000;  // refinement budget
};

struct Outcome {
  double error_bound = 0.0;
  int intervals = 0;
  bool converged = false;
};

namespace detail {

// Gauss(7)-Kronrod(15) nodes and weights on [-1,1] (positive half).
inline constexpr double xgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr double wgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double wg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename Value>
double norm_of(const Value& v) {
  if constexpr (std::is_arithmetic_v<Value>) {
    return std::abs(static_cast<double>(v));
  } else if constexpr (std::is_same_v<Value, std::complex<double>>) {
    return std::abs(v);
  } else {
    return v.norm();  // Eigen dense types
  }
}

template <typename Value, typename F>
void gk15(F& f, double a, double b, Value& value, double& error) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);

  Value fc = f(center);
  Value kronrod = wgk[7] * fc;
  Value gauss = wg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double dx = half * xgk[j];
    Value sum = f(center - dx) + f(center + dx);
    kronrod += wgk[j] * sum;
    if (j % 2 == 1) gauss += wg[j / 2] * sum;
  }
  value = half * kronrod;
  error = norm_of<Value>(half * (kronrod - gauss));
}

template <typename Value>
struct Interval {
  double a, b, error;
  Value value;
};

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of f over [a, b]. Value may be a scalar
/// or any Eigen dense type; the error is measured in the Frobenius norm.
/// Bisects the worst interval until the summed error bound meets
/// max(abs_tol, rel_tol * |result|) or the budget runs out.
template <typename Value, typename F>
Value integrate_adaptive(F&& f, double a, double b, const Options& opt = {},
                         Outcome* outcome = nullptr) {
  std::vector<detail::Interval<Value>> ivs;
  ivs.reserve(64);
  detail::Interval<Value> first{a, b, 0.0, Value{}};
  detail::gk15(f, a, b, first.value, first.error);
  ivs.push_back(std::move(first));

  auto total = [&ivs] {
    Value v = ivs.front().value;
    double e = ivs.front().error;
    for (std::size_t i = 1; i < ivs.size(); ++i) {
      v += ivs[i].value;
      e += ivs[i].error;
    }
    return std::pair<Value, double>(v, e);
  };

  Value result;
  double err_sum = 0.0;
  while (true) {
    auto [v, e] = total();
    result = v;
    err_sum = e;
    const double target =
        std::max(opt.abs_tol, opt.rel_tol * detail::norm_of<Value>(result));
    if (err_sum <= target || static_cast<int>(ivs.size()) >= opt.max_intervals) break;

    auto worst = std::max_element(
        ivs.begin(), ivs.end(),
        [](const auto& p, const auto& q) { return p.error < q.error; });
    const double wa = worst->a, wb = worst->b, mid = 0.5 * (wa + wb);
    detail::Interval<Value> left{wa, mid, 0.0, Value{}};
    detail::Interval<Value> right{mid, wb, 0.0, Value{}};
    detail::gk15(f, left.a, left.b, left.value, left.error);
    detail::gk15(f, right.a, right.b, right.value, right.error);
    *worst = std::move(left);
    ivs.push_back(std::move(right));
  }

  // Deterministic final sum, ordered by interval position.
  std::sort(ivs.begin(), ivs.end(),
            [](const auto& p, const auto& q) { return p.a < q.a; });
  result = ivs.front().value;
  err_sum = ivs.front().error;
  for (std::size_t i = 1; i < ivs.size(); ++i) {
    result += ivs[i].value;
    err_sum += ivs[i].error;
  }

  const double target =
      std::max(opt.abs_tol, opt.rel_tol * detail::norm_of<Value>(result));
  if (outcome) {
    outcome->error_bound = err_sum;
    outcome->intervals = static_cast<int>(ivs.size());
    outcome->converged = err_sum <= target;
  } else if (err_sum > target) {
    throw QuadratureError("quadrature did not converge within budget",
                          detail::norm_of<Value>(result), err_sum);
  }
  return result;
}

/// Semi-infinite integral of f over (0, inf) via the map xi = scale*x/(1-x),
/// x in [0,1). `scale` should sit near the integrand's peak so the map
/// clusters nodes there. The integrand is never evaluated at xi = 0.
template <typename Value, typename F>
Value integrate_semi_infinite(F&& f, double scale, const Options& opt = {},
                              Outcome* outcome = nullptr) {
  auto g = [&f, scale](double x) -> Value {
    const double one_minus = 1.0 - x;
    const double xi = scale * x / one_minus;
    return f(xi) * (scale / (one_minus * one_minus));
  };
  // Open at both ends: GK nodes are interior, so x=0 and x=1 are never hit.
  return integrate_adaptive<Value>(g, 0.0, 1.0, opt, outcome);
}

}  // namespace kq::quad
