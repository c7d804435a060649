#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>

namespace kq::ode {

struct StepperOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  double first_step = 0.0;  // 0 -> automatic
  std::int64_t max_steps = 200'000'000;
};

struct IntegrationStats {
  std::int64_t n_accepted = 0;
  std::int64_t n_rejected = 0;
  std::int64_t n_rhs = 0;
  double t_reached = 0.0;
  bool completed = false;
  bool stopped_early = false;
  std::string error;
};

namespace detail {

// Dormand-Prince 5(4) tableau
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                        a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                        a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                        a75 = -2187.0 / 6784, a76 = 11.0 / 84;
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

template <typename State>
double scaled_rms(const State& v, const State& y0, const State& y1, double atol,
                  double rtol) {
  double acc = 0.0;
  const auto* e = v.data();
  const auto* a = y0.data();
  const auto* b = y1.data();
  const long n = static_cast<long>(v.size());
  for (long i = 0; i < n; ++i) {
    const double sc = atol + rtol * std::max(std::abs(a[i]), std::abs(b[i]));
    const double q = std::abs(e[i]) / sc;
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(n));
}

}  // namespace detail

/// Adaptive embedded Runge-Kutta 5(4), Dormand-Prince coefficients, FSAL.
/// State is any fixed-size Eigen type. Integrates from t0 to t1 (either
/// direction), invoking `sample` at each time in `sample_times` (sorted in
/// the direction of integration; steps are clipped to land on them exactly).
/// `sample` may return false to stop early.
template <typename State, typename Rhs, typename Sampler>
IntegrationStats integrate(Rhs&& rhs, State& y, double t0, double t1,
                           std::span<const double> sample_times, Sampler&& sample,
                           const StepperOptions& opt = {}) {
  using namespace detail;
  IntegrationStats st;
  st.t_reached = t0;
  const double dir = (t1 >= t0) ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  if (span == 0.0) {
    st.completed = true;
    return st;
  }

  double t = t0;
  State k1 = rhs(t, y);
  ++st.n_rhs;

  // initial step from weighted-norm time scale; the controller fixes it fast
  double h;
  if (opt.first_step > 0.0) {
    h = std::min(opt.first_step, span);
  } else {
    const double d0 = scaled_rms(y, y, y, opt.atol, opt.rtol);
    const double d1 = scaled_rms(k1, y, y, opt.atol, opt.rtol);
    h = (d0 > 1e-10 && d1 > 1e-10) ? 0.01 * (d0 / d1) : 1e-6 * span;
    h = std::min(h, span);
  }

  std::size_t next_sample = 0;
  while (next_sample < sample_times.size() &&
         dir * (sample_times[next_sample] - t0) < 0.0)
    ++next_sample;
  if (next_sample < sample_times.size() && sample_times[next_sample] == t0) {
    if (!sample(t0, y)) {
      st.completed = true;
      st.stopped_early = true;
      return st;
    }
    ++next_sample;
  }

  bool last_rejected = false;
  while (dir * (t1 - t) > 0.0) {
    if (st.n_accepted + st.n_rejected >= opt.max_steps) {
      st.error = "step budget exhausted";
      st.t_reached = t;
      return st;
    }

    double target = t1;
    bool target_is_sample = false;
    if (next_sample < sample_times.size() &&
        dir * (sample_times[next_sample] - t1) < 0.0) {
      target = sample_times[next_sample];
      target_is_sample = true;
    }

    const double interval = std::abs(target - t);
    const double tiny = 16.0 * std::numeric_limits<double>::epsilon() *
                        std::max(std::abs(t), std::abs(target));
    if (interval <= tiny) {
      // degenerate leftover interval: snap to the target
      t = target;
      if (target_is_sample) {
        if (!sample(t, y)) {
          st.completed = true;
          st.stopped_early = true;
          return st;
        }
        ++next_sample;
      }
      continue;
    }
    const double h_used = std::min({h, opt.max_step, interval});
    if (h_used <= tiny) {
      st.error = "step size underflow";
      st.t_reached = t;
      return st;
    }
    const bool hits_target = h_used >= interval;
    const double hs = dir * h_used;

    const State y2 = y + hs * (a21 * k1);
    const State k2 = rhs(t + c2 * hs, y2);
    const State y3 = y + hs * (a31 * k1 + a32 * k2);
    const State k3 = rhs(t + c3 * hs, y3);
    const State y4 = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
    const State k4 = rhs(t + c4 * hs, y4);
    const State y5 = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    const State k5 = rhs(t + c5 * hs, y5);
    const State y6 = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    const State k6 = rhs(t + hs, y6);
    const State ynew = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const State k7 = rhs(t + hs, ynew);
    st.n_rhs += 6;

    const State errv =
        hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double err = scaled_rms(errv, y, ynew, opt.atol, opt.rtol);

    if (err <= 1.0) {
      t = hits_target ? target : t + hs;
      y = ynew;
      k1 = k7;  // FSAL
      ++st.n_accepted;
      st.t_reached = t;
      if (hits_target && target_is_sample) {
        if (!sample(t, y)) {
          st.completed = true;
          st.stopped_early = true;
          return st;
        }
        ++next_sample;
      }
      double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
      fac = std::min(last_rejected ? 1.0 : 10.0, std::max(0.2, fac));
      h = h_used * fac;
      last_rejected = false;
    } else {
      ++st.n_rejected;
      h = h_used * std::max(0.2, 0.9 * std::pow(err, -0.2));
      last_rejected = true;
    }
  }
  st.completed = true;
  st.t_reached = t;
  return st;
}

}  // namespace kq::ode
