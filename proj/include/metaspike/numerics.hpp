#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>

namespace metaspike::num {

// Adaptive Simpson quadrature with absolute-error control.
namespace detail {
template <class F>
double simpson_step(const F& f, double a, double fa, double b, double fb,
                    double m, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adaptive_simpson_rec(const F& f, double a, double fa, double b,
                            double fb, double m, double fm, double whole,
                            double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson_step(f, a, fa, m, fm, lm, flm);
  const double right = simpson_step(f, m, fm, b, fb, rm, frm);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol,
                              depth - 1) +
         adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol,
                              depth - 1);
}
}  // namespace detail

template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol,
                        int max_depth = 60) {
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = detail::simpson_step(f, a, fa, b, fb, m, fm);
  return detail::adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, tol,
                                      max_depth);
}

// Composite 15-point Gauss-Legendre rule; used as an independent quadrature
// route in tests.
template <class F>
double gauss15(const F& f, double a, double b, int panels = 32) {
  static const double xs[8] = {0.0,
                               0.2011940939974345,
                               0.3941513470775634,
                               0.5709721726085388,
                               0.7244177313601701,
                               0.8482065834104272,
                               0.9372733924007060,
                               0.9879925180204854};
  static const double ws[8] = {0.2025782419255613, 0.1984314853271116,
                               0.1861610000155622, 0.1662692058169939,
                               0.1395706779261543, 0.1071592204671719,
                               0.0703660474881081, 0.0307532419961173};
  double total = 0.0;
  const double hstep = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * hstep;
    const double c = lo + 0.5 * hstep, hw = 0.5 * hstep;
    double acc = ws[0] * f(c);
    for (int i = 1; i < 8; ++i)
      acc += ws[i] * (f(c - hw * xs[i]) + f(c + hw * xs[i]));
    total += acc * hw;
  }
  return total;
}

// Root of a continuous function with a sign change on [lo, hi], by bisection.
template <class F>
double bisect(const F& f, double lo, double hi, double xtol,
              int max_iter = 200) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0))
    throw std::invalid_argument("bisect: no sign change on bracket");
  for (int it = 0; it < max_iter && (hi - lo) > xtol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = f(mid);
    if (fmid == 0.0) return mid;
    if ((fmid > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Safeguarded Newton iteration: falls back to bisection whenever a Newton
// step leaves the bracket or fails to reduce the residual.
template <class F, class DF>
double newton_bisect(const F& f, const DF& df, double lo, double hi,
                     double ftol, int max_iter = 200) {
  double flo = f(lo), fhi = f(hi);
  if ((flo > 0.0) == (fhi > 0.0))
    throw std::invalid_argument("newton_bisect: no sign change on bracket");
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < max_iter; ++it) {
    const double fx = f(x);
    if (std::fabs(fx) <= ftol) return x;
    if ((fx > 0.0) == (flo > 0.0)) {
      lo = x;
      flo = fx;
    } else {
      hi = x;
    }
    const double d = df(x);
    double next = (d != 0.0) ? x - fx / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }
  return x;
}

// Adaptive embedded Runge-Kutta (Dormand-Prince 5(4)) for a scalar ODE
// x' = f(t, x).  Returns x(t1).
template <class F>
double ode45(const F& f, double x0, double t0, double t1,
             double rel_tol = 1e-10, double abs_tol = 1e-13) {
  if (t1 <= t0) return x0;
  double t = t0, x = x0;
  double h = (t1 - t0) * 0.01;
  const double hmin = (t1 - t0) * 1e-14;
  int guard = 0;
  while (t < t1 && ++guard < 20000000) {
    if (t + h > t1) h = t1 - t;
    const double k1 = f(t, x);
    const double k2 = f(t + h / 5.0, x + h * (k1 / 5.0));
    const double k3 = f(t + 3.0 * h / 10.0, x + h * (3.0 * k1 + 9.0 * k2) / 40.0);
    const double k4 =
        f(t + 4.0 * h / 5.0,
          x + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3));
    const double k5 =
        f(t + 8.0 * h / 9.0,
          x + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 +
                   64448.0 / 6561.0 * k3 - 212.0 / 729.0 * k4));
    const double k6 =
        f(t + h, x + h * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2 +
                          46732.0 / 5247.0 * k3 + 49.0 / 176.0 * k4 -
                          5103.0 / 18656.0 * k5));
    const double x5 = x + h * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 +
                               125.0 / 192.0 * k4 - 2187.0 / 6784.0 * k5 +
                               11.0 / 84.0 * k6);
    const double k7 = f(t + h, x5);
    const double x4 = x + h * (5179.0 / 57600.0 * k1 + 7571.0 / 16695.0 * k3 +
                               393.0 / 640.0 * k4 - 92097.0 / 339200.0 * k5 +
                               187.0 / 2100.0 * k6 + 1.0 / 40.0 * k7);
    const double err = std::fabs(x5 - x4);
    const double scale = abs_tol + rel_tol * std::max(std::fabs(x), std::fabs(x5));
    if (err <= scale || h <= hmin) {
      t += h;
      x = x5;
    }
    const double ratio = (err > 0.0) ? std::pow(scale / err, 0.2) : 5.0;
    h *= std::min(5.0, std::max(0.2, 0.9 * ratio));
    if (h < hmin) h = hmin;
  }
  return x;
}

}  // namespace metaspike::num
