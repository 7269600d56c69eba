#pragma once

// Thin Eigen front ends to the GSL BFGS minimizer and the GSL trust-region
// Levenberg-Marquardt least-squares solver.

#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>
#include <gsl/gsl_blas.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multifit_nlinear.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include "tweezer/error.hpp"

namespace tweezer {

/// Returns f(x) and writes the gradient into g (already sized).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& g)>;

struct MinimizeOptions {
  int max_iterations = 2000;
  double gradient_tol = 1e-12;  ///< stop when |grad|_2 falls below this
  double initial_step = 1e-2;
  double line_tol = 0.1;
  int stall_restarts = 3;       ///< BFGS restarts after the line search stalls
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  double gradient_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline void to_eigen(const gsl_vector* v, Eigen::VectorXd& out) {
  for (std::size_t i = 0; i < v->size; ++i) out[static_cast<Eigen::Index>(i)] = gsl_vector_get(v, i);
}

struct GslObjective {
  const Objective* f;
  Eigen::VectorXd x, g;
  Eigen::VectorXd last_x;  ///< point of the cached value and gradient
  double last_f = 0.0;

  double eval(const gsl_vector* v) {
    to_eigen(v, x);
    if (last_x.size() == x.size() && last_x == x) return last_f;
    last_f = (*f)(x, g);
    last_x = x;
    return last_f;
  }
};

inline double gsl_f(const gsl_vector* v, void* p) { return static_cast<GslObjective*>(p)->eval(v); }

inline void gsl_df(const gsl_vector* v, void* p, gsl_vector* df) {
  auto* o = static_cast<GslObjective*>(p);
  o->eval(v);
  for (std::size_t i = 0; i < df->size; ++i) gsl_vector_set(df, i, o->g[static_cast<Eigen::Index>(i)]);
}

inline void gsl_fdf(const gsl_vector* v, void* p, double* f, gsl_vector* df) {
  auto* o = static_cast<GslObjective*>(p);
  *f = o->eval(v);
  for (std::size_t i = 0; i < df->size; ++i) gsl_vector_set(df, i, o->g[static_cast<Eigen::Index>(i)]);
}

}  // namespace detail

inline MinimizeResult bfgs_minimize(const Objective& f, const Eigen::VectorXd& x0, const MinimizeOptions& opt = {}) {
  const std::size_t n = static_cast<std::size_t>(x0.size());
  detail::GslObjective obj{&f, Eigen::VectorXd(x0.size()), Eigen::VectorXd(x0.size()), Eigen::VectorXd(), 0.0};
  gsl_multimin_function_fdf fn{&detail::gsl_f, &detail::gsl_df, &detail::gsl_fdf, n, &obj};

  // GSL aborts on errors by default; failures are reported through status codes instead.
  gsl_error_handler_t* old = gsl_set_error_handler_off();
  gsl_vector* x = gsl_vector_alloc(n);
  for (std::size_t i = 0; i < n; ++i) gsl_vector_set(x, i, x0[static_cast<Eigen::Index>(i)]);
  gsl_multimin_fdfminimizer* s = gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, n);
  gsl_multimin_fdfminimizer_set(s, &fn, x, opt.initial_step, opt.line_tol);

  MinimizeResult r;
  int stalls = 0;
  for (r.iterations = 0; r.iterations < opt.max_iterations; ++r.iterations) {
    if (gsl_blas_dnrm2(s->gradient) < opt.gradient_tol) {
      r.converged = true;
      break;
    }
    const int status = gsl_multimin_fdfminimizer_iterate(s);
    if (status != GSL_SUCCESS) {
      if (++stalls > opt.stall_restarts) break;
      gsl_multimin_fdfminimizer_restart(s);
      continue;
    }
    stalls = 0;
  }
  r.x.resize(x0.size());
  detail::to_eigen(s->x, r.x);
  r.value = s->f;
  r.gradient_norm = gsl_blas_dnrm2(s->gradient);
  if (r.gradient_norm < opt.gradient_tol) r.converged = true;

  gsl_multimin_fdfminimizer_free(s);
  gsl_vector_free(x);
  gsl_set_error_handler(old);
  return r;
}

/// Levenberg-damped Newton iteration with an exact Hessian, used to polish a
/// quasi-Newton result. Steps solve (H + lambda I) dx = -g; lambda shrinks on
/// success and grows on failure.
inline MinimizeResult newton_polish(const Objective& f, const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& hess,
                                    const Eigen::VectorXd& x0, int max_iterations, double gradient_tol) {
  MinimizeResult r;
  r.x = x0;
  Eigen::VectorXd g(x0.size()), g_try(x0.size());
  r.value = f(r.x, g);
  double lambda = 1e-6 * std::max(1.0, hess(r.x).diagonal().cwiseAbs().maxCoeff());
  for (r.iterations = 0; r.iterations < max_iterations; ++r.iterations) {
    if (g.norm() < gradient_tol) break;
    const Eigen::MatrixXd h = hess(r.x);
    bool accepted = false;
    for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
      Eigen::MatrixXd a = h;
      a.diagonal().array() += lambda;
      const Eigen::VectorXd dx = a.ldlt().solve(-g);
      const Eigen::VectorXd x_try = r.x + dx;
      const double v = f(x_try, g_try);
      if (std::isfinite(v) && v <= r.value) {
        r.x = x_try;
        r.value = v;
        g = g_try;
        lambda = std::max(lambda / 3.0, 1e-300);
        accepted = true;
      } else {
        lambda *= 4.0;
      }
    }
    if (!accepted) break;
  }
  r.gradient_norm = g.norm();
  r.converged = r.gradient_norm < gradient_tol;
  return r;
}

/// Fills the residual vector r and, when J is non-null, the Jacobian.
using Residuals = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* jac)>;

struct LeastSquaresOptions {
  int max_iterations = 500;
  double xtol = 1e-14;
  double gtol = 1e-20;
  double ftol = 1e-20;
};

namespace detail {

struct GslResiduals {
  const Residuals* f;
  Eigen::VectorXd x, r;
  Eigen::MatrixXd jac;
};

inline int gsl_res_f(const gsl_vector* v, void* p, gsl_vector* out) {
  auto* o = static_cast<GslResiduals*>(p);
  to_eigen(v, o->x);
  (*o->f)(o->x, o->r, nullptr);
  for (std::size_t i = 0; i < out->size; ++i) gsl_vector_set(out, i, o->r[static_cast<Eigen::Index>(i)]);
  return GSL_SUCCESS;
}

inline int gsl_res_df(const gsl_vector* v, void* p, gsl_matrix* out) {
  auto* o = static_cast<GslResiduals*>(p);
  to_eigen(v, o->x);
  (*o->f)(o->x, o->r, &o->jac);
  for (std::size_t i = 0; i < out->size1; ++i)
    for (std::size_t j = 0; j < out->size2; ++j)
      gsl_matrix_set(out, i, j, o->jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  return GSL_SUCCESS;
}

}  // namespace detail

/// Minimizes |r(x)|^2 with analytic Jacobian. `value` is |r|^2 at the result
/// and `gradient_norm` is |2 J^T r|.
inline MinimizeResult least_squares(const Residuals& f, int n_residuals, const Eigen::VectorXd& x0,
                                    const LeastSquaresOptions& opt = {}) {
  const std::size_t n = static_cast<std::size_t>(n_residuals), p = static_cast<std::size_t>(x0.size());
  detail::require(n >= p && p > 0, "least squares needs at least as many residuals as parameters");
  detail::GslResiduals obj{&f, Eigen::VectorXd(x0.size()), Eigen::VectorXd(n_residuals),
                           Eigen::MatrixXd(n_residuals, x0.size())};
  gsl_multifit_nlinear_fdf fdf;
  fdf.f = &detail::gsl_res_f;
  fdf.df = &detail::gsl_res_df;
  fdf.fvv = nullptr;
  fdf.n = n;
  fdf.p = p;
  fdf.params = &obj;

  gsl_error_handler_t* old = gsl_set_error_handler_off();
  gsl_multifit_nlinear_parameters params = gsl_multifit_nlinear_default_parameters();
  gsl_multifit_nlinear_workspace* w = gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &params, n, p);
  gsl_vector* x = gsl_vector_alloc(p);
  for (std::size_t i = 0; i < p; ++i) gsl_vector_set(x, i, x0[static_cast<Eigen::Index>(i)]);
  gsl_multifit_nlinear_init(x, &fdf, w);
  int info = 0;
  const int status = gsl_multifit_nlinear_driver(static_cast<std::size_t>(opt.max_iterations), opt.xtol, opt.gtol,
                                                 opt.ftol, nullptr, nullptr, &info, w);

  MinimizeResult r;
  r.x.resize(x0.size());
  detail::to_eigen(gsl_multifit_nlinear_position(w), r.x);
  r.iterations = static_cast<int>(gsl_multifit_nlinear_niter(w));
  Eigen::VectorXd res(n_residuals);
  Eigen::MatrixXd jac(n_residuals, x0.size());
  f(r.x, res, &jac);
  r.value = res.squaredNorm();
  r.gradient_norm = (2.0 * jac.transpose() * res).norm();
  r.converged = status == GSL_SUCCESS;

  gsl_vector_free(x);
  gsl_multifit_nlinear_free(w);
  gsl_set_error_handler(old);
  return r;
}

}  // namespace tweezer
