#include "w2vt/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <gsl/gsl_multimin.h>

#include "w2vt/common.hpp"

namespace w2vt {

double GaussianProcess::matern52(std::span<const double> a, std::span<const double> b,
                                 std::span<const double> lengthscales, double signal_var) {
  double r2 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = (a[i] - b[i]) / lengthscales[i];
    r2 += t * t;
  }
  const double s5r = std::sqrt(5.0 * r2);
  return signal_var * (1.0 + s5r + 5.0 * r2 / 3.0) * std::exp(-s5r);
}

bool GaussianProcess::factorise() {
  const auto n = static_cast<Eigen::Index>(x_.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = matern52(x_[static_cast<std::size_t>(i)], x_[static_cast<std::size_t>(j)],
                                hyper_.lengthscales, hyper_.signal_var);
      k(i, j) = v;
      k(j, i) = v;
    }
    k(i, i) += hyper_.noise_var + 1e-10;
  }
  llt_.compute(k);
  if (llt_.info() != Eigen::Success) return false;

  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd kinv_one = llt_.solve(ones);
  const double denom = ones.dot(kinv_one);
  const_mean_ = denom > 0 ? kinv_one.dot(y_) / denom : 0.0;
  const Eigen::VectorXd resid = y_ - const_mean_ * ones;
  alpha_ = llt_.solve(resid);
  const Eigen::MatrixXd l = llt_.matrixL();
  double logdet = 0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(l(i, i));
  lml_ = -0.5 * resid.dot(alpha_) - logdet - 0.5 * static_cast<double>(n) * std::log(2 * std::numbers::pi);
  return std::isfinite(lml_);
}

void GaussianProcess::condition(const std::vector<std::vector<double>>& x,
                                const std::vector<double>& y, const GpHyper& hyper) {
  if (x.empty() || x.size() != y.size()) throw ValidationError("GP needs matching, non-empty x and y");
  x_ = x;
  const auto n = static_cast<Eigen::Index>(y.size());
  y_mean_ = 0;
  for (double v : y) y_mean_ += v;
  y_mean_ /= static_cast<double>(n);
  double ss = 0;
  for (double v : y) ss += (v - y_mean_) * (v - y_mean_);
  y_scale_ = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  if (!(y_scale_ > 1e-12)) y_scale_ = 1.0;
  y_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) y_(i) = (y[static_cast<std::size_t>(i)] - y_mean_) / y_scale_;
  hyper_ = hyper;
  if (!factorise()) throw RuntimeFailure("GP kernel matrix is not positive definite");
}

namespace {

struct Bounds {
  double lo, hi;  // in log space
  double map(double z) const { return std::exp(lo + (hi - lo) / (1.0 + std::exp(-z))); }
  double unmap(double v) const {
    const double p = std::clamp((std::log(v) - lo) / (hi - lo), 1e-6, 1 - 1e-6);
    return std::log(p / (1 - p));
  }
};

struct Objective {
  GaussianProcess* gp;
  const std::vector<std::vector<double>>* x;
  const std::vector<double>* y;
  std::vector<Bounds> bounds;  // lengthscales..., signal, noise
  std::size_t dim;

  GpHyper unpack(const gsl_vector* z) const {
    GpHyper h;
    for (std::size_t i = 0; i < dim; ++i) h.lengthscales.push_back(bounds[i].map(gsl_vector_get(z, i)));
    h.signal_var = bounds[dim].map(gsl_vector_get(z, dim));
    h.noise_var = bounds[dim + 1].map(gsl_vector_get(z, dim + 1));
    return h;
  }
};

double negative_lml(const gsl_vector* z, void* params) {
  auto* obj = static_cast<Objective*>(params);
  try {
    obj->gp->condition(*obj->x, *obj->y, obj->unpack(z));
  } catch (const RuntimeFailure&) {
    return 1e12;
  }
  return -obj->gp->log_marginal_likelihood();
}

}  // namespace

void GaussianProcess::fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                          const GpConfig& cfg) {
  if (x.empty()) throw ValidationError("GP needs at least one observation");
  const std::size_t dim = x.front().size();
  Objective obj{this, &x, &y, {}, dim};
  for (std::size_t i = 0; i < dim; ++i) {
    obj.bounds.push_back({std::log(cfg.min_lengthscale), std::log(cfg.max_lengthscale)});
  }
  obj.bounds.push_back({std::log(0.05), std::log(20.0)});
  obj.bounds.push_back({std::log(cfg.min_noise_var), std::log(cfg.max_noise_var)});
  const std::size_t np = dim + 2;

  std::vector<std::vector<double>> starts;
  {
    std::vector<double> z(np);
    for (std::size_t i = 0; i < dim; ++i) z[i] = obj.bounds[i].unmap(0.3);
    z[dim] = obj.bounds[dim].unmap(1.0);
    z[dim + 1] = obj.bounds[dim + 1].unmap(1e-2);
    starts.push_back(z);
  }
  Rng rng = make_rng(cfg.seed, 0x6770, x.size());
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int r = 0; r < cfg.restarts; ++r) {
    std::vector<double> z(np);
    for (auto& v : z) v = u(rng);
    starts.push_back(z);
  }

  double best = std::numeric_limits<double>::infinity();
  GpHyper best_hyper;
  gsl_multimin_function fn{&negative_lml, np, &obj};
  gsl_vector* z = gsl_vector_alloc(np);
  gsl_vector* step = gsl_vector_alloc(np);
  gsl_multimin_fminimizer* nm = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, np);
  for (const auto& s : starts) {
    for (std::size_t i = 0; i < np; ++i) gsl_vector_set(z, i, s[i]);
    gsl_vector_set_all(step, 1.0);
    gsl_multimin_fminimizer_set(nm, &fn, z, step);
    for (int it = 0; it < cfg.max_iterations; ++it) {
      if (gsl_multimin_fminimizer_iterate(nm) != GSL_SUCCESS) break;
      if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(nm), 1e-4) == GSL_SUCCESS) break;
    }
    const double v = gsl_multimin_fminimizer_minimum(nm);
    if (v < best) {
      best = v;
      best_hyper = obj.unpack(gsl_multimin_fminimizer_x(nm));
    }
  }
  gsl_multimin_fminimizer_free(nm);
  gsl_vector_free(step);
  gsl_vector_free(z);

  if (!(best < 1e11)) throw RuntimeFailure("GP hyperparameter fit failed for every start");
  condition(x, y, best_hyper);
}

GaussianProcess::Prediction GaussianProcess::predict(std::span<const double> x) const {
  const auto n = static_cast<Eigen::Index>(x_.size());
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ks(i) = matern52(x, x_[static_cast<std::size_t>(i)], hyper_.lengthscales, hyper_.signal_var);
  }
  const double mean = const_mean_ + ks.dot(alpha_);
  const Eigen::VectorXd v = llt_.matrixL().solve(ks);
  const double var = std::max(0.0, hyper_.signal_var - v.squaredNorm());
  return {mean * y_scale_ + y_mean_, std::sqrt(var) * y_scale_};
}

double GaussianProcess::noise_std() const { return std::sqrt(hyper_.noise_var) * y_scale_; }

double expected_improvement(double mean, double std, double best) {
  const double diff = mean - best;
  if (!(std > 1e-300)) return std::max(diff, 0.0);
  const double z = diff / std;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi);
  return std::max(0.0, diff * cdf + std * pdf);
}

}  // namespace w2vt
