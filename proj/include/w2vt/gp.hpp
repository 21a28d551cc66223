#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace w2vt {

/// Kernel and likelihood hyperparameters in standardised-output units.
struct GpHyper {
  std::vector<double> lengthscales;  // ARD, one per input dimension
  double signal_var = 1.0;
  double noise_var = 1e-2;
};

struct GpConfig {
  int restarts = 4;           // random restarts on top of the default start
  int max_iterations = 400;   // Nelder-Mead iterations per start
  double min_noise_var = 1e-6;
  double max_noise_var = 1.0;
  double min_lengthscale = 0.03;
  double max_lengthscale = 10.0;
  std::uint64_t seed = 1;
};

/// Matern-5/2 ARD Gaussian process on inputs in the unit cube with a constant
/// (generalised least squares) mean. Outputs are standardised internally;
/// predictions come back in the original units.
class GaussianProcess {
 public:
  struct Prediction {
    double mean = 0;
    double std = 0;
  };

  /// Fits hyperparameters by maximising the log marginal likelihood.
  /// Throws RuntimeFailure when no start yields a positive-definite kernel.
  void fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
           const GpConfig& cfg = {});

  /// Conditions on data with fixed hyperparameters.
  void condition(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                 const GpHyper& hyper);

  Prediction predict(std::span<const double> x) const;
  double log_marginal_likelihood() const { return lml_; }
  const GpHyper& hyper() const { return hyper_; }
  /// Noise standard deviation in original output units.
  double noise_std() const;
  std::size_t size() const { return x_.size(); }

  static double matern52(std::span<const double> a, std::span<const double> b,
                         std::span<const double> lengthscales, double signal_var);

 private:
  bool factorise();

  std::vector<std::vector<double>> x_;
  Eigen::VectorXd y_;  // standardised
  double y_mean_ = 0;
  double y_scale_ = 1;
  GpHyper hyper_;
  double const_mean_ = 0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double lml_ = 0;
};

/// Expected improvement for maximisation: (mu - best) Phi(z) + sigma phi(z).
double expected_improvement(double mean, double std, double best);

}  // namespace w2vt
