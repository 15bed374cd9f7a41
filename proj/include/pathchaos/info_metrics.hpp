#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pathchaos/engine.hpp"
#include "pathchaos/gaussian_oracle.hpp"
#include "pathchaos/girsanov.hpp"
#include "pathchaos/parallel.hpp"

namespace pathchaos {

// Off-support divergences are reported as this value instead of throwing.
inline constexpr double kInfiniteDivergence = std::numeric_limits<double>::infinity();

class DiscreteMeasure {
 public:
  // Labels default to "0", "1", ...; probabilities must be >= 0 and sum to 1 within 1e-12.
  static DiscreteMeasure make(std::vector<double> probs, std::vector<std::string> labels = {});

  std::size_t size() const { return probs_.size(); }
  const std::vector<double>& probs() const { return probs_; }
  const std::vector<std::string>& labels() const { return labels_; }
  double operator[](std::size_t i) const { return probs_[i]; }

 private:
  std::vector<double> probs_;
  std::vector<std::string> labels_;
};

// Row-stochastic matrix: row x is the law of Y given X = x.
class Channel {
 public:
  static Channel make(Eigen::MatrixXd p);
  static Channel identity(std::size_t n);

  std::size_t inputs() const { return static_cast<std::size_t>(p_.rows()); }
  std::size_t outputs() const { return static_cast<std::size_t>(p_.cols()); }
  const Eigen::MatrixXd& matrix() const { return p_; }
  DiscreteMeasure push(const DiscreteMeasure& m) const;

 private:
  Eigen::MatrixXd p_;
};

enum class FDivergence { kl, tv, chi2 };

std::string to_string(FDivergence f);

// sum_y Q(y) f(P(y)/Q(y)) with 0 f(0/0) = 0; +inf when P is not dominated by Q (kl, chi2).
double f_divergence(const DiscreteMeasure& p, const DiscreteMeasure& q, FDivergence f);

struct InequalityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

// lhs = divergence after the channel, rhs = divergence before it.
InequalityCheck dpi_check(const DiscreteMeasure& p, const DiscreteMeasure& q, const Channel& ch,
                          FDivergence f);

class GaussianMeasure {
 public:
  // Covariance must be symmetric with smallest eigenvalue > 1e-12.
  static GaussianMeasure make(Eigen::VectorXd mean, Eigen::MatrixXd cov);
  static GaussianMeasure scalar(double mean, double variance);

  std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
};

double gaussian_kl(const GaussianMeasure& p, const GaussianMeasure& q);
// Law of X + Z with Z ~ N(0, noise_cov) independent of X.
GaussianMeasure add_gaussian_noise(const GaussianMeasure& p, const Eigen::MatrixXd& noise_cov);
// Exact total variation between two 1-d Gaussians.
double gaussian_tv_1d(double mean_p, double var_p, double mean_q, double var_q);

// lhs = int F d rho, rhs = (KL(rho || rho~) + log int exp(eta F) d rho~) / eta.
// Throws InvalidParameter when rho is not dominated by rho~.
InequalityCheck fenchel_young_check(const DiscreteMeasure& rho, const DiscreteMeasure& rho_tilde,
                                    std::span<const double> f_values, double eta);

struct ScalingCheck {
  double per_k = 0.0;  // KL(mu^{n:k} || mubar^k) / k
  double per_n = 0.0;  // KL(mu^n || mubar^n) / n
  bool holds = false;
};

ScalingCheck linear_scaling_check(const ExchangeableGaussian& joint, const MeanFieldGaussian& ref,
                                  std::size_t k);
// Dense form: joint is a Gaussian on (R^b)^n, verified exchangeable to 1e-10.
ScalingCheck linear_scaling_check(const GaussianMeasure& joint, std::size_t n,
                                  const GaussianMeasure& ref, std::size_t k);

// Upper bound on TV from KL: sqrt(kl / 2).
double pinsker_tv(double kl);

// k-NN relative entropy estimate of KL(P || Q); samples are (point, coordinate), d <= 4.
double knn_kl_estimate(std::span<const double> samples_p, std::span<const double> samples_q,
                       std::size_t d, std::size_t k = 1, std::uint64_t jitter_seed = 0);

struct FuzzSummary {
  std::size_t cases = 0;
  std::size_t violations = 0;
  double max_excess = -std::numeric_limits<double>::infinity();  // max(lhs - rhs)
};

// Random P, Q on `states` points and a random row-stochastic channel per case.
FuzzSummary dpi_fuzz(std::size_t cases, std::size_t states, FDivergence f, std::uint64_t seed);
// Random rho, rho~ with full support, random F in [-3, 3] and eta in [0.1, 3] per case.
FuzzSummary fenchel_young_fuzz(std::size_t cases, std::size_t states, std::uint64_t seed);
// Random DiscreteMeasure with full support, drawn from a keyed stream.
DiscreteMeasure random_measure(const KeyedStream& stream, std::size_t states,
                               std::uint64_t counter0 = 0);

struct ConcentrationReport {
  double eta = 0.0;
  std::size_t n_particles = 0;
  std::size_t resamples = 0;
  double time = 0.0;
  double moment = 0.0;  // empirical mean of exp(S)
  double moment_se = 0.0;
  double bound = 0.0;
  bool holds = false;
};

// Resamples N-tuples i.i.d. from the cloud snapshot at t and averages exp(S) with
// S = (eta/(N-1)) sum_{j1 != j2, both != i} A_{i,j1} . A_{i,j2},
// A_{i,j} = K(X_i - X_j) - K * rho(X_i).
ConcentrationReport concentration_suite(const ReferenceCloud& cloud, const KernelSpec& kernel,
                                        double t, std::size_t n, double eta,
                                        std::size_t resamples, const RngPolicy& rng,
                                        std::size_t threads = 1);

// Martingale differences D_k = A_{i,k} . sum_{j<k} A_{i,j}, k = 1..terms, with X_i and the
// X_j resampled from the cloud at t. Returns (sample, term) row-major.
std::vector<double> mz_increments(const ReferenceCloud& cloud, const KernelSpec& kernel, double t,
                                  std::size_t terms, std::size_t samples, const RngPolicy& rng);

struct MzCheck {
  std::size_t p = 0;
  double lhs = 0.0;  // || sum_k D_k ||_p^2
  double rhs = 0.0;  // (p - 1) sum_k || D_k ||_p^2
  double se = 0.0;
  bool holds = false;
};

// increments are (sample, term) row-major; p must be even and >= 2.
MzCheck mz_inequality_check(std::span<const double> increments, std::size_t terms, std::size_t p);

}  // namespace pathchaos
