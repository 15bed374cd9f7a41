#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pathchaos/errors.hpp"
#include "pathchaos/rng.hpp"

namespace pathchaos {

// Eigenvalues of sigma * sigma^T at or below this are treated as degenerate.
inline constexpr double kDegenerateLambda = 1e-10;

enum class KernelKind { zero, constant, sine_force, gauss_bump, linear };

// Interaction force K: R^d -> R^d.
//
// Zero        K(x) = 0
// Constant    K(x) = c
// SineForce   K(x) = amplitude * (sin(frequency * x_1), ..., sin(frequency * x_d))
// GaussBump   K(x) = amplitude * x * exp(-|x|^2)
// Linear      K(x) = -slope * x   (unbounded, for the Gaussian oracle only)
class KernelSpec {
 public:
  static KernelSpec zero();
  static KernelSpec constant(std::vector<double> c);
  static KernelSpec sine_force(double amplitude, double frequency);
  static KernelSpec gauss_bump(double amplitude);
  static KernelSpec linear(double slope);

  KernelKind kind() const { return kind_; }
  bool bounded() const { return kind_ != KernelKind::linear; }
  const std::vector<double>& constant_value() const { return c_; }
  double amplitude() const { return amplitude_; }
  double frequency() const { return frequency_; }
  double slope() const { return slope_; }
  std::string name() const;
  // Canonical text description, used in provenance and config hashes.
  std::string describe() const;

 private:
  KernelKind kind_ = KernelKind::zero;
  std::vector<double> c_;
  double amplitude_ = 0.0;
  double frequency_ = 0.0;
  double slope_ = 0.0;
};

void kernel_eval(const KernelSpec& k, std::span<const double> x, std::span<double> out);
std::vector<double> kernel_eval(const KernelSpec& k, std::span<const double> x);

// Analytic sup-norm of K on R^d. Throws UnboundedKernel for Linear.
double kernel_sup_norm(const KernelSpec& k, std::size_t d);

// Smallest eigenvalue of sigma * sigma^T. Throws DegenerateDiffusion at or below 1e-10.
double lambda_min_of(const Eigen::MatrixXd& sigma);

class SystemParams {
 public:
  // Validates m > 0, gamma >= 0 and lambda_min > 1e-10.
  static SystemParams make(const Eigen::MatrixXd& sigma, double mass = 1.0, double gamma = 0.0);
  // Skips the non-degeneracy check. Engine-only: KL operations call require_nondegenerate().
  static SystemParams make_degenerate(const Eigen::MatrixXd& sigma, double mass = 1.0,
                                      double gamma = 0.0);
  // sigma = scale * I_d
  static SystemParams isotropic(std::size_t d, double scale, double mass = 1.0, double gamma = 0.0);

  std::size_t d() const { return d_; }
  std::size_t d_prime() const { return d_prime_; }
  double mass() const { return mass_; }
  double gamma() const { return gamma_; }
  const Eigen::MatrixXd& sigma() const { return sigma_; }
  const Eigen::MatrixXd& lambda_mat() const { return lambda_mat_; }
  double lambda_min() const { return lambda_min_; }
  // sigma^T Lambda^{-1}, the d' x d weighting of the drift mismatch.
  const Eigen::MatrixXd& mismatch_weight() const { return weight_; }

  void require_nondegenerate() const;
  std::string describe() const;

 private:
  static SystemParams build(const Eigen::MatrixXd& sigma, double mass, double gamma, bool check);

  std::size_t d_ = 0;
  std::size_t d_prime_ = 0;
  double mass_ = 1.0;
  double gamma_ = 0.0;
  Eigen::MatrixXd sigma_;
  Eigen::MatrixXd lambda_mat_;
  Eigen::MatrixXd weight_;
  double lambda_min_ = 0.0;
};

class TimeGrid {
 public:
  static TimeGrid make(double horizon, double dt);

  double horizon() const { return horizon_; }
  double dt() const { return dt_; }
  std::size_t n_steps() const { return n_steps_; }
  double time(std::size_t step) const { return static_cast<double>(step) * dt_; }
  // Step index nearest to t. Throws InvalidParameter outside [0, T].
  std::size_t step_at(double t) const;

  // Grids agree when they share dt and the step count.
  friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
    return a.dt_ == b.dt_ && a.n_steps_ == b.n_steps_;
  }

 private:
  double horizon_ = 0.0;
  double dt_ = 0.0;
  std::size_t n_steps_ = 0;
};

enum class InitialLawKind { gaussian_iid, deterministic_point, empirical };

// Per-particle initial law; particles are always drawn i.i.d. (chaotic data).
// The state is x for first-order systems and (x, v) for second-order ones.
class InitialLaw {
 public:
  static InitialLaw gaussian(Eigen::VectorXd mean, const Eigen::MatrixXd& covariance);
  static InitialLaw point(Eigen::VectorXd state);
  // Whitespace-separated rows, one state per line; '#' starts a comment.
  static InitialLaw empirical_file(const std::string& path);
  static InitialLaw empirical(std::vector<double> rows, std::size_t dim);

  InitialLawKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  std::string describe() const;

  void sample(const KeyedStream& stream, std::span<double> out) const;

 private:
  InitialLawKind kind_ = InitialLawKind::deterministic_point;
  std::size_t dim_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd factor_;
  std::vector<double> rows_;
  std::string source_;
};

}  // namespace pathchaos
