#include "pathchaos/model.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace pathchaos {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw InvalidParameter(std::string(what) + " must be finite");
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

KernelSpec KernelSpec::zero() { return KernelSpec{}; }

KernelSpec KernelSpec::constant(std::vector<double> c) {
  if (c.empty()) throw InvalidParameter("constant kernel needs a non-empty vector");
  for (double v : c) require_finite(v, "constant kernel entry");
  KernelSpec k;
  k.kind_ = KernelKind::constant;
  k.c_ = std::move(c);
  return k;
}

KernelSpec KernelSpec::sine_force(double amplitude, double frequency) {
  require_finite(amplitude, "sine amplitude");
  require_finite(frequency, "sine frequency");
  if (amplitude < 0.0) throw InvalidParameter("sine amplitude must be nonnegative");
  KernelSpec k;
  k.kind_ = KernelKind::sine_force;
  k.amplitude_ = amplitude;
  k.frequency_ = frequency;
  return k;
}

KernelSpec KernelSpec::gauss_bump(double amplitude) {
  require_finite(amplitude, "gauss bump amplitude");
  if (amplitude < 0.0) throw InvalidParameter("gauss bump amplitude must be nonnegative");
  KernelSpec k;
  k.kind_ = KernelKind::gauss_bump;
  k.amplitude_ = amplitude;
  return k;
}

KernelSpec KernelSpec::linear(double slope) {
  require_finite(slope, "linear slope");
  if (slope < 0.0) throw InvalidParameter("linear slope must be nonnegative");
  KernelSpec k;
  k.kind_ = KernelKind::linear;
  k.slope_ = slope;
  return k;
}

std::string KernelSpec::name() const {
  switch (kind_) {
    case KernelKind::zero: return "zero";
    case KernelKind::constant: return "constant";
    case KernelKind::sine_force: return "sine";
    case KernelKind::gauss_bump: return "gauss_bump";
    case KernelKind::linear: return "linear";
  }
  return "unknown";
}

std::string KernelSpec::describe() const {
  std::ostringstream os;
  os << name();
  switch (kind_) {
    case KernelKind::zero: break;
    case KernelKind::constant:
      os << "(c=";
      for (std::size_t i = 0; i < c_.size(); ++i) os << (i ? "," : "") << fmt_double(c_[i]);
      os << ")";
      break;
    case KernelKind::sine_force:
      os << "(amplitude=" << fmt_double(amplitude_) << ",frequency=" << fmt_double(frequency_)
         << ")";
      break;
    case KernelKind::gauss_bump: os << "(amplitude=" << fmt_double(amplitude_) << ")"; break;
    case KernelKind::linear: os << "(slope=" << fmt_double(slope_) << ")"; break;
  }
  return os.str();
}

void kernel_eval(const KernelSpec& k, std::span<const double> x, std::span<double> out) {
  if (out.size() != x.size()) throw DimensionMismatch("kernel output size differs from input");
  switch (k.kind()) {
    case KernelKind::zero:
      for (double& o : out) o = 0.0;
      return;
    case KernelKind::constant: {
      const auto& c = k.constant_value();
      if (c.size() != x.size()) throw DimensionMismatch("constant kernel dimension mismatch");
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = c[i];
      return;
    }
    case KernelKind::sine_force:
      for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = k.amplitude() * std::sin(k.frequency() * x[i]);
      return;
    case KernelKind::gauss_bump: {
      double r2 = 0.0;
      for (double v : x) r2 += v * v;
      const double w = k.amplitude() * std::exp(-r2);
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = w * x[i];
      return;
    }
    case KernelKind::linear:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = -k.slope() * x[i];
      return;
  }
}

std::vector<double> kernel_eval(const KernelSpec& k, std::span<const double> x) {
  std::vector<double> out(x.size());
  kernel_eval(k, x, out);
  return out;
}

double kernel_sup_norm(const KernelSpec& k, std::size_t d) {
  switch (k.kind()) {
    case KernelKind::zero: return 0.0;
    case KernelKind::constant: {
      double s = 0.0;
      for (double v : k.constant_value()) s += v * v;
      return std::sqrt(s);
    }
    case KernelKind::sine_force:
      return k.frequency() == 0.0 ? 0.0 : k.amplitude() * std::sqrt(static_cast<double>(d));
    case KernelKind::gauss_bump:
      // sup_{r >= 0} r exp(-r^2) is attained at r = 1/sqrt(2)
      return k.amplitude() / std::sqrt(2.0 * std::numbers::e);
    case KernelKind::linear:
      throw UnboundedKernel("linear kernel has no finite sup-norm (oracle-only variant)");
  }
  return 0.0;
}

double lambda_min_of(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() == 0 || sigma.cols() == 0) throw DimensionMismatch("sigma is empty");
  const Eigen::MatrixXd lam = sigma * sigma.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lam, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  if (!(lmin > kDegenerateLambda))
    throw DegenerateDiffusion("sigma * sigma^T has smallest eigenvalue " + fmt_double(lmin));
  return lmin;
}

SystemParams SystemParams::build(const Eigen::MatrixXd& sigma, double mass, double gamma,
                                 bool check) {
  if (sigma.rows() == 0 || sigma.cols() == 0) throw DimensionMismatch("sigma is empty");
  if (!sigma.allFinite()) throw InvalidParameter("sigma must be finite");
  require_finite(mass, "mass");
  require_finite(gamma, "gamma");
  if (!(mass > 0.0)) throw InvalidParameter("mass must be positive");
  if (gamma < 0.0) throw InvalidParameter("gamma must be nonnegative");

  SystemParams p;
  p.d_ = static_cast<std::size_t>(sigma.rows());
  p.d_prime_ = static_cast<std::size_t>(sigma.cols());
  p.mass_ = mass;
  p.gamma_ = gamma;
  p.sigma_ = sigma;
  p.lambda_mat_ = sigma * sigma.transpose();
  p.lambda_mat_ = 0.5 * (p.lambda_mat_ + p.lambda_mat_.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.lambda_mat_, Eigen::EigenvaluesOnly);
  p.lambda_min_ = es.eigenvalues()(0);
  if (check) {
    if (!(p.lambda_min_ > kDegenerateLambda))
      throw DegenerateDiffusion("sigma * sigma^T has smallest eigenvalue " +
                                fmt_double(p.lambda_min_));
  }
  if (p.lambda_min_ > kDegenerateLambda) {
    p.weight_ = sigma.transpose() * p.lambda_mat_.llt().solve(
                                        Eigen::MatrixXd::Identity(p.lambda_mat_.rows(),
                                                                  p.lambda_mat_.cols()));
  }
  return p;
}

SystemParams SystemParams::make(const Eigen::MatrixXd& sigma, double mass, double gamma) {
  return build(sigma, mass, gamma, true);
}

SystemParams SystemParams::make_degenerate(const Eigen::MatrixXd& sigma, double mass,
                                           double gamma) {
  return build(sigma, mass, gamma, false);
}

SystemParams SystemParams::isotropic(std::size_t d, double scale, double mass, double gamma) {
  const auto n = static_cast<Eigen::Index>(d);
  return make(scale * Eigen::MatrixXd::Identity(n, n), mass, gamma);
}

void SystemParams::require_nondegenerate() const {
  if (!(lambda_min_ > kDegenerateLambda))
    throw DegenerateDiffusion("KL operations need a non-degenerate diffusion (lambda = " +
                              fmt_double(lambda_min_) + ")");
}

std::string SystemParams::describe() const {
  std::ostringstream os;
  os << "d=" << d_ << ",d_prime=" << d_prime_ << ",m=" << fmt_double(mass_)
     << ",gamma=" << fmt_double(gamma_) << ",sigma=[";
  for (Eigen::Index i = 0; i < sigma_.rows(); ++i) {
    if (i) os << ";";
    for (Eigen::Index j = 0; j < sigma_.cols(); ++j)
      os << (j ? "," : "") << fmt_double(sigma_(i, j));
  }
  os << "]";
  return os.str();
}

TimeGrid TimeGrid::make(double horizon, double dt) {
  require_finite(horizon, "horizon");
  require_finite(dt, "dt");
  if (!(horizon > 0.0)) throw InvalidParameter("horizon T must be positive");
  if (!(dt > 0.0)) throw InvalidParameter("time step dt must be positive");
  const double ratio = std::round(horizon / dt);
  if (ratio < 1.0) throw InvalidParameter("time grid needs at least one step");
  const auto n = static_cast<std::size_t>(ratio);
  if (std::abs(static_cast<double>(n) * dt - horizon) > 1e-12 * horizon)
    throw InvalidParameter("T is not an integer multiple of dt");
  TimeGrid g;
  g.horizon_ = horizon;
  g.dt_ = dt;
  g.n_steps_ = n;
  return g;
}

std::size_t TimeGrid::step_at(double t) const {
  if (!(t >= 0.0) || t > horizon_ * (1.0 + 1e-12))
    throw InvalidParameter("time " + fmt_double(t) + " outside [0, T]");
  const auto step = static_cast<std::size_t>(std::llround(t / dt_));
  return step > n_steps_ ? n_steps_ : step;
}

InitialLaw InitialLaw::gaussian(Eigen::VectorXd mean, const Eigen::MatrixXd& covariance) {
  const Eigen::Index n = mean.size();
  if (n == 0) throw DimensionMismatch("initial mean is empty");
  if (covariance.rows() != n || covariance.cols() != n)
    throw DimensionMismatch("initial covariance shape does not match the mean");
  if (!mean.allFinite() || !covariance.allFinite())
    throw InvalidParameter("initial law must be finite");
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw InvalidParameter("initial covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
  if (es.eigenvalues()(0) < -1e-12)
    throw InvalidParameter("initial covariance must be positive semidefinite");

  InitialLaw law;
  law.kind_ = InitialLawKind::gaussian_iid;
  law.dim_ = static_cast<std::size_t>(n);
  law.mean_ = std::move(mean);
  law.cov_ = covariance;
  // Symmetric square root handles the semidefinite case too.
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  law.factor_ = es.eigenvectors() * root.asDiagonal();
  return law;
}

InitialLaw InitialLaw::point(Eigen::VectorXd state) {
  if (state.size() == 0) throw DimensionMismatch("initial point is empty");
  if (!state.allFinite()) throw InvalidParameter("initial point must be finite");
  InitialLaw law;
  law.kind_ = InitialLawKind::deterministic_point;
  law.dim_ = static_cast<std::size_t>(state.size());
  law.cov_ = Eigen::MatrixXd::Zero(state.size(), state.size());
  law.mean_ = std::move(state);
  return law;
}

InitialLaw InitialLaw::empirical(std::vector<double> rows, std::size_t dim) {
  if (dim == 0 || rows.empty() || rows.size() % dim != 0)
    throw DimensionMismatch("empirical initial law needs a nonempty whole number of rows");
  for (double v : rows) require_finite(v, "empirical initial state");
  InitialLaw law;
  law.kind_ = InitialLawKind::empirical;
  law.dim_ = dim;
  law.rows_ = std::move(rows);
  return law;
}

InitialLaw InitialLaw::empirical_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open initial-state file " + path);
  std::vector<double> rows;
  std::size_t dim = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) throw ConfigError(path + ":" + std::to_string(lineno) + ": not a number");
    if (row.empty()) continue;
    if (dim == 0) dim = row.size();
    if (row.size() != dim)
      throw DimensionMismatch(path + ":" + std::to_string(lineno) + ": ragged row");
    rows.insert(rows.end(), row.begin(), row.end());
  }
  auto law = empirical(std::move(rows), dim);
  law.source_ = path;
  return law;
}

std::string InitialLaw::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case InitialLawKind::gaussian_iid:
      os << "gaussian(mean=[";
      for (Eigen::Index i = 0; i < mean_.size(); ++i) os << (i ? "," : "") << fmt_double(mean_(i));
      os << "],cov=[";
      for (Eigen::Index i = 0; i < cov_.rows(); ++i) {
        if (i) os << ";";
        for (Eigen::Index j = 0; j < cov_.cols(); ++j)
          os << (j ? "," : "") << fmt_double(cov_(i, j));
      }
      os << "])";
      break;
    case InitialLawKind::deterministic_point:
      os << "point([";
      for (Eigen::Index i = 0; i < mean_.size(); ++i) os << (i ? "," : "") << fmt_double(mean_(i));
      os << "])";
      break;
    case InitialLawKind::empirical:
      os << "empirical(rows=" << rows_.size() / dim_ << ",dim=" << dim_;
      if (!source_.empty()) os << ",path=" << source_;
      os << ")";
      break;
  }
  return os.str();
}

void InitialLaw::sample(const KeyedStream& stream, std::span<double> out) const {
  if (out.size() != dim_) throw DimensionMismatch("initial state size mismatch");
  switch (kind_) {
    case InitialLawKind::deterministic_point:
      for (std::size_t i = 0; i < dim_; ++i) out[i] = mean_(static_cast<Eigen::Index>(i));
      return;
    case InitialLawKind::gaussian_iid: {
      Eigen::VectorXd z(static_cast<Eigen::Index>(dim_));
      stream.gaussians(std::span<double>(z.data(), dim_));
      const Eigen::VectorXd x = mean_ + factor_ * z;
      for (std::size_t i = 0; i < dim_; ++i) out[i] = x(static_cast<Eigen::Index>(i));
      return;
    }
    case InitialLawKind::empirical: {
      const std::size_t n_rows = rows_.size() / dim_;
      const std::size_t r = stream.index(0, n_rows);
      for (std::size_t i = 0; i < dim_; ++i) out[i] = rows_[r * dim_ + i];
      return;
    }
  }
}

}  // namespace pathchaos
