#include "pathchaos/config.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

namespace pathchaos {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(key + ": trailing characters in '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v[0] == '-') throw ConfigError(key + ": expected a nonnegative integer");
  std::size_t pos = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(key + ": trailing characters in '" + v + "'");
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v, ',')) out.push_back(parse_double(key, item));
  return out;
}

Eigen::MatrixXd parse_sigma(const std::string& v, std::size_t d) {
  const auto rows = split(v, ';');
  if (rows.empty()) throw ConfigError("system.sigma is empty");
  if (rows.size() == 1 && split(rows[0], ' ').size() == 1) {
    return parse_double("system.sigma", rows[0]) *
           Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  }
  std::vector<std::vector<double>> vals;
  for (const auto& r : rows) {
    std::vector<double> row;
    for (const auto& item : split(r, ' ')) row.push_back(parse_double("system.sigma", item));
    vals.push_back(std::move(row));
  }
  Eigen::MatrixXd m(vals.size(), vals[0].size());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (vals[i].size() != vals[0].size()) throw ConfigError("system.sigma rows differ in length");
    for (std::size_t j = 0; j < vals[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = vals[i][j];
  }
  return m;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>)
      out += num(v[i]);
    else
      out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

SystemParams ExperimentConfig::system_params() const {
  if (static_cast<std::size_t>(sigma.rows()) != d)
    throw ConfigError("sigma has " + std::to_string(sigma.rows()) + " rows but d = " + std::to_string(d));
  return SystemParams::make(sigma, mass, gamma);
}

KernelSpec ExperimentConfig::kernel_spec() const {
  if (kernel == "zero") return KernelSpec::zero();
  if (kernel == "constant") {
    if (constant_value.size() == 1 && d > 1) return KernelSpec::constant(std::vector<double>(d, constant_value[0]));
    return KernelSpec::constant(constant_value);
  }
  if (kernel == "sine") return KernelSpec::sine_force(amplitude, frequency);
  if (kernel == "gauss_bump") return KernelSpec::gauss_bump(amplitude);
  if (kernel == "linear") return KernelSpec::linear(slope);
  throw ConfigError("unknown kernel variant '" + kernel + "'");
}

ParticleModel ExperimentConfig::model() const {
  return ParticleModel{order, system_params(), kernel_spec(), {}};
}

InitialLaw ExperimentConfig::initial_law() const {
  const auto dd = static_cast<Eigen::Index>(d);
  const Eigen::Index dim = order == Order::second ? 2 * dd : dd;
  if (init_law == "file") return InitialLaw::empirical_file(init_file);
  Eigen::VectorXd mean(dim);
  Eigen::VectorXd var(dim);
  mean.head(dd).setConstant(init_mean);
  var.head(dd).setConstant(init_variance);
  if (order == Order::second) {
    mean.tail(dd).setConstant(init_velocity_mean);
    var.tail(dd).setConstant(init_velocity_variance);
  }
  if (init_law == "point") return InitialLaw::point(mean);
  if (init_law == "gaussian") return InitialLaw::gaussian(mean, var.asDiagonal().toDenseMatrix());
  throw ConfigError("unknown initial law '" + init_law + "'");
}

TimeGrid ExperimentConfig::grid() const { return TimeGrid::make(horizon, dt); }

std::size_t ExperimentConfig::effective_cloud_size() const {
  return cloud_size != 0 ? cloud_size : std::max<std::size_t>(10000, 10 * n_particles);
}

void ExperimentConfig::validate() const {
  if (d == 0) throw ConfigError("system.d must be positive");
  if (n_particles < 2) throw TooFewParticles("system.N must be at least 2");
  if (realizations == 0) throw ConfigError("montecarlo.realizations must be positive");
  model();
  const InitialLaw init = initial_law();
  if (init.dim() != (order == Order::second ? 2 * d : d))
    throw ConfigError("initial law dimension does not match the state dimension");
  grid();
  if (effective_cloud_size() < 100) throw ConfigError("meanfield.M must be at least 100");
  if (eta && !(*eta > 0.0)) throw ConfigError("bounds.eta must be positive");
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream o;
  o << "scenario=" << scenario << "\n";
  o << "order=" << static_cast<int>(order) << "\nN=" << n_particles << "\nd=" << d
    << "\nm=" << num(mass) << "\ngamma=" << num(gamma) << "\nsigma=";
  for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
    if (i) o << ";";
    for (Eigen::Index j = 0; j < sigma.cols(); ++j) o << (j ? " " : "") << num(sigma(i, j));
  }
  o << "\ninit=" << init_law << " " << num(init_mean) << " " << num(init_variance) << " "
    << num(init_velocity_mean) << " " << num(init_velocity_variance) << " " << init_file;
  o << "\nkernel=" << kernel << " " << num(amplitude) << " " << num(frequency) << " " << num(slope)
    << " " << join(constant_value);
  o << "\nM=" << effective_cloud_size() << "\nrefine_iters=" << refine_iters;
  o << "\nT=" << num(horizon) << "\ndt=" << num(dt);
  o << "\nrealizations=" << realizations << "\nmaster_seed=" << master_seed;
  o << "\neta=" << (eta ? num(*eta) : std::string("default"));
  o << "\nsweep_N=" << join(sweep_n) << "\nsweep_m=" << join(sweep_m) << "\nsweep_T=" << join(sweep_t)
    << "\nsweep_eta=" << join(sweep_eta) << "\n";
  return o.str();
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig cfg) {
  std::string line, section;
  std::string sigma_text;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash_pos = line.find('#'); hash_pos != std::string::npos) line.resize(hash_pos);
    line = trim(line);
    // ';' also separates sigma rows, so it only comments out whole lines.
    if (line.empty() || line.front() == ';') continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    const std::string full = section + "." + key;
    auto size = [&] { return static_cast<std::size_t>(parse_u64(full, val)); };
    auto real = [&] { return parse_double(full, val); };

    if (full == ".scenario" || full == "scenario.name") cfg.scenario = val;
    else if (full == "system.order") {
      const auto o = parse_u64(full, val);
      if (o != 1 && o != 2) throw ConfigError(where + "system.order must be 1 or 2");
      cfg.order = static_cast<Order>(o);
    }
    else if (full == "system.N") cfg.n_particles = size();
    else if (full == "system.d") cfg.d = size();
    else if (full == "system.m") cfg.mass = real();
    else if (full == "system.gamma") cfg.gamma = real();
    else if (full == "system.sigma") sigma_text = val;
    else if (full == "initial.law") cfg.init_law = val;
    else if (full == "initial.mean") cfg.init_mean = real();
    else if (full == "initial.variance") cfg.init_variance = real();
    else if (full == "initial.velocity_mean") cfg.init_velocity_mean = real();
    else if (full == "initial.velocity_variance") cfg.init_velocity_variance = real();
    else if (full == "initial.file") cfg.init_file = val;
    else if (full == "kernel.variant") cfg.kernel = val;
    else if (full == "kernel.amplitude") cfg.amplitude = real();
    else if (full == "kernel.frequency") cfg.frequency = real();
    else if (full == "kernel.slope") cfg.slope = real();
    else if (full == "kernel.value") cfg.constant_value = parse_list(full, val);
    else if (full == "meanfield.M") cfg.cloud_size = size();
    else if (full == "meanfield.refine_iters") cfg.refine_iters = size();
    else if (full == "integration.T") cfg.horizon = real();
    else if (full == "integration.dt") cfg.dt = real();
    else if (full == "montecarlo.realizations") cfg.realizations = size();
    else if (full == "montecarlo.master_seed") cfg.master_seed = parse_u64(full, val);
    else if (full == "montecarlo.threads") cfg.threads = size();
    else if (full == "bounds.eta") {
      if (val.empty() || val == "default") cfg.eta.reset();
      else cfg.eta = real();
    }
    else if (full == "sweep.N") {
      cfg.sweep_n.clear();
      for (double v : parse_list(full, val)) {
        if (v < 2 || v != static_cast<double>(static_cast<std::size_t>(v)))
          throw ConfigError(where + "sweep.N entries must be integers >= 2");
        cfg.sweep_n.push_back(static_cast<std::size_t>(v));
      }
    }
    else if (full == "sweep.m") cfg.sweep_m = parse_list(full, val);
    else if (full == "sweep.T") cfg.sweep_t = parse_list(full, val);
    else if (full == "sweep.eta") cfg.sweep_eta = parse_list(full, val);
    else if (full == "output.directory") cfg.out_dir = val;
    else if (full == "output.formats") {
      cfg.write_csv = cfg.write_json = false;
      for (const auto& f : split(val, ',')) {
        if (f == "csv") cfg.write_csv = true;
        else if (f == "json") cfg.write_json = true;
        else throw ConfigError(where + "unknown output format '" + f + "'");
      }
    }
    else throw ConfigError(where + "unknown key '" + full + "'");
  }
  if (!sigma_text.empty()) cfg.sigma = parse_sigma(sigma_text, cfg.d);
  else if (cfg.sigma.size() == 1 && cfg.d > 1)
    cfg.sigma = parse_sigma(num(cfg.sigma(0, 0)), cfg.d);
  return cfg;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  return parse_config(in, std::move(base));
}

}  // namespace pathchaos
