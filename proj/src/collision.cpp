#include "rwis/collision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rwis/stattest.hpp"

namespace rwis {

namespace {

double clamp_lambda(double v) {
  return std::clamp(v, kLambdaClamp, 1.0 - kLambdaClamp);
}

}  // namespace

CollisionKernel CollisionKernel::uniform_energy() {
  CollisionKernel k;
  k.kind_ = EnergyKernelKind::Uniform;
  return k;
}

CollisionKernel CollisionKernel::sticky_beta(double kappa) {
  if (!(kappa >= 0.0)) throw std::invalid_argument("sticky_beta: kappa must be >= 0");
  CollisionKernel k;
  k.kind_ = EnergyKernelKind::StickyBeta;
  k.kappa_ = kappa;
  return k;
}

CollisionKernel CollisionKernel::deterministic_swap() {
  CollisionKernel k;
  k.kind_ = EnergyKernelKind::Swap;
  return k;
}

CollisionKernel CollisionKernel::tabulated(TabulatedKernel table) {
  if (table.bins <= 0 || table.row_cdf.size() != static_cast<std::size_t>(table.bins) * table.bins) {
    throw std::invalid_argument("tabulated kernel: bad table shape");
  }
  CollisionKernel k;
  k.kind_ = EnergyKernelKind::Tabulated;
  k.table_ = std::move(table);
  return k;
}

CollisionKernel CollisionKernel::tabulated_from_csv(const std::string& path, int bins) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open kernel CSV '" + path + "'");
  std::vector<double> mass(static_cast<std::size_t>(bins) * bins, 0.0);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.find_first_not_of("0123456789.,eE+- \t\r") != std::string::npos) {
      continue;  // header row
    }
    std::istringstream ls(line);
    std::string cell;
    double vals[3];
    for (int c = 0; c < 3; ++c) {
      if (!std::getline(ls, cell, ',')) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": need 3 columns");
      }
      vals[c] = std::stod(cell);
    }
    const int i = static_cast<int>(vals[0]);
    const int j = static_cast<int>(vals[1]);
    if (i < 0 || i >= bins || j < 0 || j >= bins || vals[2] < 0.0) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bin out of range or negative mass");
    }
    mass[static_cast<std::size_t>(i) * bins + j] += vals[2];
  }
  TabulatedKernel t;
  t.bins = bins;
  t.row_cdf.resize(mass.size());
  for (int i = 0; i < bins; ++i) {
    double row = 0.0;
    for (int j = 0; j < bins; ++j) row += mass[static_cast<std::size_t>(i) * bins + j];
    if (!(row > 0.0)) {
      throw std::runtime_error(path + ": row " + std::to_string(i) + " of kernel has zero mass");
    }
    double acc = 0.0;
    for (int j = 0; j < bins; ++j) {
      acc += mass[static_cast<std::size_t>(i) * bins + j] / row;
      t.row_cdf[static_cast<std::size_t>(i) * bins + j] = acc;
    }
    t.row_cdf[static_cast<std::size_t>(i) * bins + (bins - 1)] = 1.0;
  }
  return tabulated(std::move(t));
}

double CollisionKernel::sample_energy(double lambda_minus, Rng& rng) const {
  switch (kind_) {
    case EnergyKernelKind::Uniform:
      // lambda_+^2 ~ Uniform(0,1), independent of lambda_-.
      return clamp_lambda(std::sqrt(rng.uniform()));
    case EnergyKernelKind::StickyBeta: {
      const double e = lambda_minus * lambda_minus;
      const double v = rng.beta(kappa_ * e + 1.0, kappa_ * (1.0 - e) + 1.0);
      return clamp_lambda(std::sqrt(v));
    }
    case EnergyKernelKind::Swap:
      return clamp_lambda(std::sqrt(std::max(0.0, 1.0 - lambda_minus * lambda_minus)));
    case EnergyKernelKind::Tabulated: {
      const int bins = table_.bins;
      int i = static_cast<int>(lambda_minus * bins);
      i = std::clamp(i, 0, bins - 1);
      const double r = rng.uniform();
      const auto row = table_.row_cdf.begin() + static_cast<std::ptrdiff_t>(i) * bins;
      const int j = static_cast<int>(std::lower_bound(row, row + bins, r) - row);
      return clamp_lambda((j + rng.uniform()) / bins);
    }
  }
  throw std::logic_error("sample_energy: unreachable");
}

std::optional<std::function<double(double)>> CollisionKernel::stationary_cdf() const {
  if (kind_ == EnergyKernelKind::Uniform) {
    return [](double x) { return std::clamp(x, 0.0, 1.0) * std::clamp(x, 0.0, 1.0); };
  }
  return std::nullopt;
}

std::optional<std::function<double(double)>> CollisionKernel::stationary_density() const {
  if (kind_ == EnergyKernelKind::Uniform) {
    return [](double x) { return (x >= 0.0 && x <= 1.0) ? 2.0 * x : 0.0; };
  }
  return std::nullopt;
}

bool CollisionKernel::has_closed_form() const { return kind_ == EnergyKernelKind::Uniform; }

std::string CollisionKernel::describe() const {
  switch (kind_) {
    case EnergyKernelKind::Uniform:
      return "uniform-energy";
    case EnergyKernelKind::StickyBeta:
      return "sticky-beta(kappa=" + std::to_string(kappa_) + ")";
    case EnergyKernelKind::Swap:
      return "deterministic-swap";
    case EnergyKernelKind::Tabulated:
      return "tabulated(" + std::to_string(table_.bins) + " bins)";
  }
  return "?";
}

double sample_stationary_energy(const CollisionKernel& kernel, Rng& rng) {
  if (!kernel.has_closed_form()) {
    throw std::invalid_argument("sample_stationary_energy: kernel has no closed-form rho_s");
  }
  return clamp_lambda(std::sqrt(rng.uniform()));
}

CollisionSampler::CollisionSampler(const CollisionKernel& kernel, const RWwISModel& model)
    : kernel_(kernel), states_(model.states()) {
  if (kernel.direction_law == DirectionLaw::Stationary && states_ > 1) {
    // Molecular chaos: incoming directions forgotten, outgoing from rho.
    const Vector rho = stationary(model);
    rho_cdf_.resize(states_);
    double acc = 0.0;
    for (int i = 0; i < states_; ++i) {
      acc += rho(i);
      rho_cdf_[i] = acc;
    }
    rho_cdf_[states_ - 1] = 1.0;
  }
}

CollisionOutcome CollisionSampler::sample(double lambda_minus, Rng& rng) const {
  if (!(lambda_minus >= 0.0 && lambda_minus <= 1.0)) {
    throw std::invalid_argument("sample_collision: lambda_- outside [0,1]");
  }
  CollisionOutcome out;
  out.lambda_plus = kernel_.sample_energy(lambda_minus, rng);

  if (rho_cdf_.empty()) {
    out.direction1 = static_cast<int>(rng.below(states_));
    out.direction2 = static_cast<int>(rng.below(states_));
  } else {
    auto draw = [&]() {
      const double r = rng.uniform();
      return static_cast<int>(std::lower_bound(rho_cdf_.begin(), rho_cdf_.end(), r) -
                              rho_cdf_.begin());
    };
    out.direction1 = draw();
    out.direction2 = draw();
  }

  // Displacements: uniform over {0,+-e1,+-e2}^2 minus the pair where nobody
  // moves (a collision is a jump event).
  static constexpr int kZ[5][2] = {{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  const std::uint64_t idx = rng.below(24) + 1;  // skip (0,0)
  out.z1 = LatticeVector(kZ[idx / 5][0], kZ[idx / 5][1]);
  out.z2 = LatticeVector(kZ[idx % 5][0], kZ[idx % 5][1]);
  return out;
}

CollisionOutcome sample_collision(const CollisionKernel& kernel, const RWwISModel& model,
                                  double lambda_minus, Rng& rng) {
  return CollisionSampler(kernel, model).sample(lambda_minus, rng);
}

StationaryEnergy stationary_energy(const EnergyChain& chain, StationaryMethod method,
                                   long long n, std::uint64_t seed) {
  StationaryEnergy out;
  if (method == StationaryMethod::ClosedForm) {
    const auto cdf = chain.kernel.stationary_cdf();
    if (!cdf) {
      throw std::invalid_argument("stationary_energy: no closed form registered for " +
                                  chain.kernel.describe());
    }
    out.closed_form = true;
    out.cdf = *cdf;
    return out;
  }
  if (n < 10000) throw std::invalid_argument("stationary_energy: long-run estimate needs n >= 1e4");

  auto run = [&](double start, std::uint64_t stream) {
    Rng rng(seed, stream);
    std::vector<double> path;
    path.reserve(static_cast<std::size_t>(n - n / 10));
    double lam = start;
    for (long long i = 0; i < n; ++i) {
      lam = chain.kernel.sample_energy(lam, rng);
      if (i >= n / 10) path.push_back(lam);
    }
    return path;
  };
  out.sample = run(0.1, 0);
  const std::vector<double> other = run(0.9, 1);
  out.two_start_ks = ks_two_sample(out.sample, other);
  const double n1 = static_cast<double>(out.sample.size());
  const double n2 = static_cast<double>(other.size());
  const double se = std::sqrt((n1 + n2) / (n1 * n2));
  out.diagnostic_flagged = out.two_start_ks > 3.0 * se;
  return out;
}

long long transient_mixture_order(double return_probability, double tol) {
  if (!(return_probability >= 0.0 && return_probability < 1.0)) {
    throw std::invalid_argument("transient_mixture: return probability must lie in [0,1)");
  }
  if (return_probability == 0.0) return 0;
  const double n = std::log(tol) / std::log(return_probability) - 1.0;
  return std::max<long long>(0, static_cast<long long>(std::ceil(n)));
}

TransientMixture transient_mixture(const EnergyChain& chain, double return_probability,
                                   double lambda0, long long n_max, long long draws,
                                   std::uint64_t seed) {
  if (!(return_probability >= 0.0 && return_probability < 1.0)) {
    throw std::invalid_argument("transient_mixture: return probability must lie in [0,1)");
  }
  const double truncated = std::pow(return_probability, static_cast<double>(n_max) + 1.0);
  if (truncated > 1e-9) {
    throw std::invalid_argument("transient_mixture: n_max leaves " + std::to_string(truncated) +
                                " geometric mass unaccounted (> 1e-9)");
  }
  TransientMixture out;
  out.n_max = n_max;
  out.truncated_mass = truncated;
  out.sample.resize(draws);
  Rng rng(seed, 0xACC0);
  for (long long d = 0; d < draws; ++d) {
    long long steps = 0;
    while (steps < n_max && rng.uniform() < return_probability) ++steps;
    double lam = lambda0;
    for (long long i = 0; i < steps; ++i) lam = chain.kernel.sample_energy(lam, rng);
    out.sample[d] = lam;
  }
  return out;
}

ErgodicityDiagnostic ergodicity_diagnostic(const EnergyChain& chain, double lambda0_a,
                                           double lambda0_b, std::vector<long long> n_grid,
                                           long long paths, std::uint64_t seed) {
  if (lambda0_a == lambda0_b) {
    throw std::invalid_argument("ergodicity_diagnostic: starts must differ");
  }
  std::sort(n_grid.begin(), n_grid.end());
  ErgodicityDiagnostic out;
  out.n_grid = n_grid;

  const long long n_max = n_grid.back();
  std::vector<std::vector<double>> at_a(n_grid.size()), at_b(n_grid.size());
  for (auto& v : at_a) v.reserve(paths);
  for (auto& v : at_b) v.reserve(paths);
  for (int which = 0; which < 2; ++which) {
    auto& dest = which == 0 ? at_a : at_b;
    const double start = which == 0 ? lambda0_a : lambda0_b;
    for (long long p = 0; p < paths; ++p) {
      Rng rng(seed, (static_cast<std::uint64_t>(which) << 40) | static_cast<std::uint64_t>(p));
      double lam = start;
      std::size_t gi = 0;
      for (long long n = 1; n <= n_max; ++n) {
        lam = chain.kernel.sample_energy(lam, rng);
        if (gi < n_grid.size() && n == n_grid[gi]) dest[gi++].push_back(lam);
      }
    }
  }
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    out.distance.push_back(ks_two_sample(at_a[i], at_b[i]));
  }

  // Fit log(dist) = log C - r n over the points clearly above noise.
  const double noise = 2.0 * std::sqrt(2.0 / static_cast<double>(paths));
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (out.distance[i] > noise) {
      xs.push_back(static_cast<double>(n_grid[i]));
      ys.push_back(std::log(out.distance[i]));
    }
  }
  out.decays = out.distance.back() <= std::max(noise, 0.5 * out.distance.front());
  if (xs.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    const double n = static_cast<double>(xs.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    out.decay_rate = -slope;
  }
  return out;
}

}  // namespace rwis
