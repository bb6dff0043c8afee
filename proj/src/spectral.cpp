#include "rwis/spectral.hpp"

#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/MatrixFunctions>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "rwis/stattest.hpp"
#include "rwis/walk.hpp"

namespace rwis {

namespace {
constexpr double kPi = std::numbers::pi;
}

ComplexMatrix fourier_symbol(const RWwISModel& model, const Eigen::Vector2d& s) {
  const int m = model.states();
  ComplexMatrix a = ComplexMatrix::Zero(m, m);
  for (const auto& j : model.jumps) {
    double phase = s.x() * j.step.x();
    if (model.dim == 2) phase += s.y() * j.step.y();
    a += std::exp(std::complex<double>(0.0, phase)) * j.weights;
  }
  return a;
}

namespace {

struct Branch {
  std::complex<double> value;
  ComplexVector vec;
};

Branch track_branch(const RWwISModel& model, const Eigen::Vector2d& target) {
  const int m = model.states();
  if (m == 1) {
    return {fourier_symbol(model, target)(0, 0), ComplexVector::Ones(1)};
  }
  const double len = target.norm();
  const int steps = std::max(1, static_cast<int>(std::ceil(len / 0.02)));
  Branch cur{std::complex<double>(1.0, 0.0), ComplexVector::Ones(m) / std::sqrt(double(m))};
  for (int k = 1; k <= steps; ++k) {
    const Eigen::Vector2d s = target * (static_cast<double>(k) / steps);
    Eigen::ComplexEigenSolver<ComplexMatrix> es(fourier_symbol(model, s));
    if (es.info() != Eigen::Success) {
      throw branch_error("leading_eigenvalue: eigen solver failed");
    }
    int best = -1;
    double best_ov = -1.0, second_ov = -1.0;
    for (int i = 0; i < m; ++i) {
      ComplexVector v = es.eigenvectors().col(i);
      const double ov = std::abs(cur.vec.dot(v)) / v.norm();
      if (ov > best_ov) {
        second_ov = best_ov;
        best = i;
        best_ov = ov;
      } else if (ov > second_ov) {
        second_ov = ov;
      }
    }
    if (best_ov < 0.60) {
      throw branch_error("leading_eigenvalue: branch ambiguity at |s| = " + std::to_string(s.norm()) +
                         " (best overlap " + std::to_string(best_ov) + ")");
    }
    // Near-tied overlaps mean the branches are colliding (the eigenvectors
    // coalesce at an exceptional point); refuse rather than misidentify.
    if (m > 1 && second_ov > 0.95 * best_ov) {
      throw branch_error("leading_eigenvalue: eigenvalue collision near |s| = " +
                         std::to_string(s.norm()) + " (overlap tie " +
                         std::to_string(second_ov / best_ov) + ")");
    }
    ComplexVector v = es.eigenvectors().col(best);
    // Fix the phase so consecutive vectors stay aligned.
    const std::complex<double> ip = cur.vec.dot(v);
    if (std::abs(ip) > 0.0) v *= std::conj(ip) / std::abs(ip);
    cur.value = es.eigenvalues()(best);
    cur.vec = v / v.norm();
  }
  return cur;
}

}  // namespace

std::complex<double> leading_eigenvalue(const RWwISModel& model, const Eigen::Vector2d& s) {
  return track_branch(model, s).value;
}

namespace {

// 4th-order central stencils on the tracked branch.
std::complex<double> fd_second(const RWwISModel& model, const Eigen::Vector2d& dir, double h) {
  auto chi = [&](double c) { return leading_eigenvalue(model, dir * c); };
  return (-chi(2 * h) + 16.0 * chi(h) - 30.0 * chi(0) + 16.0 * chi(-h) - chi(-2 * h)) /
         (12.0 * h * h);
}

std::complex<double> fd_third(const RWwISModel& model, const Eigen::Vector2d& dir, double h) {
  auto chi = [&](double c) { return leading_eigenvalue(model, dir * c); };
  return (-13.0 / 8.0 * (chi(h) - chi(-h)) + (chi(2 * h) - chi(-2 * h)) -
          (chi(3 * h) - chi(-3 * h)) / 8.0) /
         (h * h * h);
}

}  // namespace

EigenExpansion expansion_coeffs(const RWwISModel& model) {
  const int d = model.dim;
  const int m = model.states();
  const Matrix q = step_operator(model);
  const Vector rho = stationary(q);
  const Vector ones = Vector::Ones(m);
  const MomentSet ms = moments(model);  // throws on drift via asymptotic_covariance

  const Matrix z0 = group_inverse(q, rho);

  EigenExpansion e;
  e.dim = d;
  e.quadratic = ms.sigma;
  e.cubic.assign(d * d * d, {0.0, 0.0});

  // r3[ijk] = sum over permutations of
  //   (i/2) rho' Sigma_{ab} Z M_c 1 + (i/2) rho' M_a Z Sigma_{bc} 1
  //   - (i/6) rho' Xi_{abc} 1 - i rho' M_a Z M_b Z M_c 1.
  auto contrib = [&](int a, int b, int c) -> std::complex<double> {
    const double t1 = rho.dot(ms.Sigma_(a, b) * (z0 * (ms.M_(c) * ones)));
    const double t2 = rho.dot(ms.M_(a) * (z0 * (ms.Sigma_(b, c) * ones)));
    const double t3 = rho.dot(ms.Xi_(a, b, c) * ones);
    const double t4 = rho.dot(ms.M_(a) * (z0 * (ms.M_(b) * (z0 * (ms.M_(c) * ones)))));
    return std::complex<double>(0.0, 0.5 * t1 + 0.5 * t2 - t3 / 6.0 - t4);
  };
  const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < d; ++k) {
        const int idx[3] = {i, j, k};
        std::complex<double> r{0.0, 0.0};
        for (const auto& p : perms) r += contrib(idx[p[0]], idx[p[1]], idx[p[2]]);
        e.cubic[(i * d + j) * d + k] = r;
      }
    }
  }

  // Finite-difference counterparts, step 1e-3.
  const double h = 1e-3;
  e.quadratic_fd = Matrix::Zero(d, d);
  std::vector<std::complex<double>> diag2(d);
  for (int l = 0; l < d; ++l) {
    Eigen::Vector2d dir = Eigen::Vector2d::Zero();
    dir(l) = 1.0;
    diag2[l] = fd_second(model, dir, h);
    e.quadratic_fd(l, l) = -diag2[l].real();
  }
  if (d == 2) {
    Eigen::Vector2d diag(1.0, 1.0);
    const std::complex<double> dd = fd_second(model, diag, h);
    const double mixed = -(dd - diag2[0] - diag2[1]).real() / 2.0;
    e.quadratic_fd(0, 1) = mixed;
    e.quadratic_fd(1, 0) = mixed;
  }

  // Third directional derivatives determine the symmetric cubic tensor:
  // D^3_w chi = sum_{ijk} w_i w_j w_k r3[ijk].
  e.cubic_fd.assign(d * d * d, {0.0, 0.0});
  if (d == 1) {
    e.cubic_fd[0] = fd_third(model, Eigen::Vector2d(1.0, 0.0), h);
  } else {
    const std::complex<double> daaa = fd_third(model, {1.0, 0.0}, h);
    const std::complex<double> dbbb = fd_third(model, {0.0, 1.0}, h);
    const std::complex<double> dpp = fd_third(model, {1.0, 1.0}, h);
    const std::complex<double> dpm = fd_third(model, {1.0, -1.0}, h);
    // D^3 along (1,1) = r000 + 3 r001 + 3 r011 + r111 and along (1,-1)
    // = r000 - 3 r001 + 3 r011 - r111; solve for the mixed components.
    const std::complex<double> r001 = (dpp - dpm - 2.0 * dbbb) / 6.0;
    const std::complex<double> r011 = (dpp + dpm - 2.0 * daaa) / 6.0;
    auto set = [&](int i, int j, int k, std::complex<double> v) {
      e.cubic_fd[(i * 2 + j) * 2 + k] = v;
    };
    set(0, 0, 0, daaa);
    set(1, 1, 1, dbbb);
    set(0, 0, 1, r001), set(0, 1, 0, r001), set(1, 0, 0, r001);
    set(0, 1, 1, r011), set(1, 0, 1, r011), set(1, 1, 0, r011);
  }

  // Deviations on entries that vanish exactly are measured against the
  // matrix scale, not against the entry.
  const double r2_scale = std::max(e.quadratic.diagonal().maxCoeff(), 1e-9);
  e.rel_dev_r2 = 0.0;
  for (int l = 0; l < d; ++l) {
    for (int n = 0; n < d; ++n) {
      const double dev = std::abs(e.quadratic(l, n) - e.quadratic_fd(l, n));
      const double scale = std::max({std::abs(e.quadratic(l, n)), std::abs(e.quadratic_fd(l, n)),
                                     r2_scale});
      e.rel_dev_r2 = std::max(e.rel_dev_r2, dev / scale);
    }
  }
  // FD noise on the third derivative at step 1e-3 is ~1e-5 absolute, so the
  // relative comparison carries an absolute floor.
  e.rel_dev_r3 = 0.0;
  for (std::size_t i = 0; i < e.cubic.size(); ++i) {
    const double dev = std::abs(e.cubic[i] - e.cubic_fd[i]);
    const double scale = std::max({std::abs(e.cubic[i]), std::abs(e.cubic_fd[i]), 0.5});
    e.rel_dev_r3 = std::max(e.rel_dev_r3, dev / scale);
  }
  if (e.rel_dev_r2 > 1e-6) {
    throw std::runtime_error("expansion_coeffs: analytic and finite-difference r2 disagree (rel " +
                             std::to_string(e.rel_dev_r2) + ")");
  }
  if (e.rel_dev_r3 > 1e-4) {
    throw std::runtime_error("expansion_coeffs: analytic and finite-difference r3 disagree (rel " +
                             std::to_string(e.rel_dev_r3) + ")");
  }
  return e;
}

ExactLaw::ExactLaw(int dim, int states, int window, double time, double rate, int initial_state)
    : dim_(dim),
      states_(states),
      window_(window),
      initial_state_(initial_state),
      time_(time),
      rate_(rate) {
  const std::size_t w = 2 * static_cast<std::size_t>(window) + 1;
  mass_.assign((dim == 2 ? w * w : w) * states_, 0.0);
}

std::size_t ExactLaw::index(int x, int y, int state) const {
  const std::size_t w = 2 * static_cast<std::size_t>(window_) + 1;
  const std::size_t ix = static_cast<std::size_t>(x + window_);
  if (dim_ == 1) return ix * states_ + state;
  const std::size_t iy = static_cast<std::size_t>(y + window_);
  return (ix * w + iy) * states_ + state;
}

double ExactLaw::site_mass(int x, int y) const {
  double s = 0.0;
  for (int v = 0; v < states_; ++v) s += mass_[index(x, y, v)];
  return s;
}

void ExactLaw::finalize() {
  double total = 0.0;
  for (auto& v : mass_) {
    if (v < 0.0) {
      if (v < -1e-12) {
        throw std::runtime_error("ExactLaw: quadrature produced mass below -1e-12");
      }
      v = 0.0;
    }
    total += v;
  }
  tabulated_mass_ = total;
  truncation_bound_ = std::max(0.0, 1.0 - total);
}

namespace {

// One inversion pass at grid size n (per axis): fills law masses for the
// window. h(x) = (1/n^d) sum_k e^{-i(s_k,x)} B(s_k)[u0,:] with
// s_k = 2 pi (k - n/2)/n, evaluated by forward FFT plus the (-1)^x phase.
void invert_grid(const RWwISModel& model, double lam_t, int n, int window, int u0,
                 ExactLaw& law) {
  const int m = model.states();
  Eigen::FFT<double> fft;
  const auto node = [&](int k) { return 2.0 * kPi * (k - n / 2) / n; };

  if (model.dim == 1) {
    std::vector<std::vector<std::complex<double>>> rows(
        m, std::vector<std::complex<double>>(n));
    for (int k = 0; k < n; ++k) {
      const Eigen::Vector2d s(node(k), 0.0);
      ComplexMatrix b;
      if (m == 1) {
        b = ComplexMatrix::Constant(1, 1,
                                    std::exp(lam_t * (fourier_symbol(model, s)(0, 0) - 1.0)));
      } else {
        b = (lam_t * (fourier_symbol(model, s) - ComplexMatrix::Identity(m, m))).exp();
      }
      for (int v = 0; v < m; ++v) rows[v][k] = b(u0, v);
    }
    std::vector<std::complex<double>> out(n);
    for (int v = 0; v < m; ++v) {
      fft.fwd(out, rows[v]);
      for (int x = -window; x <= window; ++x) {
        const int xm = ((x % n) + n) % n;
        const double sign = (x % 2 == 0) ? 1.0 : -1.0;
        law.raw()[(static_cast<std::size_t>(x + window)) * m + v] = sign * out[xm].real() / n;
      }
    }
    return;
  }

  // d = 2: per outgoing state, n x n symbol table, separable FFT.
  std::vector<Eigen::MatrixXcd> tables(m, Eigen::MatrixXcd(n, n));
  for (int k1 = 0; k1 < n; ++k1) {
    for (int k2 = 0; k2 < n; ++k2) {
      const Eigen::Vector2d s(node(k1), node(k2));
      if (m == 1) {
        tables[0](k1, k2) = std::exp(lam_t * (fourier_symbol(model, s)(0, 0) - 1.0));
      } else {
        const ComplexMatrix b =
            (lam_t * (fourier_symbol(model, s) - ComplexMatrix::Identity(m, m))).exp();
        for (int v = 0; v < m; ++v) tables[v](k1, k2) = b(u0, v);
      }
    }
  }
  std::vector<std::complex<double>> line(n), lineout(n);
  const std::size_t w = 2 * static_cast<std::size_t>(window) + 1;
  for (int v = 0; v < m; ++v) {
    auto& tab = tables[v];
    for (int k2 = 0; k2 < n; ++k2) {  // FFT along axis 1
      for (int k1 = 0; k1 < n; ++k1) line[k1] = tab(k1, k2);
      fft.fwd(lineout, line);
      for (int k1 = 0; k1 < n; ++k1) tab(k1, k2) = lineout[k1];
    }
    for (int k1 = 0; k1 < n; ++k1) {  // FFT along axis 2
      for (int k2 = 0; k2 < n; ++k2) line[k2] = tab(k1, k2);
      fft.fwd(lineout, line);
      for (int k2 = 0; k2 < n; ++k2) tab(k1, k2) = lineout[k2];
    }
    for (int x = -window; x <= window; ++x) {
      const int xm = ((x % n) + n) % n;
      for (int y = -window; y <= window; ++y) {
        const int ym = ((y % n) + n) % n;
        const double sign = ((x + y) % 2 == 0) ? 1.0 : -1.0;
        law.raw()[((static_cast<std::size_t>(x + window)) * w + (y + window)) * m + v] =
            sign * tab(xm, ym).real() / (static_cast<double>(n) * n);
      }
    }
  }
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p *= 2;
  return p;
}

}  // namespace

ExactLaw exact_distribution(const RWwISModel& model, double t, int window, int initial_state,
                            double grid_tol) {
  const int m = model.states();
  if (initial_state < 0 || initial_state >= m) {
    throw std::invalid_argument("exact_distribution: initial state out of range");
  }
  if (window < 0) throw std::invalid_argument("exact_distribution: window must be >= 0");
  const double lam_t = model.rate * t;
  const int max_n = model.dim == 2 ? 2048 : 1 << 16;

  int n = next_pow2(std::max(2 * window + 2,
                             static_cast<int>(4.0 * std::sqrt(std::max(lam_t, 1.0))) + 16));
  ExactLaw prev(model.dim, m, window, t, model.rate, initial_state);
  invert_grid(model, lam_t, n, window, initial_state, prev);
  for (;;) {
    if (2 * n > max_n) {
      throw std::runtime_error("exact_distribution: quadrature grid did not converge to " +
                               std::to_string(grid_tol));
    }
    n *= 2;
    ExactLaw cur(model.dim, m, window, t, model.rate, initial_state);
    invert_grid(model, lam_t, n, window, initial_state, cur);
    double diff = 0.0;
    for (std::size_t i = 0; i < cur.raw().size(); ++i) {
      diff = std::max(diff, std::abs(cur.raw()[i] - prev.raw()[i]));
    }
    if (diff <= grid_tol) {
      cur.finalize();
      if (cur.truncation_bound() > 1e-6) {
        const int suggestion =
            next_pow2(static_cast<int>(8.0 * std::sqrt(std::max(lam_t, 1.0))) + 8);
        throw window_error("exact_distribution: window truncates " +
                               std::to_string(cur.truncation_bound()) +
                               " probability mass; suggest window >= " +
                               std::to_string(suggestion),
                           suggestion);
      }
      return cur;
    }
    prev = std::move(cur);
  }
}

LltErrorResult llt_error(const RWwISModel& model, double t, int initial_state, int window,
                         bool keep_table) {
  const int d = model.dim;
  const double lam_t = model.rate * t;
  const Matrix sigma = asymptotic_covariance(model);
  if (window < 0) {
    const double smax = sigma.diagonal().maxCoeff();
    window = static_cast<int>(std::ceil(8.0 * std::sqrt(lam_t * smax))) + 4;
  }
  const ExactLaw law = exact_distribution(model, t, window, initial_state);

  double skew = 0.0;
  double s2 = sigma(0, 0);
  if (d == 1) skew = expansion_coeffs(model).r3().imag();

  const Matrix sigma_inv = sigma.inverse();
  const double det = sigma.determinant();
  const double norm = (d == 1) ? 1.0 / std::sqrt(2.0 * kPi * lam_t * s2)
                               : 1.0 / (2.0 * kPi * lam_t * std::sqrt(det));

  LltErrorResult r;
  r.t = t;
  r.lambda_t = lam_t;
  for (int x = -window; x <= window; ++x) {
    const int ylo = (d == 2) ? -window : 0;
    const int yhi = (d == 2) ? window : 0;
    for (int y = ylo; y <= yhi; ++y) {
      double quad;
      if (d == 1) {
        quad = x * static_cast<double>(x) / s2;
      } else {
        const Eigen::Vector2d v(x, y);
        quad = v.dot(sigma_inv * v);
      }
      double gauss = norm * std::exp(-quad / (2.0 * lam_t));
      if (d == 1 && skew != 0.0) {
        const double xd = x;
        const double corr =
            skew / 6.0 * xd * (3.0 * s2 * lam_t - xd * xd) / (s2 * s2 * s2 * lam_t * lam_t);
        gauss *= 1.0 + corr;
      }
      const double h = law.site_mass(x, y);
      const double dev = std::abs(h - gauss);
      r.error_sum += dev;
      r.error_sup = std::max(r.error_sup, dev);
      if (keep_table) r.table.push_back({x, y, h, gauss});
    }
  }
  return r;
}

RateFit fit_rate(std::span<const double> lambda_ts, std::span<const double> errors) {
  if (lambda_ts.size() != errors.size() || lambda_ts.size() < 2) {
    throw std::invalid_argument("fit_rate: need >= 2 matched points");
  }
  const std::size_t n = lambda_ts.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log(lambda_ts[i]);
    const double y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double dn = static_cast<double>(n);
  const double denom = dn * sxx - sx * sx;
  RateFit f;
  f.exponent = (dn * sxy - sx * sy) / denom;
  f.intercept = (sy - f.exponent * sx) / dn;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log(lambda_ts[i]);
    const double y = std::log(errors[i]);
    const double resid = y - (f.intercept + f.exponent * x);
    ss += resid * resid;
  }
  if (n > 2) {
    f.stderr_exponent = std::sqrt(ss / (dn - 2.0) * dn / denom);
  }
  f.ci_lo = f.exponent - 1.96 * f.stderr_exponent;
  f.ci_hi = f.exponent + 1.96 * f.stderr_exponent;
  return f;
}

std::vector<double> sample_first_return_times(const RWwISModel& model, long long trials,
                                              std::uint64_t seed, int workers, double t_max,
                                              int initial_state) {
  if (model.dim != 2) throw std::invalid_argument("first_return_tail: requires d = 2");
  const JumpSampler sampler(model);
  const double lam = model.rate;
  const long long max_steps =
      static_cast<long long>(1.25 * lam * t_max + 10.0 * std::sqrt(lam * t_max)) + 50;
  std::vector<double> tau(trials);
  parallel_trials(trials, workers, [&](long long trial) {
    Rng rng(seed, static_cast<std::uint64_t>(trial));
    auto first = sampler.sample(initial_state, rng);
    long long x = first.dx, y = first.dy;
    int state = first.state;
    long long n = 1;
    while ((x != 0 || y != 0) && n < max_steps) {
      const auto o = sampler.sample(state, rng);
      x += o.dx;
      y += o.dy;
      state = o.state;
      ++n;
    }
    if (x == 0 && y == 0) {
      // Return at the n-th jump: tau is a sum of n exponential waits.
      tau[trial] = rng.gamma(static_cast<double>(n)) / lam;
    } else {
      tau[trial] = std::numeric_limits<double>::infinity();
    }
  });
  return tau;
}

ReturnTailResult first_return_tail(const RWwISModel& model, std::span<const double> t_grid,
                                   long long trials, std::uint64_t seed, int workers,
                                   double t_max, int initial_state) {
  ReturnTailResult out;
  if (t_grid.empty()) throw std::invalid_argument("first_return_tail: empty grid");
  if (t_max <= 0.0) t_max = *std::max_element(t_grid.begin(), t_grid.end());
  out.t_max = t_max;
  out.trials = trials;
  const Matrix sigma = asymptotic_covariance(model);
  out.constant = 2.0 * kPi * std::sqrt(sigma.determinant());

  const std::vector<double> tau =
      sample_first_return_times(model, trials, seed, workers, t_max, initial_state);
  for (const double t : t_grid) {
    TailPoint p;
    p.t = t;
    for (const double v : tau) {
      if (v > t) ++p.survivors;
    }
    const auto ci = wilson_interval(p.survivors, trials);
    p.tail = ci.estimate;
    p.ci_lo = ci.lo;
    p.ci_hi = ci.hi;
    p.tail_times_log = p.tail * std::log(model.rate * t);
    p.low_survivors = p.survivors < 100;
    out.points.push_back(p);
  }
  return out;
}

}  // namespace rwis
