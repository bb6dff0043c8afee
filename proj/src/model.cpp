#include "rwis/model.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rwis {

bool ValidationReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const ConditionCheck& c) { return c.pass; });
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.pass ? "[pass] " : "[FAIL] ") << c.name << " = " << c.value;
    if (!c.detail.empty()) os << "  (" << c.detail << ")";
    os << "\n";
  }
  return os.str();
}

Matrix step_operator(const RWwISModel& model) {
  const int m = model.states();
  Matrix q = Matrix::Zero(m, m);
  for (const auto& j : model.jumps) q += j.weights;
  return q;
}

Vector stationary(const Matrix& q) {
  const int m = static_cast<int>(q.rows());
  if (m == 1) return Vector::Ones(1);
  // rho (Q - I) = 0 with normalization row appended in place of the last
  // equation; refined against the residual bound afterwards.
  Matrix a = (q - Matrix::Identity(m, m)).transpose();
  a.row(m - 1).setOnes();
  Vector b = Vector::Zero(m);
  b(m - 1) = 1.0;
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) {
    throw std::runtime_error(
        "stationary: singular system; Q has no unique stationary vector "
        "(missing spectral gap)");
  }
  Vector rho = lu.solve(b);
  const double resid = (rho.transpose() * q - rho.transpose()).cwiseAbs().maxCoeff();
  if (resid > kStationaryTol || rho.minCoeff() < -kStationaryTol) {
    throw std::runtime_error("stationary: eigen-solve did not converge to tolerance");
  }
  rho = rho.cwiseMax(0.0);
  rho /= rho.sum();
  return rho;
}

Vector stationary(const RWwISModel& model) { return stationary(step_operator(model)); }

double second_eigenvalue_modulus(const Matrix& q) {
  if (q.rows() == 1) return 0.0;
  Eigen::ComplexEigenSolver<Matrix> es(q, /*computeEigenvectors=*/false);
  std::vector<double> mods(q.rows());
  for (int i = 0; i < q.rows(); ++i) mods[i] = std::abs(es.eigenvalues()(i));
  std::sort(mods.begin(), mods.end(), std::greater<>());
  return mods[1];
}

Vector group_inverse_apply(const Matrix& q, const Vector& rho, const Vector& v) {
  const int m = static_cast<int>(q.rows());
  const Matrix b = q - Matrix::Identity(m, m) + Vector::Ones(m) * rho.transpose();
  Eigen::FullPivLU<Matrix> lu(b);
  if (!lu.isInvertible()) {
    throw std::domain_error("group_inverse_apply: singular restricted system (violated spectral gap)");
  }
  const Vector v0 = v - Vector::Ones(m) * rho.dot(v);
  return lu.solve(v0);
}

Matrix group_inverse(const Matrix& q, const Vector& rho) {
  const int m = static_cast<int>(q.rows());
  const Matrix b = q - Matrix::Identity(m, m) + Vector::Ones(m) * rho.transpose();
  Eigen::FullPivLU<Matrix> lu(b);
  if (!lu.isInvertible()) {
    throw std::domain_error("group_inverse: singular restricted system (violated spectral gap)");
  }
  const Matrix proj = Matrix::Identity(m, m) - Vector::Ones(m) * rho.transpose();
  return lu.solve(proj);
}

bool lattice_spans(const std::vector<Jump>& jumps, int dim) {
  if (jumps.empty()) return false;
  if (dim == 1) {
    long long g = 0;
    for (const auto& j : jumps) g = std::gcd(g, static_cast<long long>(j.step.x()));
    return g == 1;
  }
  // Z^2 is generated iff the gcd of all 2x2 minors of the jump matrix is 1
  // (Smith normal form: d1*d2 = gcd of the 2x2 minors and d1 | d2).
  long long g = 0;
  for (std::size_t i = 0; i < jumps.size() && g != 1; ++i) {
    for (std::size_t k = i + 1; k < jumps.size() && g != 1; ++k) {
      const long long det =
          static_cast<long long>(jumps[i].step.x()) * jumps[k].step.y() -
          static_cast<long long>(jumps[i].step.y()) * jumps[k].step.x();
      g = std::gcd(g, det);
    }
  }
  return g == 1;
}

MomentSet moments(const RWwISModel& model) {
  const int d = model.dim;
  const int m = model.states();
  MomentSet ms;
  ms.dim = d;
  ms.rho = stationary(model);
  ms.M.assign(d, Matrix::Zero(m, m));
  ms.Sigma.assign(d * d, Matrix::Zero(m, m));
  ms.Xi.assign(d * d * d, Matrix::Zero(m, m));
  for (const auto& j : model.jumps) {
    for (int l = 0; l < d; ++l) {
      const double xl = j.step(l);
      ms.M[l] += xl * j.weights;
      for (int n = 0; n < d; ++n) {
        const double xn = j.step(n);
        ms.Sigma[l * d + n] += xl * xn * j.weights;
        for (int k = 0; k < d; ++k) {
          ms.Xi[(l * d + n) * d + k] += xl * xn * j.step(k) * j.weights;
        }
      }
    }
  }
  ms.sigma = asymptotic_covariance(model);
  return ms;
}

Matrix asymptotic_covariance(const RWwISModel& model) {
  const int d = model.dim;
  const int m = model.states();
  const Matrix q = step_operator(model);
  const Vector rho = stationary(q);
  const Vector ones = Vector::Ones(m);

  std::vector<Matrix> M(d, Matrix::Zero(m, m));
  std::vector<Matrix> S(d * d, Matrix::Zero(m, m));
  for (const auto& j : model.jumps) {
    for (int l = 0; l < d; ++l) {
      M[l] += j.step(l) * j.weights;
      for (int n = 0; n < d; ++n) S[l * d + n] += j.step(l) * j.step(n) * j.weights;
    }
  }
  for (int l = 0; l < d; ++l) {
    const double drift = rho.dot(M[l] * ones);
    if (std::abs(drift) > kDriftTol) {
      throw std::domain_error("asymptotic_covariance: model has drift in coordinate " +
                              std::to_string(l));
    }
  }
  std::vector<Vector> zm(d);
  for (int l = 0; l < d; ++l) zm[l] = group_inverse_apply(q, rho, M[l] * ones);

  Matrix sigma(d, d);
  for (int l = 0; l < d; ++l) {
    for (int n = l; n < d; ++n) {
      const double val = rho.dot(S[l * d + n] * ones) - rho.dot(M[l] * zm[n]) -
                         rho.dot(M[n] * zm[l]);
      sigma(l, n) = val;
      sigma(n, l) = val;
    }
  }
  return sigma;
}

ValidationReport validate(const RWwISModel& model) {
  const int d = model.dim;
  const int m = model.states();
  if (d != 1 && d != 2) throw std::invalid_argument("validate: dim must be 1 or 2");
  if (m < 1) throw std::invalid_argument("validate: need at least one internal state");
  if (!(model.rate > 0.0)) throw std::invalid_argument("validate: rate must be positive");
  if (model.jumps.empty()) throw std::invalid_argument("validate: no jump vectors");

  for (const auto& j : model.jumps) {
    if (j.weights.rows() != m || j.weights.cols() != m) {
      throw std::invalid_argument("validate: jump matrix has wrong shape");
    }
    if (!j.weights.allFinite()) throw std::invalid_argument("validate: non-finite jump weights");
    if (j.weights.minCoeff() < 0.0) {
      throw std::invalid_argument("validate: negative entry in jump matrix");
    }
    if (d == 1 && j.step.y() != 0) {
      throw std::invalid_argument("validate: 1d model with nonzero second jump coordinate");
    }
  }

  const Matrix q = step_operator(model);
  const double row_err = (q.rowwise().sum() - Vector::Ones(m)).cwiseAbs().maxCoeff();
  if (row_err > kStochasticTol) {
    throw std::invalid_argument("validate: sum of jump matrices is not row-stochastic (max row error " +
                                std::to_string(row_err) + ")");
  }

  ValidationReport rep;
  rep.checks.push_back({"row_stochasticity", true, row_err, "max |row sum - 1|"});

  // Bounded range: |x|_inf <= 1, x != 0.
  bool range_ok = true;
  for (const auto& j : model.jumps) {
    const int nrm = std::max(std::abs(j.step.x()), std::abs(j.step.y()));
    if (nrm > 1 || (j.step.x() == 0 && j.step.y() == 0)) range_ok = false;
  }
  rep.checks.push_back({"bounded_range", range_ok,
                        range_ok ? 1.0 : 0.0, "|x|_inf <= 1 and x != 0"});

  const double lam2 = second_eigenvalue_modulus(q);
  const bool gap_ok = lam2 <= 1.0 - kGapTol;
  rep.checks.push_back({"spectral_gap", gap_ok, lam2, "|lambda_2|"});

  bool drift_ok = true;
  double drift_max = 0.0;
  Vector rho;
  if (gap_ok) {
    rho = stationary(q);
    const Vector ones = Vector::Ones(m);
    for (int l = 0; l < d; ++l) {
      Matrix M = Matrix::Zero(m, m);
      for (const auto& j : model.jumps) M += j.step(l) * j.weights;
      drift_max = std::max(drift_max, std::abs(rho.dot(M * ones)));
    }
    drift_ok = drift_max <= kDriftTol;
  } else {
    drift_ok = false;
  }
  rep.checks.push_back({"no_drift", drift_ok, drift_max, "max_l |(rho, M_l 1)|"});

  bool sigma_ok = false;
  double sigma_min = 0.0;
  if (gap_ok && drift_ok) {
    const Matrix sigma = asymptotic_covariance(model);
    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
    sigma_min = es.eigenvalues().minCoeff();
    sigma_ok = sigma_min > 0.0;
  }
  rep.checks.push_back({"sigma_positive_definite", sigma_ok, sigma_min, "min eigenvalue of sigma"});

  const bool lat = lattice_spans(model.jumps, d);
  rep.checks.push_back({"lattice_generates", lat, lat ? 1.0 : 0.0, "jumps generate Z^d"});

  return rep;
}

namespace {

RWwISModel make_simple2d() {
  RWwISModel m;
  m.dim = 2;
  m.grid.arcs = 1;
  m.rate = 1.0;
  m.name = "simple2d";
  const Matrix w = Matrix::Constant(1, 1, 0.25);
  m.jumps = {{{1, 0}, w}, {{-1, 0}, w}, {{0, 1}, w}, {{0, -1}, w}};
  return m;
}

RWwISModel make_simple1d() {
  RWwISModel m;
  m.dim = 1;
  m.grid.arcs = 1;
  m.rate = 1.0;
  m.name = "simple1d";
  const Matrix w = Matrix::Constant(1, 1, 0.5);
  m.jumps = {{{1, 0}, w}, {{-1, 0}, w}};
  return m;
}

RWwISModel make_persistent1d(double p) {
  // Two internal states {+,-}. From +: jump +1 keep + w.p. p, jump -1
  // switch to - w.p. 1-p; mirrored from -.
  RWwISModel m;
  m.dim = 1;
  m.grid.arcs = 2;
  m.rate = 1.0;
  m.name = "persistent1d";
  Matrix plus = Matrix::Zero(2, 2), minus = Matrix::Zero(2, 2);
  plus(0, 0) = p;
  plus(1, 0) = 1.0 - p;
  minus(0, 1) = 1.0 - p;
  minus(1, 1) = p;
  m.jumps = {{{1, 0}, plus}, {{-1, 0}, minus}};
  return m;
}

RWwISModel make_directional2d(double keep) {
  // Four internal states = axis directions E,N,W,S; jump along the current
  // direction with probability keep, otherwise switch uniformly to one of
  // the other three directions and jump along it.
  RWwISModel m;
  m.dim = 2;
  m.grid.arcs = 4;
  m.rate = 1.0;
  m.name = "directional2d";
  const LatticeVector dirs[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (int jdir = 0; jdir < 4; ++jdir) {
    Matrix w = Matrix::Zero(4, 4);
    for (int from = 0; from < 4; ++from) {
      w(from, jdir) = (from == jdir) ? keep : (1.0 - keep) / 3.0;
    }
    m.jumps.push_back({dirs[jdir], w});
  }
  return m;
}

RWwISModel make_skewed2d() {
  // m = 1 with jumps (1,1), (-1,1) w.p. 1/4 each and (0,-1) w.p. 1/2:
  // zero drift, nonzero mixed third moment E[x1^2 x2] = 1/2.
  RWwISModel m;
  m.dim = 2;
  m.grid.arcs = 1;
  m.rate = 1.0;
  m.name = "skewed2d";
  m.jumps = {{{1, 1}, Matrix::Constant(1, 1, 0.25)},
             {{-1, 1}, Matrix::Constant(1, 1, 0.25)},
             {{0, -1}, Matrix::Constant(1, 1, 0.5)}};
  return m;
}

}  // namespace

RWwISModel builtin_model(std::string_view name) {
  if (name == "simple2d") return make_simple2d();
  if (name == "simple1d") return make_simple1d();
  if (name == "persistent1d") return make_persistent1d(0.7);
  if (name == "directional2d") return make_directional2d(0.5);
  if (name == "skewed2d") return make_skewed2d();
  throw std::invalid_argument("unknown builtin model '" + std::string(name) + "'");
}

std::vector<std::string> builtin_model_names() {
  return {"simple2d", "simple1d", "persistent1d", "directional2d", "skewed2d"};
}

namespace {

[[noreturn]] void parse_fail(const std::string& file, int line, const std::string& msg) {
  throw std::runtime_error(file + ":" + std::to_string(line) + ": " + msg);
}

std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RWwISModel parse_model(std::istream& in, const std::string& filename) {
  RWwISModel model;
  model.dim = 0;
  model.grid.arcs = 0;
  model.rate = 0.0;

  std::string raw;
  int lineno = 0;
  int matrix_row = -1;       // next row index expected for the open [jump] table
  int section_line = 0;      // line of the open section header
  bool saw_any_key = false;

  auto close_section = [&]() {
    if (matrix_row >= 0 && matrix_row < model.grid.arcs) {
      parse_fail(filename, section_line,
                 "[jump] table has " + std::to_string(matrix_row) + " rows, expected " +
                     std::to_string(model.grid.arcs));
    }
    matrix_row = -1;
  };

  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trimmed(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      close_section();
      if (line.back() != ']') parse_fail(filename, lineno, "unterminated section header");
      std::istringstream hs(line.substr(1, line.size() - 2));
      std::string tag;
      hs >> tag;
      if (tag != "jump") parse_fail(filename, lineno, "unknown section '" + tag + "'");
      if (model.dim == 0 || model.grid.arcs == 0) {
        parse_fail(filename, lineno, "d and m must be declared before jump tables");
      }
      LatticeVector step(0, 0);
      if (!(hs >> step.x())) parse_fail(filename, lineno, "jump header needs integer coordinates");
      if (model.dim == 2 && !(hs >> step.y())) {
        parse_fail(filename, lineno, "2d jump header needs two coordinates");
      }
      int extra;
      if (hs >> extra) parse_fail(filename, lineno, "too many coordinates in jump header");
      if (std::max(std::abs(step.x()), std::abs(step.y())) > 1 || (step.x() == 0 && step.y() == 0)) {
        parse_fail(filename, lineno, "jump vector violates bounded range (0 < |x|_inf <= 1)");
      }
      for (const auto& j : model.jumps) {
        if (j.step == step) parse_fail(filename, lineno, "duplicate jump vector");
      }
      model.jumps.push_back({step, Matrix::Zero(model.grid.arcs, model.grid.arcs)});
      matrix_row = 0;
      section_line = lineno;
      continue;
    }

    if (matrix_row >= 0) {
      if (matrix_row >= model.grid.arcs) {
        parse_fail(filename, lineno, "[jump] table has more than m rows");
      }
      std::istringstream rs(line);
      double v;
      int col = 0;
      while (rs >> v) {
        if (col >= model.grid.arcs) {
          parse_fail(filename, lineno, "row has more than m = " +
                                           std::to_string(model.grid.arcs) + " entries");
        }
        if (!(v >= 0.0) || !std::isfinite(v)) {
          parse_fail(filename, lineno, "matrix entries must be finite and nonnegative");
        }
        model.jumps.back().weights(matrix_row, col++) = v;
      }
      if (!rs.eof()) parse_fail(filename, lineno, "malformed number in matrix row");
      if (col != model.grid.arcs) {
        parse_fail(filename, lineno, "row has " + std::to_string(col) + " entries, expected " +
                                         std::to_string(model.grid.arcs));
      }
      ++matrix_row;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) parse_fail(filename, lineno, "expected 'key = value'");
    const std::string key = trimmed(line.substr(0, eq));
    const std::string value = trimmed(line.substr(eq + 1));
    saw_any_key = true;
    try {
      if (key == "d") {
        model.dim = std::stoi(value);
        if (model.dim != 1 && model.dim != 2) parse_fail(filename, lineno, "d must be 1 or 2");
      } else if (key == "m") {
        model.grid.arcs = std::stoi(value);
        if (model.grid.arcs < 1) parse_fail(filename, lineno, "m must be >= 1");
      } else if (key == "rate") {
        model.rate = std::stod(value);
        if (!(model.rate > 0.0)) parse_fail(filename, lineno, "rate must be positive");
      } else if (key == "name") {
        model.name = value;
      } else {
        parse_fail(filename, lineno, "unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      parse_fail(filename, lineno, "malformed value for '" + key + "'");
    } catch (const std::out_of_range&) {
      parse_fail(filename, lineno, "value out of range for '" + key + "'");
    }
  }
  close_section();

  if (!saw_any_key) parse_fail(filename, lineno == 0 ? 1 : lineno, "empty model file");
  if (model.dim == 0) parse_fail(filename, 1, "missing 'd'");
  if (model.grid.arcs == 0) parse_fail(filename, 1, "missing 'm'");
  if (model.rate == 0.0) parse_fail(filename, 1, "missing 'rate'");
  if (model.jumps.empty()) parse_fail(filename, lineno, "no [jump] tables");

  const Matrix q = step_operator(model);
  const auto rowsum = q.rowwise().sum();
  for (int r = 0; r < q.rows(); ++r) {
    if (std::abs(rowsum(r) - 1.0) > kStochasticTol) {
      parse_fail(filename, lineno,
                 "sum of jump matrices is not row-stochastic (row " + std::to_string(r) +
                     " sums to " + std::to_string(rowsum(r)) + ")");
    }
  }
  return model;
}

RWwISModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  return parse_model(in, path);
}

std::string format_model(const RWwISModel& model) {
  std::ostringstream os;
  os.precision(17);
  if (!model.name.empty()) os << "name = " << model.name << "\n";
  os << "d = " << model.dim << "\n";
  os << "m = " << model.grid.arcs << "\n";
  os << "rate = " << model.rate << "\n";
  for (const auto& j : model.jumps) {
    os << "\n[jump " << j.step.x();
    if (model.dim == 2) os << " " << j.step.y();
    os << "]\n";
    for (int r = 0; r < j.weights.rows(); ++r) {
      for (int c = 0; c < j.weights.cols(); ++c) {
        if (c) os << " ";
        os << j.weights(r, c);
      }
      os << "\n";
    }
  }
  return os.str();
}

RWwISModel resolve_model(const std::string& spec) {
  for (const auto& n : builtin_model_names()) {
    if (spec == n) return builtin_model(spec);
  }
  return load_model(spec);
}

RWwISModel difference_model(const RWwISModel& model, double rate1, double rate2) {
  const int m = model.states();
  const double total = rate1 + rate2;
  if (!(total > 0.0)) throw std::invalid_argument("difference_model: total rate must be positive");
  const double w1 = rate1 / total, w2 = rate2 / total;

  // Internal state (u1, u2) flattened as u1*m + u2. A walker-1 jump by x
  // moves the difference by x and updates u1; a walker-2 jump by x moves the
  // difference by -x and updates u2.
  RWwISModel diff;
  diff.dim = model.dim;
  diff.grid.arcs = m * m;
  diff.rate = total;
  diff.name = model.name.empty() ? "difference" : model.name + "-difference";

  auto add = [&](const LatticeVector& step, const Matrix& w) {
    for (auto& j : diff.jumps) {
      if (j.step == step) {
        j.weights += w;
        return;
      }
    }
    diff.jumps.push_back({step, w});
  };

  for (const auto& j : model.jumps) {
    Matrix w1m = Matrix::Zero(m * m, m * m);
    Matrix w2m = Matrix::Zero(m * m, m * m);
    for (int u1 = 0; u1 < m; ++u1) {
      for (int u2 = 0; u2 < m; ++u2) {
        for (int v = 0; v < m; ++v) {
          w1m(u1 * m + u2, v * m + u2) = w1 * j.weights(u1, v);
          w2m(u1 * m + u2, u1 * m + v) = w2 * j.weights(u2, v);
        }
      }
    }
    add(j.step, w1m);
    add(LatticeVector(-j.step.x(), -j.step.y()), w2m);
  }
  return diff;
}

}  // namespace rwis
