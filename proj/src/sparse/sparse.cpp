// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rssnet/sparse/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rssnet/errors.hpp"

namespace rssnet::sparse {

namespace {

void require_signal(const Dictionary& d, const Eigen::VectorXd& y, const char* who) {
  if (d.size() == 0) throw ConfigError(std::string(who) + ": empty dictionary");
  if (static_cast<std::size_t>(y.size()) != d.length()) {
    throw DimensionError(std::string(who) + ": signal length " + std::to_string(y.size()) +
                         " does not match dictionary length " + std::to_string(d.length()));
  }
  if (!y.allFinite()) throw NumericalError(std::string(who) + ": signal has non-finite entries");
}

void finish(const Dictionary& d, const Eigen::VectorXd& y, double threshold, Eigen::VectorXd x, SparseSolution& s) {
  s.support.clear();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] > threshold) {
      s.support.push_back(static_cast<std::size_t>(i));
    } else {
      x[i] = 0.0;
    }
  }
  s.residual_norm = (y - d.atoms * x).norm();
  s.coefficients = std::move(x);
}

// Applies (D'D + mu I)^-1, factoring whichever Gram side is smaller.
class RidgeSolver {
 public:
  RidgeSolver(const Eigen::MatrixXd& d, double mu) : d_(d), mu_(mu), wide_(d.cols() > d.rows()) {
    if (wide_) {
      // Woodbury: (D'D + mu I)^-1 = (I - D' (mu I + D D')^-1 D) / mu.
      Eigen::MatrixXd s = d * d.transpose();
      s.diagonal().array() += mu;
      llt_.compute(s);
    } else {
      Eigen::MatrixXd g = d.transpose() * d;
      g.diagonal().array() += mu;
      llt_.compute(g);
    }
    if (llt_.info() != Eigen::Success) throw NumericalError("sunsal: system factorization failed");
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& w) const {
    if (!wide_) return llt_.solve(w);
    return (w - d_.transpose() * llt_.solve(d_ * w)) / mu_;
  }

 private:
  const Eigen::MatrixXd& d_;
  double mu_;
  bool wide_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

Eigen::VectorXd least_squares(const Eigen::MatrixXd& a, const std::vector<Eigen::Index>& cols,
                              const Eigen::VectorXd& b) {
  Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(cols[k]);
  return sub.colPivHouseholderQr().solve(b);
}

}  // namespace

void Dictionary::validate() const {
  if (static_cast<std::size_t>(atoms.cols()) != ids.size()) {
    throw InvariantError("dictionary has " + std::to_string(atoms.cols()) + " atoms but " +
                         std::to_string(ids.size()) + " ids");
  }
  for (Eigen::Index j = 0; j < atoms.cols(); ++j) {
    const auto col = atoms.col(j);
    const std::string who = "dictionary atom '" + ids[static_cast<std::size_t>(j)] + "'";
    if (!col.allFinite()) throw InvariantError(who + " has non-finite entries");
    if (col.minCoeff() < 0.0) throw InvariantError(who + " has negative entries");
    if (col.maxCoeff() != 1.0) throw InvariantError(who + " is not max-normalized");
  }
}

Dictionary make_dictionary(const std::vector<data::Spectrum>& spectra) {
  if (spectra.empty()) throw ConfigError("dictionary needs at least one spectrum");
  const std::size_t len = spectra.front().values.size();
  Dictionary d;
  d.atoms.resize(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(spectra.size()));
  for (std::size_t j = 0; j < spectra.size(); ++j) {
    const auto& s = spectra[j];
    if (s.values.size() != len) {
      throw DimensionError("dictionary spectrum '" + s.id + "' has length " + std::to_string(s.values.size()) +
                           ", expected " + std::to_string(len));
    }
    const double m = *std::max_element(s.values.begin(), s.values.end());
    if (!(m > 0.0)) throw DomainError("dictionary spectrum '" + s.id + "' has no positive entry");
    for (std::size_t i = 0; i < len; ++i) {
      d.atoms(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::max(s.values[i], 0.0) / m;
    }
    d.ids.push_back(s.id);
  }
  d.validate();
  return d;
}

double sunsal_objective(const Dictionary& d, const Eigen::VectorXd& y, const Eigen::VectorXd& x, double lambda) {
  return 0.5 * (d.atoms * x - y).squaredNorm() + lambda * x.lpNorm<1>();
}

SparseSolution sunsal(const Dictionary& d, const Eigen::VectorXd& y, const SunsalOptions& opt) {
  if (!(opt.lambda >= 0.0)) throw ConfigError("sunsal: lambda must be >= 0");
  if (!(opt.mu > 0.0)) throw ConfigError("sunsal: mu must be > 0");
  if (opt.max_iter < 1) throw ConfigError("sunsal: max_iter must be >= 1");
  require_signal(d, y, "sunsal");
  const Eigen::Index p = d.atoms.cols();
  const RidgeSolver ridge(d.atoms, opt.mu);
  const Eigen::VectorXd dty = d.atoms.transpose() * y;

  // Sum-to-one: project the ridge solution onto 1'x = 1 in the metric of the
  // system matrix.
  Eigen::VectorXd b1;
  double one_b1 = 0.0;
  if (opt.sum_to_one) {
    b1 = ridge.solve(Eigen::VectorXd::Ones(p));
    one_b1 = b1.sum();
  }

  Eigen::VectorXd z = Eigen::VectorXd::Zero(p), u = Eigen::VectorXd::Zero(p), x(p), z_prev(p);
  const double shrink = opt.lambda / opt.mu;
  SparseSolution s;
  if (opt.record_objective) s.objective_trace.push_back(sunsal_objective(d, y, z, opt.lambda));
  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    x = ridge.solve(dty + opt.mu * (z - u));
    if (opt.sum_to_one) x -= b1 * ((x.sum() - 1.0) / one_b1);
    z_prev = z;
    // Soft threshold then clip at zero; for the nonnegative orthant the two
    // collapse into one shifted max.
    z = (x + u).array() - shrink;
    z = z.cwiseMax(0.0);
    u += x - z;
    s.iterations = it;
    if (opt.record_objective) s.objective_trace.push_back(sunsal_objective(d, y, z, opt.lambda));
    const double primal = (x - z).norm();
    const double dual = opt.mu * (z - z_prev).norm();
    if (!std::isfinite(primal) || !std::isfinite(dual)) throw NumericalError("sunsal: iterates diverged");
    if (primal < opt.tol && dual < opt.tol) {
      s.converged = true;
      break;
    }
  }
  finish(d, y, opt.threshold, std::move(z), s);
  return s;
}

Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, std::size_t max_iter) {
  if (a.rows() != b.size()) throw DimensionError("nnls: row count does not match the target length");
  const Eigen::Index n = a.cols();
  if (max_iter == 0) max_iter = 3 * static_cast<std::size_t>(n) + 10;
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * a.cwiseAbs().maxCoeff() *
                     static_cast<double>(std::max(a.rows(), n));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  auto passive_list = [&] {
    std::vector<Eigen::Index> p;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (passive[static_cast<std::size_t>(i)]) p.push_back(i);
    }
    return p;
  };
  for (std::size_t outer = 0; outer < max_iter; ++outer) {
    const Eigen::VectorXd w = a.transpose() * (b - a * x);
    Eigen::Index j = -1;
    double best = tol;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!passive[static_cast<std::size_t>(i)] && w[i] > best) {
        best = w[i];
        j = i;
      }
    }
    if (j < 0) break;
    passive[static_cast<std::size_t>(j)] = true;
    for (std::size_t inner = 0; inner <= static_cast<std::size_t>(n); ++inner) {
      const auto p = passive_list();
      const Eigen::VectorXd zp = least_squares(a, p, b);
      bool feasible = true;
      for (Eigen::Index k = 0; k < zp.size(); ++k) feasible = feasible && zp[k] > 0.0;
      if (feasible) {
        x.setZero();
        for (std::size_t k = 0; k < p.size(); ++k) x[p[k]] = zp[static_cast<Eigen::Index>(k)];
        break;
      }
      // Step back toward the last feasible point until a coordinate hits zero.
      double alpha = 1.0;
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double zk = zp[static_cast<Eigen::Index>(k)];
        if (zk <= 0.0) alpha = std::min(alpha, x[p[k]] / (x[p[k]] - zk));
      }
      for (std::size_t k = 0; k < p.size(); ++k) {
        x[p[k]] += alpha * (zp[static_cast<Eigen::Index>(k)] - x[p[k]]);
        if (x[p[k]] <= tol) {
          x[p[k]] = 0.0;
          passive[static_cast<std::size_t>(p[k])] = false;
        }
      }
    }
  }
  return x;
}

SparseSolution nnomp(const Dictionary& d, const Eigen::VectorXd& y, const NnompOptions& opt) {
  if (opt.max_atoms < 1) throw ConfigError("nnomp: max_atoms must be >= 1");
  require_signal(d, y, "nnomp");
  const Eigen::Index p = d.atoms.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd r = y;
  std::vector<Eigen::Index> active;
  std::vector<bool> used(static_cast<std::size_t>(p), false);
  SparseSolution s;
  s.converged = true;
  while (active.size() < opt.max_atoms && r.norm() >= opt.residual_tol) {
    const Eigen::VectorXd c = d.atoms.transpose() * r;
    Eigen::Index j = -1;
    double best = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
      if (!used[static_cast<std::size_t>(i)] && c[i] > best) {
        best = c[i];
        j = i;
      }
    }
    if (j < 0) {
      s.converged = false;
      break;
    }
    used[static_cast<std::size_t>(j)] = true;
    active.push_back(j);
    Eigen::MatrixXd sub(d.atoms.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = d.atoms.col(active[k]);
    const Eigen::VectorXd coef = nnls(sub, y);
    x.setZero();
    for (std::size_t k = 0; k < active.size(); ++k) x[active[k]] = coef[static_cast<Eigen::Index>(k)];
    r = y - d.atoms * x;
    ++s.iterations;
  }
  finish(d, y, opt.threshold, std::move(x), s);
  return s;
}

std::vector<Component> reconstruct(const Dictionary& d, const SparseSolution& sol) {
  if (static_cast<std::size_t>(sol.coefficients.size()) != d.size()) {
    throw DimensionError("reconstruct: solution has " + std::to_string(sol.coefficients.size()) +
                         " coefficients for " + std::to_string(d.size()) + " atoms");
  }
  std::vector<Component> out;
  for (std::size_t i : sol.support) {
    Component c;
    c.atom = i;
    c.id = d.ids[i];
    c.coefficient = sol.coefficients[static_cast<Eigen::Index>(i)];
    c.values.resize(d.length());
    for (std::size_t l = 0; l < d.length(); ++l) {
      c.values[l] = c.coefficient * d.atoms(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(i));
    }
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

// Support indices by descending coefficient; ties by index.
std::vector<std::size_t> ranked_support(const SparseSolution& sol) {
  std::vector<std::size_t> idx = sol.support;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return sol.coefficients[static_cast<Eigen::Index>(a)] > sol.coefficients[static_cast<Eigen::Index>(b)];
  });
  return idx;
}

}  // namespace

std::vector<std::vector<double>> top_estimates(const Dictionary& d, const SparseSolution& sol, std::size_t k) {
  const auto ranked = ranked_support(sol);
  const auto comps = reconstruct(d, sol);
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < k; ++i) {
    if (i < ranked.size()) {
      const auto it = std::find_if(comps.begin(), comps.end(), [&](const Component& c) { return c.atom == ranked[i]; });
      out.push_back(it->values);
    } else {
      out.emplace_back(d.length(), 0.0);
    }
  }
  return out;
}

bool support_misses(const SparseSolution& sol, const std::vector<std::size_t>& true_atoms) {
  for (std::size_t t : true_atoms) {
    if (!std::binary_search(sol.support.begin(), sol.support.end(), t)) return true;
  }
  return false;
}

}  // namespace rssnet::sparse
