// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "rssnet/errors.hpp"
#include "rssnet/sparse/sparse.hpp"

using namespace rssnet;
using namespace rssnet::sparse;

namespace {

Dictionary from_columns(const Eigen::MatrixXd& m) {
  Dictionary d;
  d.atoms = m;
  for (Eigen::Index j = 0; j < m.cols(); ++j) d.ids.push_back("a" + std::to_string(j));
  return d;
}

Dictionary random_dictionary(std::mt19937_64& rng, Eigen::Index l, Eigen::Index p) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd m(l, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < l; ++i) m(i, j) = u(rng);
    m.col(j) /= m.col(j).maxCoeff();
  }
  return from_columns(m);
}

double coherence(const Dictionary& d) {
  double mu = 0.0;
  for (Eigen::Index a = 0; a < d.atoms.cols(); ++a) {
    for (Eigen::Index b = a + 1; b < d.atoms.cols(); ++b) {
      mu = std::max(mu, d.atoms.col(a).dot(d.atoms.col(b)) / (d.atoms.col(a).norm() * d.atoms.col(b).norm()));
    }
  }
  return mu;
}

// Lorentzian peaks drawn until the pairwise cosine lies in [lo, hi): the atoms
// overlap, but stay below the greedy recovery bound when hi <= 1/3.
Dictionary peak_dictionary(std::mt19937_64& rng, Eigen::Index l, Eigen::Index p, double lo, double hi) {
  std::uniform_real_distribution<double> centre(0.1 * l, 0.9 * l), width(1.0, 4.0);
  for (;;) {
    Eigen::MatrixXd m(l, p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double c = centre(rng), w = width(rng);
      for (Eigen::Index i = 0; i < l; ++i) m(i, j) = 1.0 / (1.0 + std::pow((i - c) / w, 2));
      m.col(j) /= m.col(j).maxCoeff();
    }
    auto d = from_columns(m);
    const double mu = coherence(d);
    if (mu >= lo && mu < hi) return d;
  }
}

double largest_gram_eigenvalue(const Dictionary& d) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d.atoms.transpose() * d.atoms);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

TEST_CASE("dictionary construction and validation") {
  std::vector<data::Spectrum> lib{{{0, 2, 4}, "x", "t"}, {{1, 1, 0.5}, "y", "t"}};
  const auto d = make_dictionary(lib);
  CHECK(d.atoms.col(0).maxCoeff() == 1.0);
  CHECK(d.atoms(1, 0) == 0.5);
  CHECK(d.ids == std::vector<std::string>{"x", "y"});
  CHECK_THROWS_AS(make_dictionary({{{0, 0, 0}, "z", "t"}}), DomainError);
  CHECK_THROWS_AS(make_dictionary({{{0, 1}, "a", "t"}, {{1}, "b", "t"}}), DimensionError);
  auto bad = d;
  bad.atoms(0, 1) = -0.1;
  CHECK_THROWS_AS(bad.validate(), InvariantError);
  bad = d;
  bad.atoms(1, 0) = 2.0;
  CHECK_THROWS_AS(bad.validate(), InvariantError);
}

TEST_CASE("sunsal option and shape errors") {
  const auto d = from_columns(Eigen::MatrixXd::Identity(3, 3));
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(3);
  SunsalOptions o;
  o.lambda = -1;
  CHECK_THROWS_AS(sunsal(d, y, o), ConfigError);
  o = {};
  o.mu = 0;
  CHECK_THROWS_AS(sunsal(d, y, o), ConfigError);
  CHECK_THROWS_AS(sunsal(d, Eigen::VectorXd::Ones(4)), DimensionError);
}

TEST_CASE("sunsal with lambda 0 recovers a feasible least-squares solution") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Square orthonormal: a permutation of the identity keeps columns max-normalized.
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(6, 6);
  const std::vector<int> perm{3, 0, 5, 1, 4, 2};
  for (int j = 0; j < 6; ++j) q(perm[j], j) = 1.0;
  const auto d = from_columns(q);
  Eigen::VectorXd x(6);
  for (auto& v : x) v = u(rng);
  SunsalOptions o;
  o.lambda = 0.0;
  o.mu = 1.0;
  o.tol = 1e-12;
  o.threshold = 0.0;
  const auto s = sunsal(d, d.atoms * x, o);
  CHECK(s.converged);
  CHECK((s.coefficients - x).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("sunsal matches a simplex grid search on a 3-atom dictionary") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> step(50, 900);
  for (int trial = 0; trial < 5; ++trial) {
    const auto d = random_dictionary(rng, 8, 3);
    // True abundances on the 0.001 grid.
    const int a = step(rng), b = std::uniform_int_distribution<int>(0, 1000 - a)(rng);
    const Eigen::Vector3d xs(a / 1000.0, b / 1000.0, (1000 - a - b) / 1000.0);
    const Eigen::VectorXd y = d.atoms * xs;
    SunsalOptions o;
    o.lambda = 1e-3;
    o.mu = largest_gram_eigenvalue(d);
    o.sum_to_one = true;
    o.tol = 1e-12;
    o.max_iter = 200000;
    o.threshold = 0.0;
    const auto s = sunsal(d, y, o);
    double grid_best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 1000; ++i) {
      for (int j = 0; i + j <= 1000; ++j) {
        const Eigen::Vector3d x(i / 1000.0, j / 1000.0, (1000 - i - j) / 1000.0);
        grid_best = std::min(grid_best, sunsal_objective(d, y, x, o.lambda));
      }
    }
    CHECK(std::abs(sunsal_objective(d, y, s.coefficients, o.lambda) - grid_best) < 1e-6);
    CHECK(std::abs(s.coefficients.sum() - 1.0) < 1e-6);
  }
}

TEST_CASE("sunsal output is nonnegative with support above the threshold") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = random_dictionary(rng, 20, 30);
    Eigen::VectorXd y = Eigen::VectorXd::Random(20).cwiseAbs();
    const auto s = sunsal(d, y);
    CHECK(s.coefficients.minCoeff() >= 0.0);
    for (Eigen::Index i = 0; i < s.coefficients.size(); ++i) {
      const bool in = std::find(s.support.begin(), s.support.end(), static_cast<std::size_t>(i)) != s.support.end();
      CHECK(in == (s.coefficients[i] > 1e-4));
      if (!in) CHECK(s.coefficients[i] == 0.0);
    }
    CHECK(s.residual_norm == doctest::Approx((y - d.atoms * s.coefficients).norm()));
  }
}

TEST_CASE("sunsal objective does not increase at a penalty above the Gram spectrum") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index l = 10 + rng() % 50, p = 3 + rng() % 60;
    const auto d = random_dictionary(rng, l, p);
    Eigen::VectorXd y(l);
    for (auto& v : y) v = u(rng);
    SunsalOptions o;
    o.lambda = std::pow(10.0, -3.0 + 3.0 * u(rng));
    o.mu = largest_gram_eigenvalue(d);
    o.record_objective = true;
    const auto s = sunsal(d, y, o);
    REQUIRE(s.objective_trace.size() == s.iterations + 1);
    for (std::size_t k = 1; k < s.objective_trace.size(); ++k) {
      CHECK(s.objective_trace[k] <= s.objective_trace[k - 1] + 1e-10);
    }
  }
}

TEST_CASE("sunsal objective can rise at a penalty far below the Gram spectrum") {
  // Descent is not a general ADMM guarantee; this pins the counterexample.
  std::mt19937_64 rng(11);
  const auto d = random_dictionary(rng, 30, 40);
  const Eigen::VectorXd y = d.atoms * Eigen::VectorXd::Constant(40, 0.05);
  SunsalOptions o;
  o.record_objective = true;
  const auto s = sunsal(d, y, o);
  double rise = 0.0;
  for (std::size_t k = 1; k < s.objective_trace.size(); ++k) {
    rise = std::max(rise, s.objective_trace[k] - s.objective_trace[k - 1]);
  }
  CHECK(rise > 1e-6);
}

TEST_CASE("sunsal wide and tall systems agree") {
  // The Woodbury branch (more atoms than samples) against a direct solve.
  std::mt19937_64 rng(5);
  const auto d = random_dictionary(rng, 12, 30);
  const Eigen::VectorXd y = Eigen::VectorXd::Random(12).cwiseAbs();
  SunsalOptions o;
  o.mu = largest_gram_eigenvalue(d);
  o.tol = 1e-11;
  o.max_iter = 100000;
  const auto s = sunsal(d, y, o);
  // Pad the rows with zeros: same problem, now tall.
  Dictionary tall = d;
  tall.atoms.conservativeResize(40, Eigen::NoChange);
  tall.atoms.bottomRows(28).setZero();
  Eigen::VectorXd ty = Eigen::VectorXd::Zero(40);
  ty.head(12) = y;
  const auto t = sunsal(tall, ty, o);
  CHECK(s.converged);
  CHECK(t.converged);
  CHECK((s.coefficients - t.coefficients).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("nnls against the unconstrained solution and KKT conditions") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index m = 5 + rng() % 20, k = 1 + rng() % 6;
    Eigen::MatrixXd a(m, k);
    for (auto& v : a.reshaped()) v = n(rng);
    Eigen::VectorXd b(m);
    for (auto& v : b) v = n(rng);
    const Eigen::VectorXd x = nnls(a, b);
    CHECK(x.minCoeff() >= 0.0);
    // KKT: gradient w = A'(b - Ax) is <= 0 everywhere and ~0 on the support.
    const Eigen::VectorXd w = a.transpose() * (b - a * x);
    for (Eigen::Index i = 0; i < k; ++i) {
      CHECK(w[i] <= 1e-9);
      if (x[i] > 0) CHECK(std::abs(w[i]) <= 1e-9);
    }
  }
  // Feasible unconstrained optimum is returned as is.
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  CHECK((nnls(a, Eigen::Vector3d(0.2, 0.0, 0.7)) - Eigen::Vector3d(0.2, 0.0, 0.7)).norm() < 1e-15);
  CHECK_THROWS_AS(nnls(a, Eigen::VectorXd::Ones(2)), DimensionError);
}

TEST_CASE("nnomp on an orthonormal dictionary is exact") {
  const auto d = from_columns(Eigen::MatrixXd::Identity(3, 3));
  const Eigen::VectorXd y = 0.7 * d.atoms.col(0) + 0.3 * d.atoms.col(2);
  const auto s = nnomp(d, y);
  CHECK(s.support == std::vector<std::size_t>{0, 2});
  CHECK(s.coefficients[0] == 0.7);
  CHECK(s.coefficients[2] == 0.3);
  CHECK(s.residual_norm == 0.0);
  CHECK(s.converged);

  // Random disjoint-support (hence orthogonal) nonnegative dictionaries.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index p = 4 + rng() % 8, width = 1 + rng() % 4;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p * width, p);
    for (Eigen::Index j = 0; j < p; ++j) {
      for (Eigen::Index i = 0; i < width; ++i) m(j * width + i, j) = u(rng);
      m.col(j) /= m.col(j).maxCoeff();
    }
    std::vector<std::size_t> idx(p);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t k = 1 + rng() % 3;
    std::vector<std::size_t> truth(idx.begin(), idx.begin() + k);
    std::sort(truth.begin(), truth.end());
    Eigen::VectorXd y = Eigen::VectorXd::Zero(p * width);
    for (std::size_t t : truth) y += u(rng) * m.col(t);
    NnompOptions o;
    o.max_atoms = k;
    CHECK(nnomp(from_columns(m), y, o).support == truth);
  }
}

TEST_CASE("nnomp agrees with exhaustive 2-atom enumeration on correlated dictionaries") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = peak_dictionary(rng, 40, 5, 0.1, 1.0 / 3.0);
    std::size_t i = rng() % 5, j = rng() % 4;
    if (j >= i) ++j;
    const Eigen::VectorXd y = u(rng) * d.atoms.col(i) + u(rng) * d.atoms.col(j);
    // Oracle: the best nonnegative fit over every pair of atoms.
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_pair;
    for (std::size_t a = 0; a < 5; ++a) {
      for (std::size_t b = a + 1; b < 5; ++b) {
        Eigen::MatrixXd sub(40, 2);
        sub << d.atoms.col(a), d.atoms.col(b);
        const double r = (y - sub * nnls(sub, y)).norm();
        if (r < best - 1e-12) {
          best = r;
          best_pair = {a, b};
        }
      }
    }
    const auto s = nnomp(d, y);
    CHECK(s.support == best_pair);
    CHECK(std::abs(s.residual_norm - best) < 1e-9);
    CHECK(s.residual_norm < 1e-9);
  }
}

TEST_CASE("nnomp residual strictly decreases per accepted atom") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = random_dictionary(rng, 30, 50);
    const Eigen::VectorXd y = Eigen::VectorXd::Random(30).cwiseAbs();
    double prev = y.norm();
    for (std::size_t k = 1; k <= 6; ++k) {
      NnompOptions o;
      o.max_atoms = k;
      o.threshold = 0.0;
      const auto s = nnomp(d, y, o);
      if (s.iterations < k) break;
      CHECK(s.residual_norm < prev);
      prev = s.residual_norm;
    }
  }
}

TEST_CASE("nnomp stops without a positively correlated atom") {
  const auto d = from_columns(Eigen::MatrixXd::Identity(2, 2));
  const auto s = nnomp(d, Eigen::Vector2d(-1.0, -2.0));
  CHECK_FALSE(s.converged);
  CHECK(s.support.empty());
  CHECK(s.iterations == 0);
  NnompOptions o;
  o.max_atoms = 0;
  CHECK_THROWS_AS(nnomp(d, Eigen::Vector2d(1, 1), o), ConfigError);
}

TEST_CASE("reconstruct components and residual bookkeeping") {
  const auto d = from_columns(Eigen::MatrixXd::Identity(3, 3));
  SparseSolution empty;
  empty.coefficients = Eigen::VectorXd::Zero(3);
  CHECK(reconstruct(d, empty).empty());
  const auto zeros = top_estimates(d, empty, 2);
  CHECK(zeros == std::vector<std::vector<double>>(2, std::vector<double>(3, 0.0)));

  const auto s = nnomp(d, Eigen::Vector3d(0.7, 0.0, 0.3));
  const auto comps = reconstruct(d, s);
  REQUIRE(comps.size() == 2);
  CHECK(comps[0].values == std::vector<double>{0.7, 0.0, 0.0});
  CHECK(comps[1].values == std::vector<double>{0.0, 0.0, 0.3});
  CHECK(comps[1].id == "a2");

  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto dd = random_dictionary(rng, 25, 40);
    const Eigen::VectorXd y = Eigen::VectorXd::Random(25).cwiseAbs();
    for (const auto& sol : {sunsal(dd, y), nnomp(dd, y)}) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(25);
      for (const auto& c : reconstruct(dd, sol)) sum += Eigen::Map<const Eigen::VectorXd>(c.values.data(), 25);
      CHECK(std::abs((y - sum).norm() - sol.residual_norm) < 1e-12);
    }
  }
}

TEST_CASE("support error means a missed true atom") {
  SparseSolution s;
  s.coefficients = Eigen::VectorXd::Zero(5);
  s.coefficients << 0.0, 0.5, 0.01, 0.3, 0.0;
  s.support = {1, 2, 3};
  CHECK_FALSE(support_misses(s, {3, 1}));
  CHECK_FALSE(support_misses(s, {2}));
  CHECK(support_misses(s, {1, 4}));
  s.support.clear();
  CHECK(support_misses(s, {0}));
  CHECK_FALSE(support_misses(s, {}));
}
