// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Library-based unmixing baselines: SUnSAL (nonnegative l1 by ADMM) and
// NNOMP (greedy pursuit with nonnegative refits).

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <vector>

#include "rssnet/data/spectrum.hpp"

namespace rssnet::sparse {

// Columns are max-normalized, nonnegative, finite atoms.
struct Dictionary {
  Eigen::MatrixXd atoms;  // L x P
  std::vector<std::string> ids;

  std::size_t length() const { return static_cast<std::size_t>(atoms.rows()); }
  std::size_t size() const { return static_cast<std::size_t>(atoms.cols()); }
  // InvariantError on a zero, negative, non-finite or unnormalized column.
  void validate() const;
};

// Max-normalizes each spectrum into a column. All spectra must share a length.
Dictionary make_dictionary(const std::vector<data::Spectrum>& spectra);

struct SparseSolution {
  // Entries at or below the support threshold are stored as exact zeros, so
  // support and coefficients always agree.
  Eigen::VectorXd coefficients;
  std::vector<std::size_t> support;  // ascending
  double residual_norm = 0.0;        // ||y - D x|| for the stored coefficients
  std::size_t iterations = 0;
  bool converged = false;
  // SUnSAL only, when requested: objective at the feasible iterate z after
  // every iteration (index 0 is the starting point z = 0).
  std::vector<double> objective_trace;
};

struct SunsalOptions {
  double lambda = 1e-3;
  double mu = 0.1;
  std::size_t max_iter = 1000;
  double tol = 1e-6;
  double threshold = 1e-4;
  bool sum_to_one = false;
  bool record_objective = false;
};

// min 1/2 ||D x - y||^2 + lambda ||x||_1  s.t.  x >= 0 (and 1'x = 1 if asked).
SparseSolution sunsal(const Dictionary& d, const Eigen::VectorXd& y, const SunsalOptions& opt = {});

// 1/2 ||D x - y||^2 + lambda ||x||_1, the quantity SUnSAL minimizes.
double sunsal_objective(const Dictionary& d, const Eigen::VectorXd& y, const Eigen::VectorXd& x, double lambda);

struct NnompOptions {
  std::size_t max_atoms = 2;
  double residual_tol = 1e-6;
  double threshold = 1e-4;
};

// Stops early with converged = false when no remaining atom correlates
// positively with the residual.
SparseSolution nnomp(const Dictionary& d, const Eigen::VectorXd& y, const NnompOptions& opt = {});

// Lawson-Hanson active set: argmin ||A x - b|| over x >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, std::size_t max_iter = 0);

struct Component {
  std::size_t atom = 0;
  std::string id;
  double coefficient = 0.0;
  std::vector<double> values;  // coefficient * atom
};

// One component per support atom, in support order.
std::vector<Component> reconstruct(const Dictionary& d, const SparseSolution& sol);

// The k largest components as separation estimates, padded with zero
// spectra when the support is smaller than k.
std::vector<std::vector<double>> top_estimates(const Dictionary& d, const SparseSolution& sol, std::size_t k);

// Support error: at least one true atom is absent from the selected support.
bool support_misses(const SparseSolution& sol, const std::vector<std::size_t>& true_atoms);

}  // namespace rssnet::sparse
