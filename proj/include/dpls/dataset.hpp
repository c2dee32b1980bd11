#pragma once

#include <span>
#include <utility>
#include <vector>

#include "dpls/rng.hpp"
#include "dpls/types.hpp"

namespace dpls {

/// Outcome y, policy p, instruments z (n x m) and covariates x (n x k).
///
/// Construction validates: equal row counts, finite entries, at least one
/// instrument, and m + k < n. Violations throw DataError; nothing is repaired.
class Dataset {
 public:
  Dataset(Vector y, Vector p, Matrix z, Matrix x);

  const Vector& y() const { return y_; }
  const Vector& p() const { return p_; }
  const Matrix& z() const { return z_; }
  const Matrix& x() const { return x_; }

  Index n() const { return y_.size(); }
  Index m() const { return z_.cols(); }
  Index k() const { return x_.cols(); }

 private:
  Vector y_;
  Vector p_;
  Matrix z_;
  Matrix x_;
};

/// Instruments augmented with covariates: zbar = [z, x].
struct AugmentedInstruments {
  Matrix zbar;
  Index m = 0;
  Index k = 0;
};

AugmentedInstruments augment_instruments(const Matrix& z, const Matrix& x);

struct SplitIndices {
  std::vector<Index> train;
  std::vector<Index> test;
};

/// Random permutation cut: round(n * test_fraction) rows go to the test side.
/// Both index lists are returned sorted.
SplitIndices split_indices(Index n, double test_fraction, SeededRng& rng);

/// Returns (train, test). Throws DataError if either side would violate
/// m + k < n.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double test_fraction,
                                          SeededRng& rng);

Dataset take_rows(const Dataset& ds, std::span<const Index> rows);
Matrix take_rows(const Matrix& a, std::span<const Index> rows);
Vector take_rows(const Vector& v, std::span<const Index> rows);

/// Balanced fold labels in [0, folds) assigned over a random permutation.
std::vector<int> fold_assignment(Index n, int folds, SeededRng& rng);

/// Column concatenation [a, b] with row-count check.
Matrix hcat(const Matrix& a, const Matrix& b);

}  // namespace dpls
