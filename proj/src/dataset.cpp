#include "dpls/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dpls/error.hpp"

namespace dpls {
namespace {

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& a) {
  return a.size() == 0 || a.allFinite();
}

}  // namespace

Dataset::Dataset(Vector y, Vector p, Matrix z, Matrix x)
    : y_(std::move(y)), p_(std::move(p)), z_(std::move(z)), x_(std::move(x)) {
  const Index n = y_.size();
  if (p_.size() != n || z_.rows() != n || x_.rows() != n) {
    throw DataError("dataset: row counts differ (y " + std::to_string(n) + ", p " +
                    std::to_string(p_.size()) + ", z " + std::to_string(z_.rows()) + ", x " +
                    std::to_string(x_.rows()) + ")");
  }
  if (z_.cols() < 1) throw DataError("dataset: at least one instrument column is required");
  if (!all_finite(y_) || !all_finite(p_) || !all_finite(z_) || !all_finite(x_)) {
    throw DataError("dataset: non-finite entry");
  }
  if (z_.cols() + x_.cols() >= n) {
    throw DataError("dataset: instruments plus covariates (" +
                    std::to_string(z_.cols() + x_.cols()) +
                    ") must be strictly fewer than observations (" + std::to_string(n) + ")");
  }
}

Matrix hcat(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DataError("hcat: row counts differ (" + std::to_string(a.rows()) + " vs " +
                    std::to_string(b.rows()) + ")");
  }
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

AugmentedInstruments augment_instruments(const Matrix& z, const Matrix& x) {
  if (z.rows() != x.rows()) {
    throw DataError("augment_instruments: z has " + std::to_string(z.rows()) +
                    " rows but x has " + std::to_string(x.rows()));
  }
  return {hcat(z, x), z.cols(), x.cols()};
}

SplitIndices split_indices(Index n, double test_fraction, SeededRng& rng) {
  if (n < 4) throw DataError("split: need at least 4 rows, got " + std::to_string(n));
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw DataError("split: test fraction must lie in (0, 1)");
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  rng.shuffle(std::span<Index>(order));
  auto n_test = static_cast<Index>(std::llround(static_cast<double>(n) * test_fraction));
  n_test = std::clamp<Index>(n_test, 1, n - 1);
  SplitIndices out;
  out.test.assign(order.begin(), order.begin() + n_test);
  out.train.assign(order.begin() + n_test, order.end());
  std::sort(out.test.begin(), out.test.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double test_fraction,
                                          SeededRng& rng) {
  const SplitIndices idx = split_indices(ds.n(), test_fraction, rng);
  const Index width = ds.m() + ds.k();
  const auto smaller = static_cast<Index>(std::min(idx.train.size(), idx.test.size()));
  if (width >= smaller) {
    throw DataError("split: a partition of " + std::to_string(smaller) +
                    " rows cannot hold " + std::to_string(width) +
                    " instrument and covariate columns");
  }
  return {take_rows(ds, idx.train), take_rows(ds, idx.test)};
}

std::vector<int> fold_assignment(Index n, int folds, SeededRng& rng) {
  if (folds < 2 || folds > n) {
    throw DataError("fold_assignment: need 2 <= folds <= n, got " + std::to_string(folds));
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  rng.shuffle(std::span<Index>(order));
  std::vector<int> label(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) {
    label[static_cast<std::size_t>(order[i])] = static_cast<int>(i % static_cast<std::size_t>(folds));
  }
  return label;
}

Matrix take_rows(const Matrix& a, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = a.row(rows[i]);
  return out;
}

Vector take_rows(const Vector& v, std::span<const Index> rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = v(rows[i]);
  return out;
}

Dataset take_rows(const Dataset& ds, std::span<const Index> rows) {
  return Dataset(take_rows(ds.y(), rows), take_rows(ds.p(), rows), take_rows(ds.z(), rows),
                 take_rows(ds.x(), rows));
}

}  // namespace dpls
