#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include "dpls/types.hpp"

namespace dpls {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed inputs: shape mismatches, non-finite cells, violated preconditions.
class DataError : public Error {
 public:
  using Error::Error;
};

// The inputs are well-formed but the computation cannot produce an answer.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, Vector last_iterate)
      : NumericalError(what), last_iterate_(std::move(last_iterate)) {}
  const Vector& last_iterate() const { return last_iterate_; }

 private:
  Vector last_iterate_;
};

// Raised when a PLS fit cannot reach the requested component count.
class PlsRankError : public NumericalError {
 public:
  PlsRankError(const std::string& what, int achieved_q)
      : NumericalError(what), achieved_q_(achieved_q) {}
  int achieved_q() const { return achieved_q_; }

 private:
  int achieved_q_;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, int epoch)
      : NumericalError(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace dpls
