#pragma once

#include <stdexcept>
#include <string>

namespace smallnoise {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The deterministic flow or a simulated path left the finite range.
class NonFiniteState : public Error {
 public:
  using Error::Error;
};

/// A covariance (S_k or Sigma) failed Cholesky factorization after ridge repair.
class SingularCovariance : public Error {
 public:
  using Error::Error;
};

/// Every optimizer start hit its iteration cap.
class NoConvergence : public Error {
 public:
  using Error::Error;
};

/// Jump-process exposure integral is zero.
class ZeroExposure : public Error {
 public:
  using Error::Error;
};

/// Invalid user input: dimensions, ids, boxes, config documents.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace smallnoise
