#pragma once

#include <stdexcept>
#include <string>

namespace fastknock {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(const std::string& what = "matrix is not positive definite")
      : Error(what) {}
};

class DowndateFailure : public Error {
 public:
  explicit DowndateFailure(const std::string& what = "Cholesky downdate failure: result is not positive definite")
      : Error(what) {}
};

class SingularUpdate : public Error {
 public:
  explicit SingularUpdate(const std::string& what = "QR singular update: |R_ii| below 1e-12")
      : Error(what) {}
};

class NotConverged : public Error {
 public:
  explicit NotConverged(const std::string& what = "eigensolver not converged") : Error(what) {}
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DegenerateFeature : public Error {
 public:
  DegenerateFeature(std::size_t index, const std::string& what)
      : Error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class InfeasibleSampling : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace fastknock
