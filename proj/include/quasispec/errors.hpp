#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace quasispec {

struct Error : public std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace error {

struct SingularLeadingBlock : public Error {
  explicit SingularLeadingBlock(double det)
      : Error("leading d x d block of the projection matrix is singular (|det| = " +
              std::to_string(det) + "); reorder the columns of P") {}
};

struct RankDeficient : public Error {
  RankDeficient(int rank, int d)
      : Error("projection matrix has numerical rank " + std::to_string(rank) + " < d = " +
              std::to_string(d)) {}
};

struct OverflowRisk : public Error {
  OverflowRisk(double dof, std::size_t cap)
      : Error("index set would hold " + std::to_string(dof) + " entries, above the DOF cap " +
              std::to_string(cap)) {}
};

struct OutOfRange : public Error {
  explicit OutOfRange(const std::string& what) : Error(what) {}
};

struct NonFinite : public Error {
  explicit NonFinite(std::size_t rank)
      : Error("non-finite sample at grid rank " + std::to_string(rank)) {}
};

struct ShapeMismatch : public Error {
  ShapeMismatch(std::size_t got, std::size_t expected)
      : Error("shape mismatch: got " + std::to_string(got) + " entries, expected " +
              std::to_string(expected)) {}
};

struct NonPositiveDiagonal : public Error {
  NonPositiveDiagonal(std::size_t rank, double value)
      : Error("Hamiltonian diagonal entry " + std::to_string(rank) + " is " +
              std::to_string(value) + " <= 0; shift the potential by a constant") {}
};

struct NotPositiveDefinite : public Error {
  explicit NotPositiveDefinite(double lambda_min)
      : Error("operator is not positive definite (lambda_min estimate " +
              std::to_string(lambda_min) + ")") {}
};

struct ZeroReference : public Error {
  ZeroReference() : Error("reference eigenvalue is zero; relative error undefined") {}
};

struct ConfigError : public Error {
  explicit ConfigError(const std::string& what) : Error("config: " + what) {}
};

}  // namespace error
}  // namespace quasispec
