#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace iqs {

using Complex = std::complex<double>;
using VectorXd = Eigen::VectorXd;
using VectorXcd = Eigen::VectorXcd;
using MatrixXd = Eigen::MatrixXd;
using MatrixXcd = Eigen::MatrixXcd;
using SparseXcd = Eigen::SparseMatrix<Complex>;

inline constexpr double kPi = 3.14159265358979323846;

// Error taxonomy shared by all modules. Each named failure mode in the
// public contracts maps to one subclass so callers can catch selectively.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define IQS_DEFINE_ERROR(NAME)                                 \
  struct NAME : Error {                                        \
    explicit NAME(const std::string& msg) : Error(#NAME ": " + msg) {} \
  }

IQS_DEFINE_ERROR(DimensionMismatch);
IQS_DEFINE_ERROR(SectorViolation);
IQS_DEFINE_ERROR(IndexOutOfRange);
IQS_DEFINE_ERROR(ConvergenceFailure);
IQS_DEFINE_ERROR(DimensionCap);
IQS_DEFINE_ERROR(NonHermitianPool);
IQS_DEFINE_ERROR(IterationCap);
IQS_DEFINE_ERROR(InfeasibleConstraints);
IQS_DEFINE_ERROR(NoSolution);
IQS_DEFINE_ERROR(SingularSystem);
IQS_DEFINE_ERROR(DivergenceDetected);
IQS_DEFINE_ERROR(NotGroundState);
IQS_DEFINE_ERROR(DegenerateGroundState);
IQS_DEFINE_ERROR(ConfigInvalid);
IQS_DEFINE_ERROR(ExperimentFailed);

#undef IQS_DEFINE_ERROR

// SplitMix64 step; used to derive independent RNG streams from
// (seed, stream index) pairs so parallel evaluation stays reproducible.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(mix64(seed) ^ mix64(index + 0x51ed2701a2b3c4d5ULL));
}

}  // namespace iqs
