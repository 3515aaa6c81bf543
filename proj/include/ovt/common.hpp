#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ovt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
  using Error::Error;
};

/// Relative eigengap at the requested cut fell below the configured floor.
struct GapTooSmall : Error {
  double gap = 0.0;
  double floor = 0.0;
  GapTooSmall(const std::string& msg, double g, double f) : Error(msg), gap(g), floor(f) {}
};

/// An iterative solve exhausted its budget without meeting its tolerance.
struct NoConvergence : Error {
  using Error::Error;
};

/// Pseudo-inverse power hit an eigenvalue at or below the zero floor.
struct ZeroEigenvalue : Error {
  using Error::Error;
};

/// Matrix handed to a projector-only routine is not an orthogonal projector.
struct NotAProjector : Error {
  using Error::Error;
};

/// Operation requires truncating a reshaping that straddles a pending
/// mode-2 multiplier; apply or clear the multiplier first.
struct UnsupportedMode2Multiplier : Error {
  using Error::Error;
};

struct RankBudgetExceeded : Error {
  using Error::Error;
};

struct DimensionCapExceeded : Error {
  using Error::Error;
};

struct ZeroVector : Error {
  using Error::Error;
};

struct EmptySet : Error {
  using Error::Error;
};

/// A structural hypothesis check (perturbation bound audit) failed.
struct HypothesisViolated : Error {
  using Error::Error;
};

/// Rejection-sampling style generator exceeded its resample budget.
struct DegenerateSample : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

/// A pipeline stage found the instance outside its working regime.
struct ConditionFailure : Error {
  std::string stage;
  double measured = 0.0;
  double floor = 0.0;
  ConditionFailure(const std::string& stg, const std::string& msg, double m, double f)
      : Error(msg), stage(stg), measured(m), floor(f) {}
};

// Lightweight floating-op counter for scaling tests. Counts the dominant
// inner-loop multiply-adds only; not a profiler.
inline thread_local std::uint64_t g_opcount = 0;

inline void reset_opcount() { g_opcount = 0; }
inline std::uint64_t opcount() { return g_opcount; }
inline void add_opcount(std::uint64_t n) { g_opcount += n; }

// Debug-only fault switch: negates one symmetrizer coefficient so the
// self-test suite can prove it detects a broken projector. Never set in
// normal operation.
inline std::atomic<bool> g_sym_fault{false};

}  // namespace ovt
