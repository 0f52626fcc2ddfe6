#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace graft {

/// Base class for every domain error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document or unresolved reference.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A build stage failed. `stage()` names the pipeline stage that raised it.
class BuildError : public Error {
 public:
  BuildError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// The dependency graph between chains has a directed cycle.
class CycleError : public BuildError {
 public:
  explicit CycleError(std::vector<std::string> witness)
      : BuildError("acyclicity", describe(witness)), witness_(std::move(witness)) {}

  const std::vector<std::string>& witness() const noexcept { return witness_; }

 private:
  static std::string describe(const std::vector<std::string>& w) {
    std::string s = "cycle witness {";
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (i) s += ", ";
      s += w[i];
    }
    return s + "} in chain dependency graph";
  }

  std::vector<std::string> witness_;
};

/// An operator would leave a distribution with no support.
/// Carries the offending row (its options) and target slice.
class EmptySupportError : public Error {
 public:
  EmptySupportError(std::string row, std::vector<std::string> target, const std::string& what)
      : Error(what), row_(std::move(row)), target_(std::move(target)) {}

  const std::string& row() const noexcept { return row_; }
  const std::vector<std::string>& target() const noexcept { return target_; }

 private:
  std::string row_;
  std::vector<std::string> target_;
};

/// Every tuple with positive probability is excluded by the avoid set.
class SupportExhaustedError : public Error {
 public:
  using Error::Error;
};

/// Artifacts produced against different tree versions were combined.
class VersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace graft
