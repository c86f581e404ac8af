#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace qcdeval {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input or configuration violates a documented precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Frame index into a sequence (0-based).
using Frame = std::int64_t;

/// A frame index that may be infinite. `std::nullopt` encodes infinity
/// (no changepoint / no alarm).
using MaybeFrame = std::optional<Frame>;

inline bool is_infinite(const MaybeFrame& f) { return !f.has_value(); }

inline std::string to_string(const MaybeFrame& f) {
  return f ? std::to_string(*f) : std::string("inf");
}

}  // namespace qcdeval
