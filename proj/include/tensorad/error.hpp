#pragma once

#include <stdexcept>
#include <string>

namespace tensorad {

/// Input data violates a contract: shapes, ranges, schemas, missing records.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numeric routine could not produce a meaningful answer for its input.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DataError(what);
}

}  // namespace detail
}  // namespace tensorad
