#pragma once

#include <stdexcept>
#include <string>

namespace ipsi {

// Every failure a module can raise, so callers (and the CLI exit-code
// mapping) can switch on the condition instead of parsing messages.
enum class ErrorCode {
  missing_column,
  non_binary_treatment,
  ragged_panel,
  non_numeric_value,
  time_out_of_range,
  invalid_k,
  empty_training_set,
  dimension_mismatch,
  non_finite_input,
  empty_candidates,
  invalid_bounds,
  delta_non_positive,
  pi_out_of_range,
  delta_out_of_bounds,
  no_test_units,
  too_few_units,
  zero_variance,
  invalid_b,
  unknown_dgp,
  invalid_config,
  io_failure,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace ipsi
