#pragma once

#include <stdexcept>
#include <string>

namespace flexcert {

enum class ErrorCode {
  division_by_zero,
  incompatible_towers,
  tower_limit,
  precondition,
  point_not_on_quadric,
  singular_point,
  rank_too_low,
  retry_limit,
  out_of_domain,
  hyperplane_witness_missing,
  endpoint_on_quadric,
  singular_endpoint,
  line_not_in_x,
  pencil_not_smooth,
  duplicate_lambda,
  parse,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace flexcert
