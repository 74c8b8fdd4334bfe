#pragma once

#include <stdexcept>
#include <string>

namespace latmap {

enum class ErrorCode {
  invalid_argument,
  invalid_state,
  numeric,
  degenerate_weights,
  no_path,
  no_pose,
  unsupported,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

}  // namespace latmap
