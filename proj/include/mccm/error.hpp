#pragma once

#include <stdexcept>
#include <string>

namespace mccm {

/// Distinguishes failure causes so callers (and the CLI exit-code mapping)
/// can react without parsing messages.
enum class Errc {
  invalid_argument,
  malformed_header,
  truncated_payload,
  bad_magic,
  version_mismatch,
  truncated,
  io,
  shape_mismatch,
  stale_cache,
  single_class,
  incomplete_grid,
  id_mismatch,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(Errc::invalid_argument, what);
}

}  // namespace mccm
