#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace s2h {

enum class ErrorCode {
  Ok = 0,
  // data model
  DimensionMismatch,
  NonFinite,
  WavelengthOrder,
  ShapeMismatch,
  // file formats
  HeaderParse,
  PayloadSizeMismatch,
  UnsupportedInterleave,
  Io,
  // simulation / configuration
  InvalidSpec,
  InvalidArgument,
  ConfigError,
  // numerics
  TooFewBands,
  TooFewPixels,
  OddDimensions,
  SingularSystem,
  NonConvergence,
  MissingHrBands,
  DataEmpty,
  RankDeficient,
  DegenerateData,
  ZeroSpectrum,
  TooSmallForWindow,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure in the library is reported as an Error carrying a code, so
// callers (the CLI in particular) can map failures to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace s2h
