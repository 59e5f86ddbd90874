#pragma once

#include <stdexcept>
#include <string>

namespace qrs {

enum class Err {
  IoFailure,
  EmptyRecord,
  MalformedBinary,
  ParseFailure,
  NonFiniteValue,
  NegativeIndex,
  InvalidParams,
  DepthOutOfRange,
  ShapeMismatch,
  BadMagic,
  TruncatedFile,
  TilingViolation,
  NotEnoughSubjects,
  NonFiniteLoss,
  MissingCache,
  MissingInput,
};

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Err code() const noexcept { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& what) { throw Error(code, what); }

}  // namespace qrs
