#pragma once

#include <stdexcept>
#include <string>

namespace vadasr {

// Every failure raised by the library derives from Error. The category
// decides the CLI exit status.
enum class ErrorCategory { kUsage, kData, kNumeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorCategory::kUsage, what) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorCategory::kUsage, what) {}
};

// Malformed files: WAV headers, masks, checkpoints, posterior grids.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorCategory::kData, what) {}
};

class UnsupportedFormat : public FormatError {
 public:
  explicit UnsupportedFormat(const std::string& what) : FormatError(what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::kData, what) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(ErrorCategory::kData, what) {}
};

class EmptyInput : public Error {
 public:
  explicit EmptyInput(const std::string& what) : Error(ErrorCategory::kData, what) {}
};

class InvalidSpec : public Error {
 public:
  explicit InvalidSpec(const std::string& what) : Error(ErrorCategory::kData, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::kUsage, what) {}
};

class LayoutError : public Error {
 public:
  explicit LayoutError(const std::string& what) : Error(ErrorCategory::kData, what) {}
};

class VocabularyError : public Error {
 public:
  explicit VocabularyError(const std::string& what) : Error(ErrorCategory::kData, what) {}
};

class RangeError : public Error {
 public:
  explicit RangeError(const std::string& what) : Error(ErrorCategory::kData, what) {}
};

// The target cannot be aligned to the grid at all (too few frames).
class InfeasibleTarget : public Error {
 public:
  explicit InfeasibleTarget(const std::string& what)
      : Error(ErrorCategory::kData, what) {}
};

class SizeError : public Error {
 public:
  explicit SizeError(const std::string& what) : Error(ErrorCategory::kUsage, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorCategory::kNumeric, what) {}
};

}  // namespace vadasr
