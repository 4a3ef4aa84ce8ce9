#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eataudit {

// Error categories. The CLI maps them onto its exit codes.
enum class ErrorKind {
  config,      // bad arguments, unknown names, malformed job files
  data,        // unreadable or invalid input data
  degenerate,  // statistic undefined for the given data (zero variance)
};

class AuditError : public std::runtime_error {
 public:
  AuditError(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public AuditError {
 public:
  explicit ConfigError(const std::string& msg)
      : AuditError(ErrorKind::config, msg) {}
};

class DataError : public AuditError {
 public:
  explicit DataError(const std::string& msg)
      : AuditError(ErrorKind::data, msg) {}
};

class DegenerateError : public AuditError {
 public:
  explicit DegenerateError(const std::string& msg)
      : AuditError(ErrorKind::degenerate, msg) {}
};

// Reads a whole file; throws DataError when it cannot be opened.
std::string read_file(const std::string& path);

// Writes (truncating) a whole file; throws DataError on failure.
void write_file(const std::string& path, std::string_view contents);

}  // namespace eataudit
