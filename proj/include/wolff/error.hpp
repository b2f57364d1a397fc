#pragma once

#include <stdexcept>
#include <string>

namespace wolff {

// exit codes used by the cli
enum class ErrorKind { Input = 2, Config = 3, Numeric = 4, Budget = 5 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct InputError : Error {
  explicit InputError(const std::string& m) : Error(ErrorKind::Input, m) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorKind::Config, m) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error(ErrorKind::Numeric, m) {}
};
struct BudgetError : Error {
  explicit BudgetError(const std::string& m) : Error(ErrorKind::Budget, m) {}
};

}  // namespace wolff
