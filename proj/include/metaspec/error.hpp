#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace metaspec {

/// Fatal error raised by one of the pipeline modules. The module name is kept
/// separately so the CLI can report where a run failed.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

  [[nodiscard]] const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

}  // namespace metaspec
