#pragma once

#include <stdexcept>
#include <string>

namespace debias {

// All library failures surface as this exception; the message names the
// offending input (file and line, parameter block, step index, ...).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace debias
