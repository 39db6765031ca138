#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vanka {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid or degenerate mesh input (cylinder touching a wall, inverted cells).
class MeshError : public Error {
 public:
  using Error::Error;
};

class AssemblyError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Zero pivot in a dense factorization. `subdomain` is -1 for the coarse solve.
class SingularLocalSystem : public Error {
 public:
  SingularLocalSystem(std::int32_t subdomain, std::int32_t pivot)
      : Error("singular local system (subdomain " + std::to_string(subdomain) + ", pivot " +
              std::to_string(pivot) + ")"),
        subdomain_(subdomain),
        pivot_(pivot) {}

  std::int32_t subdomain() const { return subdomain_; }
  std::int32_t pivot() const { return pivot_; }

 private:
  std::int32_t subdomain_;
  std::int32_t pivot_;
};

}  // namespace vanka
