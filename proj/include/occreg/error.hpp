#pragma once

#include <stdexcept>
#include <string>

namespace occreg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

}  // namespace occreg
