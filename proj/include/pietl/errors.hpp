#pragma once

#include <stdexcept>
#include <string>

namespace pietl {

// Malformed input data (bad records, inconsistent files). Maps to exit code 2.
class data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A path could not be opened or written.
class io_error : public data_error {
 public:
  using data_error::data_error;
};

// Non-finite values escaped the sampler. Maps to exit code 3.
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pietl
