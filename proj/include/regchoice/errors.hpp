/* Copyright 2026 The regchoice Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef REGCHOICE_ERRORS_HPP_
#define REGCHOICE_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace regchoice {

// Malformed computation graph: shape mismatch, foreign leaf, wrong leaf kind.
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Bad data handed to an operation (non-finite attributes, bad one-hot rows,
// unparseable cells).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid or inconsistent configuration. `key_path` names the offending key
// when the error originates from a config file.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what, std::string key_path = {})
      : std::invalid_argument(key_path.empty() ? what : key_path + ": " + what),
        key_path_(std::move(key_path)) {}
  const std::string& key_path() const noexcept { return key_path_; }

 private:
  std::string key_path_;
};

// Training produced a non-finite objective or gradient.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace regchoice

#endif  // REGCHOICE_ERRORS_HPP_
