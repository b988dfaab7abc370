// Copyright 2026 The jodscale Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef JODSCALE_ERROR_HPP_
#define JODSCALE_ERROR_HPP_

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>

namespace jodscale {

inline constexpr const char* kVersion = "0.1.0";

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (JSON/CSV syntax, missing columns, bad numbers).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input parses but violates a data invariant: unknown or duplicate
/// conditions, negative counts, disconnected comparison graphs, ...
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// A dataset that cannot be scaled (e.g. zero rating variance). Carries the
/// dataset name so callers can report it.
class DegenerateDatasetError : public IntegrityError {
 public:
  DegenerateDatasetError(std::string dataset, const std::string& what)
      : IntegrityError("dataset '" + dataset + "': " + what),
        dataset_(std::move(dataset)) {}
  const std::string& dataset() const noexcept { return dataset_; }

 private:
  std::string dataset_;
};

/// Numerical failure: non-finite values, undefined statistics, strict-mode
/// non-convergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

using WarningSink = std::function<void(const std::string&)>;

namespace detail {
inline WarningSink& warning_sink() {
  static WarningSink sink = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return sink;
}
}  // namespace detail

/// Replaces the process-wide warning sink and returns the previous one.
inline WarningSink set_warning_sink(WarningSink sink) {
  return std::exchange(detail::warning_sink(), std::move(sink));
}

inline void warn(const std::string& msg) {
  static std::mutex mutex;
  std::lock_guard lock(mutex);
  if (detail::warning_sink()) detail::warning_sink()(msg);
}

/// Installs a sink for the lifetime of the guard. Tests use it to capture
/// or silence warnings.
class ScopedWarningSink {
 public:
  explicit ScopedWarningSink(WarningSink sink)
      : previous_(set_warning_sink(std::move(sink))) {}
  ~ScopedWarningSink() { set_warning_sink(std::move(previous_)); }
  ScopedWarningSink(const ScopedWarningSink&) = delete;
  ScopedWarningSink& operator=(const ScopedWarningSink&) = delete;

 private:
  WarningSink previous_;
};

}  // namespace jodscale

#endif  // JODSCALE_ERROR_HPP_
