// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pfpl {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Bad labels or otherwise malformed in-memory data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A file could not be ingested. `path()` names the offending file.
class IngestionError : public Error {
 public:
  IngestionError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class PartitionError : public Error {
 public:
  using Error::Error;
};

/// Client/server contract violation (wrong membership, missing cluster, ...).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient. Carries the client and, when known, the batch.
class NumericError : public Error {
 public:
  static constexpr std::int64_t kNoBatch = -1;

  NumericError(std::uint32_t client, std::int64_t batch, const std::string& what)
      : Error("client " + std::to_string(client) +
              (batch >= 0 ? ", batch " + std::to_string(batch) : std::string()) + ": " + what),
        client_(client),
        batch_(batch) {}

  std::uint32_t client() const noexcept { return client_; }
  std::int64_t batch() const noexcept { return batch_; }

 private:
  std::uint32_t client_;
  std::int64_t batch_;
};

}  // namespace pfpl
