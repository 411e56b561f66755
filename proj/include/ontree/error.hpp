#pragma once

#include <stdexcept>
#include <string>

namespace ontree {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// IO or network failure while fetching a source; the caller may retry.
class FetchError : public Error {
 public:
  FetchError(std::string locator, const std::string& what)
      : Error("fetch failed for " + locator + ": " + what), locator_(std::move(locator)) {}
  const std::string& locator() const noexcept { return locator_; }
  bool retryable() const noexcept { return true; }

 private:
  std::string locator_;
};

class UnsupportedContentError : public Error {
 public:
  using Error::Error;
};

class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, std::string request_id)
      : Error(what + " (request " + request_id + ")"), request_id_(std::move(request_id)) {}
  const std::string& request_id() const noexcept { return request_id_; }

 private:
  std::string request_id_;
};

class EmptyCompletionError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

/// Raised when an offline build attempts to touch the network.
class NetworkDeniedError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  ConflictError(long long current_revision)
      : Error("revision conflict; current revision is " + std::to_string(current_revision)),
        current_revision_(current_revision) {}
  long long current_revision() const noexcept { return current_revision_; }

 private:
  long long current_revision_;
};

class PayloadTooLargeError : public Error {
 public:
  using Error::Error;
};

class StructureError : public Error {
 public:
  using Error::Error;
};

/// Evaluation input inconsistency (missing document, sentence-count mismatch).
class MismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace ontree
