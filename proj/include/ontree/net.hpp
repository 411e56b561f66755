#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace ontree::net {

struct Url {
  std::string scheme;  // "http" or "https"
  std::string host;
  int port = 0;
  std::string path;  // includes query, always starts with '/'

  std::string origin() const;
};

/// Parses an absolute http(s) URL. Throws ValidationError on anything else.
Url parse_url(const std::string& url);

struct HttpResponse {
  int status = 0;
  std::string body;
  std::string content_type;
  std::map<std::string, std::string> headers;
};

/// Process-wide switch and counter for outbound traffic. Every request issued
/// through this namespace is counted, and fails with NetworkDeniedError while
/// the guard is closed.
class NetworkGuard {
 public:
  static void set_allowed(bool allowed) noexcept;
  static bool allowed() noexcept;
  static std::uint64_t attempts() noexcept;
  static void reset_attempts() noexcept;
};

/// RAII scope that denies network access and restores the previous state.
class OfflineScope {
 public:
  OfflineScope() : previous_(NetworkGuard::allowed()) { NetworkGuard::set_allowed(false); }
  ~OfflineScope() { NetworkGuard::set_allowed(previous_); }
  OfflineScope(const OfflineScope&) = delete;
  OfflineScope& operator=(const OfflineScope&) = delete;

 private:
  bool previous_;
};

using Headers = std::map<std::string, std::string>;

/// Transport failures (connect, timeout, TLS) throw TransportError; HTTP error
/// statuses are returned, not thrown.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

HttpResponse get(const std::string& url, const Headers& headers, std::chrono::seconds timeout);
HttpResponse post(const std::string& url, const std::string& body, const std::string& content_type,
                  const Headers& headers, std::chrono::seconds timeout);

}  // namespace ontree::net
