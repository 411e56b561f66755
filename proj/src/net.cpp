#include "ontree/net.hpp"

#include <atomic>
#include <cctype>

#include "httplib.h"

#include "ontree/error.hpp"

namespace ontree::net {

namespace {

std::atomic<bool> g_allowed{true};
std::atomic<std::uint64_t> g_attempts{0};

void check_guard(const std::string& url) {
  ++g_attempts;
  if (!g_allowed.load()) throw NetworkDeniedError("network access denied in offline mode: " + url);
}

std::unique_ptr<httplib::Client> make_client(const Url& u, std::chrono::seconds timeout) {
  auto client = std::make_unique<httplib::Client>(u.origin());
  client->set_connection_timeout(timeout);
  client->set_read_timeout(timeout);
  client->set_write_timeout(timeout);
  client->set_follow_location(true);
  return client;
}

HttpResponse convert(const httplib::Result& res, const std::string& url) {
  if (!res) throw TransportError(url + ": " + httplib::to_string(res.error()));
  HttpResponse out;
  out.status = res->status;
  out.body = res->body;
  out.content_type = res->get_header_value("Content-Type");
  for (const auto& [k, v] : res->headers) {
    std::string key = k;
    for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.headers[key] = v;
  }
  return out;
}

httplib::Headers to_httplib(const Headers& headers) {
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  return h;
}

}  // namespace

std::string Url::origin() const {
  std::string out = scheme + "://" + host;
  bool default_port = (scheme == "http" && port == 80) || (scheme == "https" && port == 443);
  if (!default_port) out += ":" + std::to_string(port);
  return out;
}

Url parse_url(const std::string& url) {
  Url u;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("not an absolute URL: " + url);
  u.scheme = url.substr(0, scheme_end);
  for (auto& c : u.scheme) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (u.scheme != "http" && u.scheme != "https") throw ValidationError("unsupported scheme: " + url);
  auto rest = url.substr(scheme_end + 3);
  auto slash = rest.find_first_of("/?#");
  std::string authority = rest.substr(0, slash);
  u.path = slash == std::string::npos ? "/" : rest.substr(slash);
  if (!u.path.empty() && u.path[0] != '/') u.path = "/" + u.path;
  if (auto hash = u.path.find('#'); hash != std::string::npos) u.path.erase(hash);
  if (u.path.empty()) u.path = "/";
  auto colon = authority.rfind(':');
  if (colon != std::string::npos && authority.find(']') == std::string::npos) {
    u.host = authority.substr(0, colon);
    try {
      u.port = std::stoi(authority.substr(colon + 1));
    } catch (const std::exception&) {
      throw ValidationError("bad port in URL: " + url);
    }
  } else {
    u.host = authority;
    u.port = u.scheme == "https" ? 443 : 80;
  }
  if (u.host.empty()) throw ValidationError("missing host in URL: " + url);
  return u;
}

void NetworkGuard::set_allowed(bool allowed) noexcept { g_allowed = allowed; }
bool NetworkGuard::allowed() noexcept { return g_allowed.load(); }
std::uint64_t NetworkGuard::attempts() noexcept { return g_attempts.load(); }
void NetworkGuard::reset_attempts() noexcept { g_attempts = 0; }

HttpResponse get(const std::string& url, const Headers& headers, std::chrono::seconds timeout) {
  check_guard(url);
  Url u = parse_url(url);
  auto client = make_client(u, timeout);
  return convert(client->Get(u.path, to_httplib(headers)), url);
}

HttpResponse post(const std::string& url, const std::string& body, const std::string& content_type,
                  const Headers& headers, std::chrono::seconds timeout) {
  check_guard(url);
  Url u = parse_url(url);
  auto client = make_client(u, timeout);
  return convert(client->Post(u.path, to_httplib(headers), body, content_type), url);
}

}  // namespace ontree::net
