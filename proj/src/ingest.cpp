#include "ontree/ingest.hpp"

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include "ontree/error.hpp"
#include "ontree/net.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;

namespace ontree {

namespace detail {

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    static constexpr std::array<std::uint32_t, 5> min_cp{0, 0, 0x80, 0x800, 0x10000};
    if (cp < min_cp[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += len;
  }
  return true;
}

std::size_t utf8_prefix(std::string_view s, std::size_t max_bytes) {
  if (s.size() <= max_bytes) return s.size();
  std::size_t n = max_bytes;
  while (n > 0 && (static_cast<unsigned char>(s[n]) & 0xC0) == 0x80) --n;
  return n;
}

}  // namespace detail

namespace {

bool has_scheme(std::string_view t) {
  auto colon = t.find(':');
  if (colon == std::string_view::npos || colon < 2) return false;
  if (!std::isalpha(static_cast<unsigned char>(t[0]))) return false;
  for (std::size_t i = 1; i < colon; ++i) {
    char c = t[i];
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' && c != '.') return false;
  }
  return true;
}

std::string percent_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size() && std::isxdigit(static_cast<unsigned char>(s[i + 1])) &&
        std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
      out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

// Removes "." and ".." segments from an absolute URL path.
std::string normalize_url_path(const std::string& path) {
  std::string suffix;
  std::string p = path;
  if (auto q = p.find_first_of("?#"); q != std::string::npos) {
    suffix = p.substr(q);
    p.erase(q);
  }
  std::vector<std::string> parts;
  std::stringstream ss(p);
  std::string seg;
  while (std::getline(ss, seg, '/')) {
    if (seg.empty() || seg == ".") continue;
    if (seg == "..") {
      if (!parts.empty()) parts.pop_back();
      continue;
    }
    parts.push_back(seg);
  }
  std::string out;
  for (const auto& part : parts) out += "/" + part;
  if (out.empty() || (!p.empty() && p.back() == '/')) out += "/";
  return out + suffix;
}

std::string split_fragment(std::string& target) {
  auto hash = target.find('#');
  if (hash == std::string::npos) return {};
  std::string frag = target.substr(hash);
  target.erase(hash);
  return frag;
}

FetchResult finish_fetch(const SourceLocator& locator, std::string bytes) {
  FetchResult out;
  out.sha256 = sha256_hex(bytes);
  if (bytes.find('\0') != std::string::npos)
    throw UnsupportedContentError("binary content at " + locator.value);
  if (bytes.size() >= 3 && bytes.compare(0, 3, "\xEF\xBB\xBF") == 0) bytes.erase(0, 3);
  if (!detail::valid_utf8(bytes)) throw UnsupportedContentError("content is not UTF-8: " + locator.value);
  out.text = std::move(bytes);
  return out;
}

std::string display_name_for(const SourceLocator& loc, const SourceLocator& entry) {
  if (loc.kind == LocatorKind::http_url || entry.kind == LocatorKind::http_url) return loc.target();
  auto dir = fs::path(entry.target()).parent_path();
  auto rel = fs::path(loc.target()).lexically_relative(dir).generic_string();
  if (rel.empty() || detail::starts_with(rel, "..")) return loc.target();
  return rel;
}

}  // namespace

std::string_view to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::heading: return "heading";
    case BlockKind::paragraph: return "paragraph";
    case BlockKind::list_item: return "list-item";
    case BlockKind::code: return "code";
    case BlockKind::table: return "table";
    case BlockKind::link_only: return "link-only";
  }
  return "paragraph";
}

BlockKind block_kind_from_string(std::string_view s) {
  if (s == "heading") return BlockKind::heading;
  if (s == "paragraph") return BlockKind::paragraph;
  if (s == "list-item") return BlockKind::list_item;
  if (s == "code") return BlockKind::code;
  if (s == "table") return BlockKind::table;
  if (s == "link-only") return BlockKind::link_only;
  throw ValidationError("unknown block kind: " + std::string(s));
}

SourceLocator SourceLocator::local(std::string path, int depth) {
  auto p = fs::path(path);
  if (p.is_relative()) p = fs::absolute(p);
  return SourceLocator{LocatorKind::local_path, p.lexically_normal().generic_string(), depth};
}

SourceLocator SourceLocator::http(std::string url, int depth) {
  return SourceLocator{LocatorKind::http_url, std::move(url), depth};
}

SourceLocator SourceLocator::from_string(const std::string& value, int depth) {
  if (detail::starts_with(value, "http://") || detail::starts_with(value, "https://"))
    return http(value, depth);
  return SourceLocator{LocatorKind::local_path, value, depth};
}

std::string SourceLocator::target() const {
  auto hash = value.find('#');
  return hash == std::string::npos ? value : value.substr(0, hash);
}

bool SourceLocator::is_markdown() const {
  auto t = target();
  if (auto q = t.find('?'); q != std::string::npos) t.erase(q);
  auto l = detail::lower(t);
  return detail::ends_with(l, ".md") || detail::ends_with(l, ".markdown");
}

const Document* Corpus::find(const std::string& name) const {
  for (const auto& d : documents)
    if (d.name == name) return &d;
  return nullptr;
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::optional<SourceLocator> resolve_link(const SourceLocator& referrer, const std::string& raw) {
  std::string target(detail::trim(raw));
  if (target.empty()) return std::nullopt;
  int depth = referrer.depth + 1;

  if (target[0] == '#') return SourceLocator{referrer.kind, referrer.target() + target, depth};

  if (detail::starts_with(target, "//")) {
    auto scheme = referrer.kind == LocatorKind::http_url ? net::parse_url(referrer.value).scheme : "https";
    target = scheme + ":" + target;
  }
  if (has_scheme(target)) {
    auto l = detail::lower(target.substr(0, 8));
    if (detail::starts_with(l, "http://") || detail::starts_with(l, "https://"))
      return SourceLocator::http(target, depth);
    return std::nullopt;
  }

  std::string fragment = split_fragment(target);
  if (referrer.kind == LocatorKind::http_url) {
    net::Url base = net::parse_url(referrer.target());
    std::string path;
    if (target[0] == '/') {
      path = target;
    } else {
      auto dir = base.path.substr(0, base.path.find_first_of("?"));
      dir = dir.substr(0, dir.rfind('/') + 1);
      path = dir + target;
    }
    return SourceLocator::http(base.origin() + normalize_url_path(path) + fragment, depth);
  }

  if (auto q = target.find('?'); q != std::string::npos) target.erase(q);
  fs::path resolved = fs::path(percent_decode(target));
  if (target.empty()) {
    resolved = fs::path(referrer.target());
  } else if (resolved.is_relative()) {
    resolved = fs::path(referrer.target()).parent_path() / resolved;
  }
  return SourceLocator{LocatorKind::local_path, resolved.lexically_normal().generic_string() + fragment, depth};
}

FetchResult fetch_source(const SourceLocator& locator) {
  if (locator.value.empty()) throw FetchError(locator.value, "empty locator");
  if (locator.kind == LocatorKind::local_path) {
    fs::path path(locator.target());
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw FetchError(locator.value, "no such file");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FetchError(locator.value, "cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw FetchError(locator.value, "read error");
    return finish_fetch(locator, buf.str());
  }
  net::HttpResponse res;
  try {
    res = net::get(locator.target(), {{"Accept", "text/markdown, text/plain, */*"}}, std::chrono::seconds(30));
  } catch (const net::TransportError& e) {
    throw FetchError(locator.value, e.what());
  }
  if (res.status != 200) throw FetchError(locator.value, "HTTP " + std::to_string(res.status));
  auto ct = detail::lower(res.content_type);
  for (std::string_view bad : {"image/", "audio/", "video/", "application/zip", "application/octet-stream",
                               "application/pdf"})
    if (ct.find(bad) != std::string::npos)
      throw UnsupportedContentError("unsupported content type '" + res.content_type + "' at " + locator.value);
  return finish_fetch(locator, std::move(res.body));
}

SourceLocator resolve_entry(const std::string& input) {
  if (detail::starts_with(input, "http://") || detail::starts_with(input, "https://"))
    return SourceLocator::http(input);
  fs::path p(input);
  std::error_code ec;
  if (!fs::is_directory(p, ec)) return SourceLocator::local(input);
  for (const char* sub : {"", "docs", ".github"}) {
    fs::path dir = sub[0] ? p / sub : p;
    if (!fs::is_directory(dir, ec)) continue;
    std::vector<fs::path> candidates;
    for (const auto& e : fs::directory_iterator(dir, ec)) {
      auto name = detail::lower(e.path().filename().string());
      if (detail::starts_with(name, "contributing") && SourceLocator::local(e.path().string()).is_markdown())
        candidates.push_back(e.path());
    }
    std::sort(candidates.begin(), candidates.end());
    if (!candidates.empty()) return SourceLocator::local(candidates.front().string());
  }
  for (const char* readme : {"README.md", "readme.md", "Readme.md"})
    if (fs::is_regular_file(p / readme, ec)) return SourceLocator::local((p / readme).string());
  throw FetchError(input, "no contributing guide or README found in directory");
}

Corpus traverse(const SourceLocator& entry_in, const TraverseOptions& options) {
  if (options.depth_limit < 0) throw ValidationError("depth limit must be non-negative");
  Fetcher fetch = options.fetcher ? options.fetcher : Fetcher(fetch_source);

  SourceLocator entry = entry_in;
  entry.depth = 0;
  Corpus corpus;
  corpus.entry = entry;
  corpus.depth_limit = options.depth_limit;

  std::set<std::string> visited{entry.target()};
  std::vector<SourceLocator> frontier{entry};

  for (int depth = 0; !frontier.empty() && depth <= options.depth_limit; ++depth) {
    // Fetch one level concurrently, then process in discovery order so the
    // corpus layout does not depend on scheduling.
    std::vector<std::future<FetchResult>> pending;
    pending.reserve(frontier.size());
    for (const auto& loc : frontier) pending.push_back(std::async(std::launch::async, fetch, loc));

    std::vector<SourceLocator> next;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      const auto& loc = frontier[i];
      FetchResult fetched;
      try {
        fetched = pending[i].get();
      } catch (const Error& e) {
        if (depth == 0) throw;
        spdlog::warn("skipping linked document {}: {}", loc.value, e.what());
        continue;
      }
      SourceLocator doc_loc = loc;
      doc_loc.value = loc.target();
      Document doc = parse_markdown(fetched.text, doc_loc, display_name_for(doc_loc, entry));
      doc.raw_bytes_hash = fetched.sha256;
      if (depth < options.depth_limit) {
        for (const auto& block : doc.blocks) {
          for (const auto& link : block.outlinks) {
            if (!link.is_markdown()) continue;
            SourceLocator target = link;
            target.value = link.target();
            target.depth = depth + 1;
            if (visited.insert(target.value).second) next.push_back(target);
          }
        }
      }
      corpus.documents.push_back(std::move(doc));
    }
    frontier = std::move(next);
  }
  return corpus;
}

std::vector<SentenceUnit> split_sentences(const Document& document) {
  // Lowercased tokens that end in '.' without ending a sentence.
  static const std::set<std::string, std::less<>> abbreviations{
      "e.g.", "i.e.", "vs.", "cf.", "approx.", "incl.", "fig.", "no.", "dr.", "mr.", "mrs.", "ms.", "st."};

  std::vector<SentenceUnit> units;
  auto push = [&](std::string_view text, int block_index, const Block& block) {
    auto t = detail::trim(text);
    if (t.empty()) return;
    SentenceUnit u;
    u.index = static_cast<int>(units.size());
    u.text = std::string(t);
    u.block_ref = block_index;
    u.document_ref = document.name;
    u.kind = block.kind;
    u.heading_level = block.heading_level;
    u.span = block.span;
    units.push_back(std::move(u));
  };

  for (std::size_t b = 0; b < document.blocks.size(); ++b) {
    const auto& block = document.blocks[b];
    int bi = static_cast<int>(b);
    if (block.kind == BlockKind::link_only) continue;
    if (block.kind != BlockKind::paragraph) {
      push(block.text, bi, block);
      continue;
    }
    const std::string& s = block.text;
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      char c = s[i];
      if (c != '.' && c != '!' && c != '?') continue;
      std::size_t end = i;
      while (end + 1 < s.size() && (s[end + 1] == '.' || s[end + 1] == '!' || s[end + 1] == '?')) ++end;
      if (end + 1 < s.size() && !detail::is_space(s[end + 1])) {
        i = end;
        continue;
      }
      if (c == '.' && end == i) {
        auto word_start = s.find_last_of(" \t\n", i);
        word_start = word_start == std::string::npos ? start : word_start + 1;
        std::string word = detail::lower(std::string_view(s).substr(word_start, i + 1 - word_start));
        while (!word.empty() && (word.front() == '(' || word.front() == '"' || word.front() == '\''))
          word.erase(0, 1);
        if (abbreviations.count(word)) continue;
      }
      push(std::string_view(s).substr(start, end + 1 - start), bi, block);
      start = end + 1;
      i = end;
    }
    push(std::string_view(s).substr(start), bi, block);
  }
  return units;
}

void to_json(nlohmann::json& j, const SourceSpan& s) {
  j = nlohmann::json{{"file", s.file}, {"line_start", s.line_start}, {"line_end", s.line_end}};
}

void from_json(const nlohmann::json& j, SourceSpan& s) {
  s.file = j.at("file").get<std::string>();
  s.line_start = j.at("line_start").get<int>();
  s.line_end = j.at("line_end").get<int>();
}

void to_json(nlohmann::json& j, const Corpus& c) {
  auto docs = nlohmann::json::array();
  for (const auto& d : c.documents) {
    auto blocks = nlohmann::json::array();
    for (const auto& b : d.blocks) {
      auto links = nlohmann::json::array();
      for (const auto& o : b.outlinks) links.push_back(o.value);
      blocks.push_back({{"kind", to_string(b.kind)},
                        {"level", b.heading_level},
                        {"text", b.text},
                        {"outlinks", links},
                        {"span", b.span}});
    }
    docs.push_back({{"locator", d.locator.value},
                    {"name", d.name},
                    {"depth", d.locator.depth},
                    {"hash", d.raw_bytes_hash},
                    {"blocks", blocks}});
  }
  j = nlohmann::json{{"entry", c.entry.value}, {"depth_limit", c.depth_limit}, {"documents", docs}};
}

void from_json(const nlohmann::json& j, Corpus& c) {
  c = Corpus{};
  c.entry = SourceLocator::from_string(j.at("entry").get<std::string>(), 0);
  c.depth_limit = j.at("depth_limit").get<int>();
  for (const auto& jd : j.at("documents")) {
    Document d;
    int depth = jd.value("depth", 0);
    d.locator = SourceLocator::from_string(jd.at("locator").get<std::string>(), depth);
    d.name = jd.value("name", d.locator.value);
    d.raw_bytes_hash = jd.value("hash", "");
    for (const auto& jb : jd.at("blocks")) {
      Block b;
      b.kind = block_kind_from_string(jb.at("kind").get<std::string>());
      b.heading_level = jb.value("level", 0);
      b.text = jb.at("text").get<std::string>();
      for (const auto& o : jb.value("outlinks", nlohmann::json::array()))
        b.outlinks.push_back(SourceLocator::from_string(o.get<std::string>(), depth + 1));
      b.span = jb.at("span").get<SourceSpan>();
      d.blocks.push_back(std::move(b));
    }
    c.documents.push_back(std::move(d));
  }
}

}  // namespace ontree
