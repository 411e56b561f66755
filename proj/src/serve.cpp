#include "ontree/serve.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <functional>
#include <mutex>

#include "httplib.h"
#include "ontree/error.hpp"
#include "ontree/fsutil.hpp"
#include "ontree/ingest.hpp"
#include "text_util.hpp"

namespace ontree {

EditRequest parse_edit_request(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("edit request must be a JSON object");
  EditRequest e;
  if (!j.contains("expected_revision") || !j.at("expected_revision").is_number_integer())
    throw ValidationError("expected_revision (integer) is required");
  e.expected_revision = j.at("expected_revision").get<long long>();
  auto field = [&](const char* name, std::optional<std::string>& out) {
    if (!j.contains(name) || j.at(name).is_null()) return;
    if (!j.at(name).is_string()) throw ValidationError(std::string(name) + " must be a string");
    out = j.at(name).get<std::string>();
  };
  field("title", e.title);
  field("summary", e.summary);
  field("body_markdown", e.body_markdown);
  if (!e.title && !e.summary && !e.body_markdown) throw ValidationError("edit request changes nothing");
  return e;
}

void to_json(nlohmann::json& j, const SearchHit& h) {
  j = nlohmann::json{{"node_id", h.node_id},
                     {"matched_in", h.matched_in},
                     {"snippet", h.snippet},
                     {"ancestor_path", h.ancestor_path}};
}

// ---------------------------------------------------------------------------
// Search

namespace {

std::size_t cp_len(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

bool continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

std::string escape_html(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\n':
      case '\r':
      case '\t': out += ' '; break;
      default: out += c;
    }
  }
  return out;
}

// Grows [from, to) around the match one code point at a time, alternating
// sides, while the rendered snippet stays within the byte limit.
std::string make_snippet(std::string_view text, std::size_t pos, std::size_t len) {
  static constexpr std::string_view open = "<mark>";
  static constexpr std::string_view close = "</mark>";
  auto render = [&](std::size_t from, std::size_t mfrom, std::size_t mto, std::size_t to) {
    return (from > 0 ? std::string("…") : std::string()) + escape_html(text.substr(from, mfrom - from)) +
           std::string(open) + escape_html(text.substr(mfrom, mto - mfrom)) + std::string(close) +
           escape_html(text.substr(mto, to - mto)) + (to < text.size() ? "…" : "");
  };
  std::size_t mfrom = pos;
  std::size_t mto = pos + len;
  // An overlong match is cut to fit, on a code point boundary.
  while (render(mfrom, mfrom, mto, mto).size() > snippet_limit && mto > mfrom) {
    --mto;
    while (mto > mfrom && continuation(static_cast<unsigned char>(text[mto]))) --mto;
  }
  std::size_t from = mfrom;
  std::size_t to = mto;
  bool grew = true;
  bool left = true;
  while (grew) {
    grew = false;
    for (int attempt = 0; attempt < 2; ++attempt, left = !left) {
      if (left && from > 0) {
        std::size_t f = from - 1;
        while (f > 0 && continuation(static_cast<unsigned char>(text[f]))) --f;
        if (render(f, mfrom, mto, to).size() <= snippet_limit) {
          from = f;
          grew = true;
          left = !left;
          break;
        }
      } else if (!left && to < text.size()) {
        std::size_t t = std::min(text.size(), to + cp_len(static_cast<unsigned char>(text[to])));
        if (render(from, mfrom, mto, t).size() <= snippet_limit) {
          to = t;
          grew = true;
          left = !left;
          break;
        }
      }
    }
  }
  return render(from, mfrom, mto, to);
}

void preorder(const TaskTree& tree, const std::string& id, std::vector<std::string>& path,
              const std::function<void(const TaskNode&, const std::vector<std::string>&)>& visit) {
  const auto& node = tree.at(id);
  path.push_back(id);
  visit(node, path);
  for (const auto& c : node.children) preorder(tree, c, path, visit);
  path.pop_back();
}

}  // namespace

std::vector<SearchHit> search_nodes(const TaskTree& tree, std::string_view query) {
  auto q = detail::lower(detail::trim(query));
  if (q.empty()) throw ValidationError("search query is empty");
  std::vector<SearchHit> titles;
  std::vector<SearchHit> contents;
  std::vector<std::string> path;
  preorder(tree, tree.root, path, [&](const TaskNode& node, const std::vector<std::string>& p) {
    if (auto at = detail::lower(node.title).find(q); at != std::string::npos) {
      titles.push_back({node.id, "title", make_snippet(node.title, at, q.size()), p});
    } else if (auto at_body = detail::lower(node.body_markdown).find(q); at_body != std::string::npos) {
      contents.push_back({node.id, "content", make_snippet(node.body_markdown, at_body, q.size()), p});
    }
  });
  titles.insert(titles.end(), contents.begin(), contents.end());
  return titles;
}

// ---------------------------------------------------------------------------
// TreeStore

std::filesystem::path resolve_asset(const std::filesystem::path& assets_root, const std::string& media_path) {
  std::string rel = media_path;
  if (detail::starts_with(rel, "assets/")) rel = rel.substr(7);
  auto p = std::filesystem::path(rel).lexically_normal();
  if (p.empty() || p.is_absolute() || *p.begin() == "..")
    throw ValidationError("media path escapes the assets directory: " + media_path);
  return assets_root / p;
}

namespace {

int sentence_count(const std::string& text) {
  Document d;
  d.name = "summary";
  Block b;
  b.text = text;
  d.blocks.push_back(b);
  return static_cast<int>(split_sentences(d).size());
}

void check_edit(const EditRequest& e) {
  if (e.title) {
    auto words = detail::split_words(*e.title);
    if (words.empty()) throw ValidationError("title must not be empty");
    if (words.size() > 10) throw ValidationError("title must have at most 10 words");
  }
  if (e.summary && sentence_count(*e.summary) > 2) throw ValidationError("summary must have at most 2 sentences");
}

}  // namespace

TreeStore::TreeStore(std::filesystem::path tree_path, std::filesystem::path assets_root)
    : tree_path_(std::move(tree_path)), assets_root_(std::move(assets_root)) {
  auto text = fsutil::read_file(tree_path_);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(fmt::format("{} is not valid JSON: {}", tree_path_.string(), e.what()));
  }
  tree_ = j.get<TaskTree>();
  auto problems = tree_violations(tree_);
  if (!problems.empty()) throw ValidationError(fmt::format("{}: {}", tree_path_.string(), problems.front()));
  for (const auto& [id, node] : tree_.nodes)
    for (const auto& m : node.media)
      if (!std::filesystem::is_regular_file(resolve_asset(assets_root_, m.path)))
        throw NotFoundError(fmt::format("missing asset {} referenced by {}", m.path, id));
}

long long TreeStore::revision() const {
  std::shared_lock lock(mutex_);
  return revision_;
}

TaskTree TreeStore::snapshot() const {
  std::shared_lock lock(mutex_);
  return tree_;
}

std::pair<long long, std::string> TreeStore::tree_response() const {
  std::shared_lock lock(mutex_);
  return {revision_, nlohmann::json{{"revision", revision_}, {"tree", tree_}}.dump()};
}

nlohmann::json TreeStore::node_response(const std::string& id) const {
  std::shared_lock lock(mutex_);
  tree_.at(id);
  nlohmann::json all = tree_;
  return {{"revision", revision_}, {"id", id}, {"node", all["nodes"][id]}};
}

std::vector<SearchHit> TreeStore::search(std::string_view query) const {
  std::shared_lock lock(mutex_);
  return search_nodes(tree_, query);
}

void TreeStore::commit(TaskTree next) {
  auto problems = tree_violations(next);
  if (!problems.empty()) throw ValidationError("edit would break the tree: " + problems.front());
  fsutil::write_atomic(tree_path_, canonical_json(next));
  tree_ = std::move(next);
  ++revision_;
}

nlohmann::json TreeStore::update_node(const std::string& id, const EditRequest& edit) {
  std::unique_lock lock(mutex_);
  if (edit.expected_revision != revision_) throw ConflictError(revision_);
  tree_.at(id);
  check_edit(edit);
  TaskTree next = tree_;
  auto& node = next.at(id);
  if (edit.title) node.title = std::string(detail::trim(*edit.title));
  if (edit.summary) node.summary = *edit.summary;
  if (edit.body_markdown) node.body_markdown = *edit.body_markdown;
  commit(std::move(next));
  nlohmann::json all = tree_;
  return {{"revision", revision_}, {"id", id}, {"node", all["nodes"][id]}};
}

MediaAsset TreeStore::upload_asset(const std::string& node_id, std::string_view bytes, const std::string& filename,
                                   const std::string& caption, std::optional<long long> expected_revision) {
  if (bytes.size() > upload_limit)
    throw PayloadTooLargeError(fmt::format("upload of {} bytes exceeds the {} byte limit", bytes.size(), upload_limit));
  static constexpr std::string_view png_magic("\x89PNG\r\n\x1a\n", 8);
  static constexpr std::string_view jpeg_magic("\xFF\xD8\xFF", 3);
  std::string ext;
  if (detail::starts_with(bytes, png_magic)) ext = ".png";
  else if (detail::starts_with(bytes, jpeg_magic)) ext = ".jpg";
  else throw ValidationError("upload is not a PNG or JPEG image");

  auto declared = detail::lower(std::filesystem::path(filename).extension().string());
  if (declared == ".jpeg") declared = ".jpg";
  if (!declared.empty() && declared != ext)
    throw ValidationError(fmt::format("file named {} does not contain {} data", filename, declared));

  MediaAsset asset;
  asset.type = MediaType::image;
  asset.source = MediaSource::upload;
  asset.path = "assets/images/" + sha256_hex(bytes) + ext;
  asset.id = asset.path;
  asset.caption = caption.empty() ? std::filesystem::path(filename).stem().string() : caption;

  std::unique_lock lock(mutex_);
  if (expected_revision && *expected_revision != revision_) throw ConflictError(revision_);
  const auto& node = tree_.at(node_id);
  auto file = resolve_asset(assets_root_, asset.path);
  if (!std::filesystem::exists(file)) fsutil::write_atomic(file, bytes);
  bool present = std::any_of(node.media.begin(), node.media.end(), [&](const MediaRef& m) { return m.path == asset.path; });
  if (!present) commit(attach_media(tree_, node_id, asset));
  return asset;
}

// ---------------------------------------------------------------------------
// HTTP

struct Server::Impl {
  TreeStore& store;
  ServerOptions options;
  httplib::Server http;
  int port = 0;

  Impl(TreeStore& s, ServerOptions o) : store(s), options(std::move(o)) {}

  static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <typename F>
  static void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const ConflictError& e) {
      send_json(res, 409, {{"error", "conflict"}, {"current_revision", e.current_revision()}});
    } catch (const NotFoundError& e) {
      send_json(res, 404, {{"error", "not_found"}, {"message", e.what()}});
    } catch (const PayloadTooLargeError& e) {
      send_json(res, 413, {{"error", "payload_too_large"}, {"message", e.what()}});
    } catch (const ValidationError& e) {
      send_json(res, 400, {{"error", "validation"}, {"message", e.what()}});
    } catch (const nlohmann::json::exception& e) {
      send_json(res, 400, {{"error", "validation"}, {"message", e.what()}});
    } catch (const std::exception& e) {
      spdlog::error("request failed: {}", e.what());
      send_json(res, 500, {{"error", "internal"}, {"message", e.what()}});
    }
  }

  void routes() {
    http.set_payload_max_length(upload_limit + 64 * 1024);

    http.Get("/api/tree", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto [revision, body] = store.tree_response();
        auto etag = fmt::format("\"{}\"", revision);
        res.set_header("ETag", etag);
        if (req.get_header_value("If-None-Match") == etag) {
          res.status = 304;
          return;
        }
        res.status = 200;
        res.set_content(body, "application/json");
      });
    });

    http.Get(R"(/api/node/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto body = store.node_response(req.matches[1]);
        res.set_header("ETag", fmt::format("\"{}\"", body.at("revision").get<long long>()));
        send_json(res, 200, body);
      });
    });

    http.Put(R"(/api/node/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto edit = parse_edit_request(nlohmann::json::parse(req.body));
        send_json(res, 200, store.update_node(req.matches[1], edit));
      });
    });

    http.Get("/api/search", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto q = req.get_param_value("q");
        auto hits = store.search(q);
        send_json(res, 200, {{"query", q}, {"revision", store.revision()}, {"hits", hits}});
      });
    });

    http.Post(R"(/api/node/([^/]+)/assets)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        if (!req.has_file("file")) throw ValidationError("multipart field 'file' is required");
        auto file = req.get_file_value("file");
        std::optional<long long> expected;
        if (req.has_file("expected_revision")) expected = std::stoll(req.get_file_value("expected_revision").content);
        std::string caption = req.has_file("caption") ? req.get_file_value("caption").content : "";
        auto asset = store.upload_asset(req.matches[1], file.content, file.filename, caption, expected);
        send_json(res, 201, {{"revision", store.revision()}, {"asset", asset}});
      });
    });

    if (!http.set_mount_point("/assets", store.assets_root().string()))
      spdlog::warn("assets directory {} not found; /assets disabled", store.assets_root().string());
    bool viewer = !options.viewer_dir.empty() && http.set_mount_point("/", options.viewer_dir.string());
    if (!viewer) {
      http.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("Viewer bundle not installed. The JSON API is under /api/.\n", "text/plain");
      });
    }
  }
};

Server::Server(TreeStore& store, ServerOptions options) : impl_(std::make_unique<Impl>(store, std::move(options))) {
  impl_->routes();
}

Server::~Server() { stop(); }

int Server::bind() {
  if (impl_->options.port == 0) {
    impl_->port = impl_->http.bind_to_any_port(impl_->options.host);
  } else if (impl_->http.bind_to_port(impl_->options.host, impl_->options.port)) {
    impl_->port = impl_->options.port;
  } else {
    impl_->port = -1;
  }
  if (impl_->port <= 0)
    throw Error(fmt::format("cannot bind {}:{}", impl_->options.host, impl_->options.port));
  return impl_->port;
}

void Server::run() { impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_) impl_->http.stop();
}

}  // namespace ontree
