#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "ontree/graphgen.hpp"
#include "ontree/media.hpp"

namespace ontree {

struct EditRequest {
  std::optional<std::string> title;
  std::optional<std::string> summary;
  std::optional<std::string> body_markdown;
  long long expected_revision = 0;
};

/// Throws ValidationError when no editable field or no expected_revision is given.
EditRequest parse_edit_request(const nlohmann::json& j);

struct SearchHit {
  std::string node_id;
  std::string matched_in;  // "title" or "content"
  std::string snippet;     // HTML-escaped, match wrapped in <mark>, at most 160 bytes
  std::vector<std::string> ancestor_path;  // root .. node_id
};

void to_json(nlohmann::json& j, const SearchHit& h);

inline constexpr std::size_t snippet_limit = 160;
inline constexpr std::size_t upload_limit = 10 * 1024 * 1024;

/// Case-insensitive substring search: title hits first, then content hits,
/// each group in tree pre-order. Throws ValidationError on a blank query.
std::vector<SearchHit> search_nodes(const TaskTree& tree, std::string_view query);

/// Maps a tree media path ("assets/...") to a file under the assets root.
std::filesystem::path resolve_asset(const std::filesystem::path& assets_root, const std::string& media_path);

/// The served tree: many readers, one writer at a time, atomic persistence.
/// The revision counts mutations since the store was opened.
class TreeStore {
 public:
  /// Loads and validates tree.json. Throws NotFoundError naming the first media
  /// path that does not resolve under `assets_root`.
  TreeStore(std::filesystem::path tree_path, std::filesystem::path assets_root);

  long long revision() const;
  /// Revision and the serialized {revision, tree} body, taken together.
  std::pair<long long, std::string> tree_response() const;
  /// {revision, id, node}; throws NotFoundError.
  nlohmann::json node_response(const std::string& id) const;
  std::vector<SearchHit> search(std::string_view query) const;
  TaskTree snapshot() const;

  /// Throws ConflictError, NotFoundError or ValidationError; nothing changes then.
  nlohmann::json update_node(const std::string& id, const EditRequest& edit);

  /// Stores a PNG/JPEG under assets/images/<sha256>.<ext> and attaches it.
  /// `filename` only informs the declared type. Throws PayloadTooLargeError or
  /// ValidationError.
  MediaAsset upload_asset(const std::string& node_id, std::string_view bytes, const std::string& filename,
                          const std::string& caption, std::optional<long long> expected_revision = std::nullopt);

  const std::filesystem::path& assets_root() const { return assets_root_; }

 private:
  void commit(TaskTree next);  // caller holds the write lock

  std::filesystem::path tree_path_;
  std::filesystem::path assets_root_;
  mutable std::shared_mutex mutex_;
  TaskTree tree_;
  long long revision_ = 0;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;                      // 0 picks a free port
  std::filesystem::path viewer_dir;     // served at "/" when present
};

/// HTTP front end over a TreeStore.
class Server {
 public:
  Server(TreeStore& store, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the socket; returns the bound port.
  int bind();
  /// Blocks until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ontree
