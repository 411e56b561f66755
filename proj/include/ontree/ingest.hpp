#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ontree {

enum class LocatorKind { local_path, http_url };

struct SourceLocator {
  LocatorKind kind = LocatorKind::local_path;
  std::string value;  // absolute path or absolute URL, possibly with a #fragment
  int depth = 0;      // 0 = entry document

  bool operator==(const SourceLocator&) const = default;

  static SourceLocator local(std::string path, int depth = 0);
  static SourceLocator http(std::string url, int depth = 0);
  /// Picks the kind from the value's scheme.
  static SourceLocator from_string(const std::string& value, int depth = 0);

  /// Value without any "#fragment".
  std::string target() const;
  bool is_markdown() const;
};

struct SourceSpan {
  std::string file;
  int line_start = 0;  // 1-based, inclusive
  int line_end = 0;

  bool operator==(const SourceSpan&) const = default;
};

enum class BlockKind { heading, paragraph, list_item, code, table, link_only };

std::string_view to_string(BlockKind kind);
BlockKind block_kind_from_string(std::string_view s);

struct Block {
  BlockKind kind = BlockKind::paragraph;
  int heading_level = 0;  // > 0 iff kind == heading
  std::string text;
  std::vector<SourceLocator> outlinks;
  SourceSpan span;
};

struct Document {
  SourceLocator locator;
  std::string name;  // display name: path relative to the entry directory, or the URL
  std::vector<Block> blocks;
  std::string raw_bytes_hash;  // sha256 hex of the fetched bytes
};

struct SentenceUnit {
  int index = 0;  // contiguous 0..N-1 within one document
  std::string text;
  int block_ref = 0;  // index of the owning block in Document::blocks
  std::string document_ref;
  BlockKind kind = BlockKind::paragraph;
  int heading_level = 0;
  SourceSpan span;
};

struct Corpus {
  std::vector<Document> documents;  // entry first
  SourceLocator entry;
  int depth_limit = 2;

  const Document* find(const std::string& name) const;
};

struct FetchResult {
  std::string text;
  std::string sha256;
};

/// Reads a local file or GETs a URL. Strips a UTF-8 BOM and rejects content
/// that is not valid UTF-8 text.
FetchResult fetch_source(const SourceLocator& locator);

using Fetcher = std::function<FetchResult(const SourceLocator&)>;

/// Resolves a link target against the document it appears in. Returns nullopt
/// for schemes that are not local paths or http(s) (mailto:, data:, ...).
std::optional<SourceLocator> resolve_link(const SourceLocator& referrer, const std::string& target);

/// Never throws on valid UTF-8; anything it does not recognise becomes a paragraph.
/// `display_name` is used for SourceSpan::file (defaults to the locator value).
Document parse_markdown(std::string_view text, const SourceLocator& locator,
                        std::string display_name = {});

/// Removes emphasis, inline code ticks and link syntax, keeping anchor text.
/// Idempotent.
std::string strip_formatting(std::string_view text);

std::vector<SentenceUnit> split_sentences(const Document& document);

/// Turns CLI input into an entry locator. A local directory resolves to its
/// CONTRIBUTING file (also looked up under docs/ and .github/), else README.
SourceLocator resolve_entry(const std::string& input);

struct TraverseOptions {
  int depth_limit = 2;
  Fetcher fetcher;  // defaults to fetch_source
};

/// Breadth-first crawl over Markdown links. Links discovered at depth_limit
/// are recorded but not followed. Throws FetchError if the entry fails.
Corpus traverse(const SourceLocator& entry, const TraverseOptions& options = {});

std::string sha256_hex(std::string_view bytes);

void to_json(nlohmann::json& j, const SourceSpan& s);
void from_json(const nlohmann::json& j, SourceSpan& s);
void to_json(nlohmann::json& j, const Corpus& c);
void from_json(const nlohmann::json& j, Corpus& c);

}  // namespace ontree
