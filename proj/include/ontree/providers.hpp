#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ontree/ingest.hpp"

namespace ontree {

struct EmbeddingVector {
  std::vector<double> values;

  double norm() const;
  std::size_t dimension() const { return values.size(); }
};

/// Cosine similarity; 0 if either vector is zero.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct Passage {
  std::string text;
  SourceSpan source_span;
  double score = 0.0;  // in [0, 1]
};

enum class CompletionTask { title, refine_boundary, structure, script };

std::string_view to_string(CompletionTask task);

struct CompletionRequest {
  CompletionTask task = CompletionTask::title;
  std::string prompt;
  std::vector<Passage> context_passages;
  std::vector<std::pair<std::string, std::string>> few_shot_examples;
};

enum class ProviderKind { offline, http };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::offline;
  std::string endpoint;
  std::string model_id;
  std::string api_key_env;  // name of the variable, never the key itself
  int timeout_s = 60;
  int max_retries = 3;
  int max_in_flight = 4;
  std::size_t dimension = 256;  // embedding role only
  std::string voice_id;         // narration role only
};

void to_json(nlohmann::json& j, const ProviderConfig& c);
void from_json(const nlohmann::json& j, ProviderConfig& c);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  /// One vector per input, same order. Throws ValidationError on empty input.
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
};

class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
};

struct NarrationRequest {
  std::string voice_id;
  std::vector<std::string> parts;  // one entry per script step
};

struct NarrationResult {
  std::string audio;  // MP3 bytes
  double duration_s = 0.0;
};

class NarrationProvider {
 public:
  virtual ~NarrationProvider() = default;
  virtual NarrationResult synthesize(const NarrationRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Offline implementations. Pure functions of their input.

/// Hashed term frequency: lowercase ASCII alphanumeric tokens, FNV-1a 64
/// hashed into `dimension` buckets, L2-normalised.
class HashedTfEmbedding final : public EmbeddingProvider {
 public:
  explicit HashedTfEmbedding(std::size_t dimension = 256) : dimension_(dimension) {}
  std::size_t dimension() const override { return dimension_; }
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

  EmbeddingVector embed_one(std::string_view text) const;
  static std::uint64_t fnv1a(std::string_view token);
  static std::vector<std::string> tokenize(std::string_view text);

 private:
  std::size_t dimension_;
};

struct OfflineRules {
  std::vector<std::string> path_keywords{"pull request", "fork", "clone", "test", "commit"};
};

/// Fixed rule table per task:
///   title           first heading in the segment, else its first 6 words
///   refine-boundary "KEEP"
///   structure       document-order outline (see graphgen for the line format)
///   script          numbered restatement of the segment sentences
class RuleCompletion final : public CompletionProvider {
 public:
  explicit RuleCompletion(OfflineRules rules = {}) : rules_(std::move(rules)) {}
  std::string complete(const CompletionRequest& request) override;

 private:
  OfflineRules rules_;
};

/// Silent MP3 (MPEG-1 layer III, 48 kHz mono, 32 kbit/s), one second per part.
class SilentNarration final : public NarrationProvider {
 public:
  NarrationResult synthesize(const NarrationRequest& request) override;
  static std::string silent_mp3(double seconds);
};

// ---------------------------------------------------------------------------
// Remote implementations (JSON over HTTP).

/// Shared transport: bearer auth from the configured environment variable,
/// bounded in-flight requests, exponential backoff on transport errors and 5xx.
class RemoteEndpoint {
 public:
  explicit RemoteEndpoint(ProviderConfig config);
  /// Returns the response body of a 2xx reply; throws ProviderError otherwise.
  std::string post_json(const nlohmann::json& body, std::string* request_id = nullptr);
  const ProviderConfig& config() const { return config_; }

  /// Base delay of the exponential backoff; tests shorten it.
  std::chrono::milliseconds backoff_base{200};

 private:
  ProviderConfig config_;
  std::mutex mutex_;
  std::condition_variable cv_;
  int in_flight_ = 0;
};

class HttpEmbedding final : public EmbeddingProvider {
 public:
  explicit HttpEmbedding(ProviderConfig config) : endpoint_(std::move(config)) {}
  std::size_t dimension() const override { return endpoint_.config().dimension; }
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  RemoteEndpoint& endpoint() { return endpoint_; }

 private:
  RemoteEndpoint endpoint_;
};

class HttpCompletion final : public CompletionProvider {
 public:
  explicit HttpCompletion(ProviderConfig config) : endpoint_(std::move(config)) {}
  std::string complete(const CompletionRequest& request) override;
  RemoteEndpoint& endpoint() { return endpoint_; }

  /// Chat body: {model, messages:[{role, content}]}.
  static nlohmann::json request_body(const std::string& model, const CompletionRequest& request);

 private:
  RemoteEndpoint endpoint_;
};

class HttpNarration final : public NarrationProvider {
 public:
  explicit HttpNarration(ProviderConfig config) : endpoint_(std::move(config)) {}
  NarrationResult synthesize(const NarrationRequest& request) override;
  RemoteEndpoint& endpoint() { return endpoint_; }

 private:
  RemoteEndpoint endpoint_;
};

struct ProviderSuite {
  std::shared_ptr<EmbeddingProvider> embedding;
  std::shared_ptr<CompletionProvider> completion;
  std::shared_ptr<NarrationProvider> narration;
};

/// Builds the suite for the given per-role configs. `offline` forces every
/// role to its offline implementation.
ProviderSuite make_providers(const ProviderConfig& embedding, const ProviderConfig& completion,
                             const ProviderConfig& narration, bool offline, const OfflineRules& rules = {});

// ---------------------------------------------------------------------------
// Retrieval over corpus blocks.

class RetrievalStore {
 public:
  RetrievalStore() = default;
  RetrievalStore(const Corpus& corpus, EmbeddingProvider& embedder);

  /// Top-j passages by cosine similarity, descending; ties keep corpus order.
  std::vector<Passage> retrieve(const std::string& query, int j) const;
  std::size_t size() const { return passages_.size(); }

 private:
  EmbeddingProvider* embedder_ = nullptr;
  std::vector<Passage> passages_;
  std::vector<EmbeddingVector> vectors_;
};

// ---------------------------------------------------------------------------
// Prompt text conventions shared by callers and the rule-based provider.

namespace prompt {

/// Wraps `body` as a named section: "<<<NAME\n...\nNAME>>>".
std::string section(std::string_view name, std::string_view body);
/// Extracts a named section, or nullopt if absent.
std::optional<std::string> extract(std::string_view prompt, std::string_view name);
/// Substitutes "{{key}}" placeholders.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values);

}  // namespace prompt

/// Prompt templates and few-shot exemplars. Defaults are compiled in from
/// data/; a directory with the same layout overrides them file by file.
class PromptLibrary {
 public:
  PromptLibrary();
  explicit PromptLibrary(const std::string& override_dir);

  const std::string& template_for(CompletionTask task) const;
  const std::vector<std::pair<std::string, std::string>>& structure_examples() const { return structure_examples_; }
  const std::vector<std::pair<std::string, std::string>>& script_examples() const { return script_examples_; }

 private:
  std::map<CompletionTask, std::string> templates_;
  std::vector<std::pair<std::string, std::string>> structure_examples_;
  std::vector<std::pair<std::string, std::string>> script_examples_;
};

}  // namespace ontree
