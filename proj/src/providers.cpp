#include "ontree/providers.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "embedded_data.hpp"
#include "ontree/error.hpp"
#include "ontree/net.hpp"
#include "text_util.hpp"

namespace ontree {

namespace {

std::atomic<std::uint64_t> g_local_request_ids{0};

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += (out.empty() ? "" : "\n") + l;
  return out;
}

std::vector<std::string> lines_of(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto nl = s.find('\n', start);
    auto end = nl == std::string_view::npos ? s.size() : nl;
    out.emplace_back(s.substr(start, end - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return out;
}

// "## Title" -> "Title"
std::optional<std::string> markdown_heading(std::string_view line) {
  std::size_t n = 0;
  while (n < line.size() && line[n] == '#') ++n;
  if (n == 0 || n > 6 || n >= line.size() || line[n] != ' ') return std::nullopt;
  auto text = detail::trim(line.substr(n));
  if (text.empty()) return std::nullopt;
  return std::string(text);
}

bool contains_keyword(const std::string& title, const std::vector<std::string>& keywords) {
  auto l = detail::lower(title);
  return std::any_of(keywords.begin(), keywords.end(),
                     [&](const std::string& k) { return !k.empty() && l.find(detail::lower(k)) != std::string::npos; });
}

}  // namespace

double EmbeddingVector::norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size()) throw ValidationError("embedding dimensions differ");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string_view to_string(CompletionTask task) {
  switch (task) {
    case CompletionTask::title: return "title";
    case CompletionTask::refine_boundary: return "refine-boundary";
    case CompletionTask::structure: return "structure";
    case CompletionTask::script: return "script";
  }
  return "title";
}

void to_json(nlohmann::json& j, const ProviderConfig& c) {
  j = nlohmann::json{{"kind", c.kind == ProviderKind::http ? "http" : "offline"},
                     {"endpoint", c.endpoint},
                     {"model_id", c.model_id},
                     {"api_key_env", c.api_key_env},
                     {"timeout", c.timeout_s},
                     {"max_retries", c.max_retries},
                     {"max_in_flight", c.max_in_flight},
                     {"dimension", c.dimension},
                     {"voice_id", c.voice_id}};
}

void from_json(const nlohmann::json& j, ProviderConfig& c) {
  auto kind = j.value("kind", std::string("offline"));
  if (kind != "offline" && kind != "http") throw ValidationError("unknown provider kind: " + kind);
  c.kind = kind == "http" ? ProviderKind::http : ProviderKind::offline;
  c.endpoint = j.value("endpoint", c.endpoint);
  c.model_id = j.value("model_id", c.model_id);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.timeout_s = j.value("timeout", c.timeout_s);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  c.dimension = j.value("dimension", c.dimension);
  c.voice_id = j.value("voice_id", c.voice_id);
  if (c.max_retries < 0 || c.max_in_flight < 1 || c.timeout_s < 1 || c.dimension < 1)
    throw ValidationError("provider config out of range");
}

// ---------------------------------------------------------------------------

std::uint64_t HashedTfEmbedding::fnv1a(std::string_view token) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : token) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> HashedTfEmbedding::tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

EmbeddingVector HashedTfEmbedding::embed_one(std::string_view text) const {
  EmbeddingVector v;
  v.values.assign(dimension_, 0.0);
  for (const auto& t : tokenize(text)) v.values[fnv1a(t) % dimension_] += 1.0;
  double n = v.norm();
  if (n > 0.0)
    for (auto& x : v.values) x /= n;
  return v;
}

std::vector<EmbeddingVector> HashedTfEmbedding::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw ValidationError("embed requires at least one text");
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

std::string RuleCompletion::complete(const CompletionRequest& request) {
  if (detail::trim(request.prompt).empty()) throw ValidationError("completion prompt is empty");
  switch (request.task) {
    case CompletionTask::title: {
      auto body = prompt::extract(request.prompt, "SEGMENT").value_or(request.prompt);
      std::vector<std::string> words;
      for (const auto& line : lines_of(body)) {
        if (auto h = markdown_heading(line)) return *h;
      }
      for (const auto& line : lines_of(body))
        for (auto& w : detail::split_words(line)) words.push_back(std::move(w));
      if (words.size() > 6) words.resize(6);
      std::string out;
      for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
      return out;
    }
    case CompletionTask::refine_boundary:
      return "KEEP";
    case CompletionTask::structure: {
      auto body = prompt::extract(request.prompt, "SEGMENTS").value_or("");
      std::vector<std::string> out;
      std::string current_category = "root";
      int order = 0;
      for (const auto& line : lines_of(body)) {
        if (detail::trim(line).empty()) continue;
        auto first_tab = line.find('\t');
        auto second_tab = line.find('\t', first_tab + 1);
        if (first_tab == std::string::npos || second_tab == std::string::npos) continue;
        std::string id = line.substr(0, first_tab);
        int level = std::atoi(line.substr(first_tab + 1, second_tab - first_tab - 1).c_str());
        std::string title = line.substr(second_tab + 1);
        bool category = level == 1 || level == 2;
        std::string parent = category ? "root" : current_category;
        if (category) current_category = id;
        bool main = contains_keyword(title, rules_.path_keywords);
        out.push_back(std::to_string(++order) + " | " + id + " | " + (category ? "category" : "task") + " | " +
                      parent + " | " + (main ? "main" : "-"));
      }
      return join_lines(out);
    }
    case CompletionTask::script: {
      auto body = prompt::extract(request.prompt, "SEGMENT").value_or(request.prompt);
      std::vector<std::string> out;
      int n = 0;
      for (const auto& line : lines_of(body)) {
        auto t = detail::trim(line);
        if (t.empty() || markdown_heading(t)) continue;
        out.push_back(std::to_string(++n) + ". " + std::string(t));
      }
      return join_lines(out);
    }
  }
  return {};
}

std::string SilentNarration::silent_mp3(double seconds) {
  // 1152 samples per frame at 48 kHz; 96-byte frames carry no audio data.
  static constexpr std::size_t frame_bytes = 96;
  auto frames = static_cast<std::size_t>(std::ceil(seconds * 48000.0 / 1152.0 - 1e-9));
  std::string frame(frame_bytes, '\0');
  frame[0] = static_cast<char>(0xFF);
  frame[1] = static_cast<char>(0xFB);
  frame[2] = static_cast<char>(0x14);
  frame[3] = static_cast<char>(0xC0);
  std::string out;
  out.reserve(frames * frame_bytes);
  for (std::size_t i = 0; i < frames; ++i) out += frame;
  return out;
}

NarrationResult SilentNarration::synthesize(const NarrationRequest& request) {
  if (request.parts.empty()) throw ValidationError("narration needs at least one script step");
  NarrationResult r;
  r.duration_s = static_cast<double>(request.parts.size());
  r.audio = silent_mp3(r.duration_s);
  return r;
}

// ---------------------------------------------------------------------------

RemoteEndpoint::RemoteEndpoint(ProviderConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw ValidationError("http provider requires an endpoint");
}

std::string RemoteEndpoint::post_json(const nlohmann::json& body, std::string* request_id) {
  {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    RemoteEndpoint* self;
    ~Release() {
      {
        std::lock_guard lock(self->mutex_);
        --self->in_flight_;
      }
      self->cv_.notify_one();
    }
  } release{this};

  net::Headers headers{{"Accept", "application/json, audio/mpeg"}};
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
      headers["Authorization"] = std::string("Bearer ") + key;
  }
  std::string local_id = "local-" + std::to_string(++g_local_request_ids);
  const int retries = std::clamp(config_.max_retries, 0, 3);
  const std::string payload = body.dump();
  std::string last_error;

  for (int attempt = 0; attempt <= retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(backoff_base * (1 << (attempt - 1)));
    net::HttpResponse res;
    try {
      res = net::post(config_.endpoint, payload, "application/json", headers, std::chrono::seconds(config_.timeout_s));
    } catch (const net::TransportError& e) {
      last_error = e.what();
      spdlog::warn("provider transport error (attempt {}): {}", attempt + 1, last_error);
      continue;
    }
    std::string rid = res.headers.count("x-request-id") ? res.headers["x-request-id"] : local_id;
    if (request_id) *request_id = rid;
    if (res.status >= 500) {
      last_error = "HTTP " + std::to_string(res.status);
      spdlog::warn("provider returned {} (attempt {})", res.status, attempt + 1);
      continue;
    }
    if (res.status < 200 || res.status >= 300)
      throw ProviderError("provider refused request with HTTP " + std::to_string(res.status), rid);
    return res.body;
  }
  throw ProviderError("provider failed after " + std::to_string(retries + 1) + " attempts: " + last_error, local_id);
}

std::vector<EmbeddingVector> HttpEmbedding::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw ValidationError("embed requires at least one text");
  std::string rid;
  auto raw = endpoint_.post_json({{"model", endpoint_.config().model_id}, {"input", texts}}, &rid);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("malformed embedding response: ") + e.what(), rid);
  }
  std::vector<EmbeddingVector> out(texts.size());
  auto assign = [&](std::size_t i, const nlohmann::json& values) {
    if (i >= out.size()) throw ProviderError("embedding index out of range", rid);
    out[i].values = values.get<std::vector<double>>();
    if (out[i].values.size() != dimension())
      throw ProviderError("embedding dimension " + std::to_string(out[i].values.size()) + " != configured " +
                              std::to_string(dimension()),
                          rid);
  };
  try {
    if (j.contains("data")) {
      std::size_t pos = 0;
      for (const auto& item : j.at("data")) {
        assign(item.value("index", pos), item.at("embedding"));
        ++pos;
      }
      if (pos != texts.size()) throw ProviderError("embedding count mismatch", rid);
    } else if (j.contains("embeddings")) {
      const auto& arr = j.at("embeddings");
      if (arr.size() != texts.size()) throw ProviderError("embedding count mismatch", rid);
      for (std::size_t i = 0; i < arr.size(); ++i) assign(i, arr[i]);
    } else {
      throw ProviderError("embedding response has neither 'data' nor 'embeddings'", rid);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("malformed embedding response: ") + e.what(), rid);
  }
  return out;
}

nlohmann::json HttpCompletion::request_body(const std::string& model, const CompletionRequest& request) {
  auto messages = nlohmann::json::array();
  for (const auto& [input, output] : request.few_shot_examples) {
    messages.push_back({{"role", "user"}, {"content", input}});
    messages.push_back({{"role", "assistant"}, {"content", output}});
  }
  std::string content = request.prompt;
  if (!request.context_passages.empty()) {
    content += "\n\nReference passages from the project documentation:\n";
    for (const auto& p : request.context_passages)
      content += "- (" + p.source_span.file + ":" + std::to_string(p.source_span.line_start) + ") " + p.text + "\n";
  }
  messages.push_back({{"role", "user"}, {"content", content}});
  return {{"model", model}, {"messages", messages}};
}

std::string HttpCompletion::complete(const CompletionRequest& request) {
  if (detail::trim(request.prompt).empty()) throw ValidationError("completion prompt is empty");
  std::string rid;
  auto raw = endpoint_.post_json(request_body(endpoint_.config().model_id, request), &rid);
  std::string text;
  try {
    auto j = nlohmann::json::parse(raw);
    if (j.contains("choices") && !j["choices"].empty()) {
      const auto& c = j["choices"][0];
      if (c.contains("message")) text = c["message"].value("content", "");
      else text = c.value("text", "");
    } else if (j.contains("content") && j["content"].is_string()) {
      text = j["content"].get<std::string>();
    } else if (j.contains("text")) {
      text = j["text"].get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("malformed completion response: ") + e.what(), rid);
  }
  if (detail::trim(text).empty()) throw EmptyCompletionError("empty completion", rid);
  return text;
}

NarrationResult HttpNarration::synthesize(const NarrationRequest& request) {
  if (request.parts.empty()) throw ValidationError("narration needs at least one script step");
  std::string text;
  for (const auto& p : request.parts) text += (text.empty() ? "" : "\n") + p;
  std::string voice = request.voice_id.empty() ? endpoint_.config().voice_id : request.voice_id;
  std::string rid;
  NarrationResult r;
  r.audio = endpoint_.post_json({{"voice_id", voice}, {"text", text}}, &rid);
  if (r.audio.empty()) throw ProviderError("narration provider returned no audio", rid);
  r.duration_s = 0.0;
  return r;
}

ProviderSuite make_providers(const ProviderConfig& embedding, const ProviderConfig& completion,
                             const ProviderConfig& narration, bool offline, const OfflineRules& rules) {
  ProviderSuite suite;
  if (offline || embedding.kind == ProviderKind::offline)
    suite.embedding = std::make_shared<HashedTfEmbedding>(offline ? 256 : embedding.dimension);
  else
    suite.embedding = std::make_shared<HttpEmbedding>(embedding);
  if (offline || completion.kind == ProviderKind::offline)
    suite.completion = std::make_shared<RuleCompletion>(rules);
  else
    suite.completion = std::make_shared<HttpCompletion>(completion);
  if (offline || narration.kind == ProviderKind::offline)
    suite.narration = std::make_shared<SilentNarration>();
  else
    suite.narration = std::make_shared<HttpNarration>(narration);
  return suite;
}

// ---------------------------------------------------------------------------

RetrievalStore::RetrievalStore(const Corpus& corpus, EmbeddingProvider& embedder) : embedder_(&embedder) {
  std::vector<std::string> texts;
  for (const auto& doc : corpus.documents) {
    for (const auto& block : doc.blocks) {
      if (block.kind == BlockKind::link_only || detail::trim(block.text).empty()) continue;
      passages_.push_back(Passage{block.text, block.span, 0.0});
      texts.push_back(block.text);
    }
  }
  if (!texts.empty()) vectors_ = embedder.embed(texts);
}

std::vector<Passage> RetrievalStore::retrieve(const std::string& query, int j) const {
  if (j < 1) throw ValidationError("retrieve needs j >= 1");
  if (passages_.empty() || embedder_ == nullptr) return {};
  auto q = embedder_->embed({query}).front();
  std::vector<std::size_t> order(passages_.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> scores(passages_.size());
  for (std::size_t i = 0; i < passages_.size(); ++i) scores[i] = std::clamp(cosine(q, vectors_[i]), 0.0, 1.0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<Passage> out;
  for (std::size_t i = 0; i < order.size() && static_cast<int>(out.size()) < j; ++i) {
    Passage p = passages_[order[i]];
    p.score = scores[order[i]];
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace prompt {

std::string section(std::string_view name, std::string_view body) {
  std::string out = "<<<";
  out += name;
  out += "\n";
  out += body;
  if (!body.empty() && body.back() != '\n') out += "\n";
  out += name;
  out += ">>>";
  return out;
}

std::optional<std::string> extract(std::string_view text, std::string_view name) {
  std::string open = "<<<" + std::string(name) + "\n";
  std::string close = "\n" + std::string(name) + ">>>";
  auto a = text.find(open);
  if (a == std::string_view::npos) return std::nullopt;
  auto start = a + open.size();
  auto b = text.find(close, start - 1);
  if (b == std::string_view::npos) return std::nullopt;
  if (b < start) return std::string();
  return std::string(text.substr(start, b - start));
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    auto open = tmpl.find("{{", i);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    out.append(tmpl.substr(i, open - i));
    std::string key(detail::trim(tmpl.substr(open + 2, close - open - 2)));
    if (auto it = values.find(key); it != values.end()) out += it->second;
    i = close + 2;
  }
  return out;
}

}  // namespace prompt

namespace {

std::string read_override(const std::string& dir, const std::string& rel) {
  if (dir.empty()) return {};
  std::ifstream in(std::filesystem::path(dir) / rel, std::ios::binary);
  if (!in) return {};
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::pair<std::string, std::string> parse_example(const std::string& text, const std::string& name) {
  try {
    auto j = nlohmann::json::parse(text);
    return {j.at("input").get<std::string>(), j.at("output").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad few-shot exemplar " + name + ": " + e.what());
  }
}

}  // namespace

PromptLibrary::PromptLibrary() : PromptLibrary(std::string()) {}

PromptLibrary::PromptLibrary(const std::string& override_dir) {
  const auto& files = embedded::files();
  auto load = [&](const std::string& rel) {
    auto over = read_override(override_dir, rel);
    if (!over.empty()) return over;
    auto it = files.find(rel);
    return it == files.end() ? std::string() : it->second;
  };
  templates_[CompletionTask::title] = load("prompts/title.txt");
  templates_[CompletionTask::refine_boundary] = load("prompts/refine_boundary.txt");
  templates_[CompletionTask::structure] = load("prompts/structure.txt");
  templates_[CompletionTask::script] = load("prompts/script.txt");
  for (const auto& [task, text] : templates_)
    if (text.empty()) throw ValidationError("missing prompt template for " + std::string(to_string(task)));

  std::set<std::string> names;
  for (const auto& [rel, _] : files)
    if (detail::starts_with(rel, "fewshot/")) names.insert(rel);
  if (!override_dir.empty()) {
    std::error_code ec;
    for (const auto& e : std::filesystem::directory_iterator(std::filesystem::path(override_dir) / "fewshot", ec))
      if (e.path().extension() == ".json") names.insert("fewshot/" + e.path().filename().string());
  }
  for (const auto& rel : names) {
    auto example = parse_example(load(rel), rel);
    if (detail::starts_with(rel, "fewshot/structure")) structure_examples_.push_back(std::move(example));
    else if (detail::starts_with(rel, "fewshot/script")) script_examples_.push_back(std::move(example));
  }
  if (structure_examples_.empty()) throw ValidationError("no structure few-shot exemplars found");
}

const std::string& PromptLibrary::template_for(CompletionTask task) const { return templates_.at(task); }

}  // namespace ontree
