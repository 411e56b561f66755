#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <mutex>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "ontree/ingest.hpp"
#include "ontree/graphgen.hpp"
#include "ontree/providers.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("ontree-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

  std::filesystem::path write(const std::string& rel, const std::string& content) const {
    auto p = path_ / rel;
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

/// httplib server on a free local port, running on its own thread.
class LocalServer {
 public:
  httplib::Server http;

  void start() {
    port_ = http.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { http.listen_after_bind(); });
    http.wait_until_ready();
  }
  ~LocalServer() {
    http.stop();
    if (thread_.joinable()) thread_.join();
  }
  int port() const { return port_; }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

 private:
  int port_ = 0;
  std::thread thread_;
};

inline std::string fixtures() { return ONTREE_FIXTURES; }

/// Sentence units built straight from strings; "# x" lines become headings.
inline std::vector<ontree::SentenceUnit> units_of(const std::vector<std::string>& lines, const std::string& doc = "doc.md") {
  std::vector<ontree::SentenceUnit> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    ontree::SentenceUnit u;
    u.index = static_cast<int>(i);
    u.document_ref = doc;
    u.block_ref = static_cast<int>(i);
    u.span = {doc, static_cast<int>(i) + 1, static_cast<int>(i) + 1};
    if (lines[i].rfind("# ", 0) == 0) {
      u.kind = ontree::BlockKind::heading;
      u.heading_level = 2;
      u.text = lines[i].substr(2);
    } else {
      u.text = lines[i];
    }
    out.push_back(u);
  }
  return out;
}

/// Completion provider answering from a callback; records every request.
class ScriptedCompletion : public ontree::CompletionProvider {
 public:
  explicit ScriptedCompletion(std::function<std::string(const ontree::CompletionRequest&)> fn) : fn_(std::move(fn)) {}
  std::string complete(const ontree::CompletionRequest& request) override {
    std::lock_guard lock(m_);
    requests.push_back(request);
    return fn_(request);
  }
  std::vector<ontree::CompletionRequest> requests;

 private:
  std::function<std::string(const ontree::CompletionRequest&)> fn_;
  std::mutex m_;
};

/// One-sentence segments seg-000-0000.. with a title each.
inline std::vector<ontree::Segment> flat_segments(int n) {
  std::vector<std::string> lines;
  for (int i = 0; i < n; ++i) lines.push_back("sentence " + std::to_string(i));
  auto units = units_of(lines);
  std::vector<ontree::Segment> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(ontree::make_segment(0, units, i, i + 1));
    out.back().title = "Step " + std::to_string(i);
  }
  return out;
}

/// Random and adversarial outline: unknown ids and parents, self loops,
/// cycles, duplicate claims, repeated order indices, missing segments.
inline ontree::StructureProposal random_proposal(const std::vector<ontree::Segment>& segs, std::mt19937& rng) {
  using ontree::NodeKind;
  ontree::StructureProposal p;
  int entries = static_cast<int>(rng() % (segs.size() * 2 + 2));
  auto pick_id = [&]() -> std::string {
    auto r = rng() % 10;
    if (r == 0) return "seg-999-" + std::to_string(rng() % 5);
    return segs[rng() % segs.size()].id;
  };
  for (int i = 0; i < entries; ++i) {
    ontree::OutlineEntry e;
    e.segment_id = pick_id();
    auto r = rng() % 6;
    e.parent_hint = r == 0 ? std::string("root") : r == 1 ? e.segment_id : r == 2 ? "nowhere" : pick_id();
    e.kind_hint = static_cast<NodeKind>(rng() % 4);
    e.order_index = static_cast<int>(rng() % (entries + 3)) - 1;
    e.main_path = rng() % 3 == 0;
    p.outline.push_back(e);
  }
  return p;
}

}  // namespace testutil
