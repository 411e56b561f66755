#include <cmath>
#include <cstdlib>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "ontree/error.hpp"
#include "ontree/net.hpp"
#include "ontree/providers.hpp"

using namespace ontree;

namespace {

// Independent FNV-1a 64 reference, checked against the published test vectors below.
std::uint64_t fnv_oracle(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ProviderConfig http_config(const std::string& url) {
  ProviderConfig c;
  c.kind = ProviderKind::http;
  c.endpoint = url;
  c.model_id = "m";
  c.max_retries = 3;
  c.timeout_s = 5;
  return c;
}

}  // namespace

TEST_SUITE("providers") {

TEST_CASE("FNV-1a matches published vectors and the oracle") {
  CHECK(fnv_oracle("") == 0xcbf29ce484222325ULL);
  CHECK(fnv_oracle("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv_oracle("foobar") == 0x85944171f73967e8ULL);
  for (std::string s : {"", "a", "foobar", "fork", "pull", "request", "x1y2"})
    CHECK(HashedTfEmbedding::fnv1a(s) == fnv_oracle(s));
}

TEST_CASE("tokenizer lowercases ASCII alphanumerics") {
  CHECK(HashedTfEmbedding::tokenize("Run `make test`, then PUSH!") ==
        std::vector<std::string>{"run", "make", "test", "then", "push"});
  CHECK(HashedTfEmbedding::tokenize("  --  ").empty());
}

TEST_CASE("offline embedding examples") {
  HashedTfEmbedding e;
  CHECK(e.dimension() == 256);
  auto fork2 = e.embed_one("fork fork");
  auto fork1 = e.embed_one("fork");
  CHECK(fork2.values == fork1.values);
  CHECK(std::abs(fork1.norm() - 1.0) < 1e-9);
  CHECK(cosine(e.embed_one("run tests"), e.embed_one("run tests")) == doctest::Approx(1.0).epsilon(1e-12));

  auto ba = fnv_oracle("alpha") % 256;
  auto bo = fnv_oracle("omega") % 256;
  REQUIRE(ba != bo);
  CHECK(cosine(e.embed_one("alpha"), e.embed_one("omega")) == 0.0);
  CHECK(e.embed_one("alpha").values[ba] == doctest::Approx(1.0));

  CHECK(e.embed_one("!!!").norm() == 0.0);
  CHECK_THROWS_AS(e.embed({}), ValidationError);
}

TEST_CASE("embed preserves length and order") {
  HashedTfEmbedding e;
  std::mt19937 rng(3);
  const std::vector<std::string> words{"fork", "clone", "build", "test", "push", "review", "merge", "docs"};
  for (int round = 0; round < 50; ++round) {
    std::vector<std::string> texts(1 + rng() % 10);
    for (auto& t : texts)
      for (int k = 0; k < 4; ++k) t += words[rng() % words.size()] + " ";
    auto v = e.embed(texts);
    REQUIRE(v.size() == texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) CHECK(v[i].values == e.embed_one(texts[i]).values);
  }
}

TEST_CASE("cosine edge cases") {
  EmbeddingVector a{{1.0, 0.0}};
  EmbeddingVector z{{0.0, 0.0}};
  EmbeddingVector b{{1.0, 0.0, 0.0}};
  CHECK(cosine(a, z) == 0.0);
  CHECK_THROWS_AS(cosine(a, b), ValidationError);
}

TEST_CASE("rule completion table") {
  RuleCompletion rules;
  CompletionRequest title;
  title.task = CompletionTask::title;
  title.prompt = prompt::section("SEGMENT", "## Create a Pull Request\nPush your branch.");
  CHECK(rules.complete(title) == "Create a Pull Request");
  title.prompt = prompt::section("SEGMENT", "clone the repo then install deps locally");
  CHECK(rules.complete(title) == "clone the repo then install deps");

  CompletionRequest refine;
  refine.task = CompletionTask::refine_boundary;
  refine.prompt = "anything at all";
  CHECK(rules.complete(refine) == "KEEP");

  CompletionRequest structure;
  structure.task = CompletionTask::structure;
  structure.prompt = prompt::section("SEGMENTS", "s1\t2\tSetup\ns2\t0\tInstall things\ns3\t2\tOpen a Pull Request");
  CHECK(rules.complete(structure) ==
        "1 | s1 | category | root | -\n2 | s2 | task | s1 | -\n3 | s3 | category | root | main");

  CompletionRequest script;
  script.task = CompletionTask::script;
  script.prompt = prompt::section("SEGMENT", "## Heading\nDo one.\nDo two.");
  CHECK(rules.complete(script) == "1. Do one.\n2. Do two.");

  CompletionRequest empty;
  CHECK_THROWS_AS(rules.complete(empty), ValidationError);
}

TEST_CASE("silent narration") {
  SilentNarration n;
  auto r = n.synthesize({"", {"a", "b", "c", "d"}});
  CHECK(r.duration_s == 4.0);
  REQUIRE(r.audio.size() % 96 == 0);
  CHECK(r.audio.size() / 96 == 167);  // ceil(4 * 48000 / 1152)
  CHECK(static_cast<unsigned char>(r.audio[0]) == 0xFF);
  CHECK(static_cast<unsigned char>(r.audio[1]) == 0xFB);
  CHECK(n.synthesize({"", {"a", "b", "c", "d"}}).audio == r.audio);
  CHECK_THROWS_AS(n.synthesize({"", {}}), ValidationError);
}

TEST_CASE("prompt helpers") {
  auto s = prompt::section("X", "body\nlines");
  CHECK(s == "<<<X\nbody\nlines\nX>>>");
  CHECK(prompt::extract("pre " + s + " post", "X") == "body\nlines");
  CHECK_FALSE(prompt::extract("nothing", "X").has_value());
  CHECK(prompt::render("a {{x}} b {{y}} {{x}}", {{"x", "1"}, {"y", "2"}}) == "a 1 b 2 1");
}

TEST_CASE("prompt library defaults and overrides") {
  PromptLibrary lib;
  CHECK(lib.template_for(CompletionTask::title).find("{{segment}}") != std::string::npos);
  CHECK(lib.template_for(CompletionTask::refine_boundary).find("{{boundary}}") != std::string::npos);
  CHECK(lib.structure_examples().size() == 2);
  CHECK_FALSE(lib.script_examples().empty());

  testutil::TempDir dir;
  dir.write("prompts/title.txt", "Custom {{segment}}");
  PromptLibrary custom(dir.path().string());
  CHECK(custom.template_for(CompletionTask::title) == "Custom {{segment}}");
  CHECK(custom.template_for(CompletionTask::script) == lib.template_for(CompletionTask::script));
}

TEST_CASE("retrieval") {
  HashedTfEmbedding e;
  Corpus corpus;
  auto add = [&](const std::string& name, const std::vector<std::string>& paras) {
    Document d;
    d.name = name;
    int line = 1;
    for (const auto& p : paras) {
      Block b;
      b.text = p;
      b.span = {name, line, line};
      ++line;
      d.blocks.push_back(b);
    }
    corpus.documents.push_back(d);
  };
  add("a.md", {"fork the repository", "run the unit tests", "twin block text"});
  add("b.md", {"twin block text", "open a pull request"});
  RetrievalStore store(corpus, e);
  CHECK(store.size() == 5);

  auto hits = store.retrieve("run the unit tests", 2);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].text == "run the unit tests");
  CHECK(hits[0].score == doctest::Approx(1.0));

  auto all = store.retrieve("twin block text", 50);
  REQUIRE(all.size() == 5);
  CHECK(all[0].source_span.file == "a.md");
  CHECK(all[1].source_span.file == "b.md");
  for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i - 1].score >= all[i].score);
  for (const auto& p : all) CHECK((p.score >= 0.0 && p.score <= 1.0));

  CHECK(RetrievalStore().retrieve("x", 3).empty());
  CHECK_THROWS_AS(store.retrieve("x", 0), ValidationError);
}

TEST_CASE("make_providers honours offline") {
  ProviderConfig http;
  http.kind = ProviderKind::http;
  http.endpoint = "http://127.0.0.1:1/";
  auto suite = make_providers(http, http, http, true);
  CHECK(dynamic_cast<HashedTfEmbedding*>(suite.embedding.get()) != nullptr);
  CHECK(dynamic_cast<RuleCompletion*>(suite.completion.get()) != nullptr);
  CHECK(dynamic_cast<SilentNarration*>(suite.narration.get()) != nullptr);
  auto remote = make_providers(http, http, http, false);
  CHECK(dynamic_cast<HttpCompletion*>(remote.completion.get()) != nullptr);
}

TEST_CASE("provider config JSON never carries key values") {
  ProviderConfig c;
  c.kind = ProviderKind::http;
  c.endpoint = "https://api.example.org/v1/chat";
  c.api_key_env = "ONTREE_TEST_KEY";
  ::setenv("ONTREE_TEST_KEY", "sk-secret-value", 1);
  auto text = nlohmann::json(c).dump();
  CHECK(text.find("sk-secret-value") == std::string::npos);
  CHECK(nlohmann::json(c).get<ProviderConfig>().api_key_env == "ONTREE_TEST_KEY");
  CHECK_THROWS_AS(nlohmann::json({{"kind", "carrier-pigeon"}}).get<ProviderConfig>(), ValidationError);
}

TEST_CASE("http completion: wire format, auth, retries") {
  testutil::LocalServer server;
  std::atomic<int> calls{0};
  nlohmann::json last_body;
  std::string last_auth;
  std::mutex m;
  server.http.Post("/flaky", [&](const httplib::Request& req, httplib::Response& res) {
    {
      std::lock_guard lock(m);
      last_body = nlohmann::json::parse(req.body);
      last_auth = req.get_header_value("Authorization");
    }
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    res.set_header("x-request-id", "req-42");
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"Set Up Your Environment"}}]})",
                    "application/json");
  });
  server.http.Post("/refuse", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 400;
    res.set_header("x-request-id", "req-bad");
  });
  server.http.Post("/empty", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[{"message":{"content":"  "}}]})", "application/json");
  });
  server.http.Post("/down", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 500;
  });
  server.start();

  ::setenv("ONTREE_TEST_KEY", "k123", 1);
  auto cfg = http_config(server.url("/flaky"));
  cfg.api_key_env = "ONTREE_TEST_KEY";
  HttpCompletion flaky(cfg);
  flaky.endpoint().backoff_base = std::chrono::milliseconds(1);
  CompletionRequest req;
  req.task = CompletionTask::structure;
  req.prompt = "outline please";
  req.few_shot_examples = {{"in", "out"}};
  req.context_passages = {Passage{"ctx text", {"a.md", 3, 3}, 0.5}};
  CHECK(flaky.complete(req) == "Set Up Your Environment");
  CHECK(calls == 3);
  CHECK(last_auth == "Bearer k123");
  CHECK(last_body["model"] == "m");
  REQUIRE(last_body["messages"].size() == 3);
  CHECK(last_body["messages"][0]["role"] == "user");
  CHECK(last_body["messages"][1]["role"] == "assistant");
  CHECK(last_body["messages"][2]["content"].get<std::string>().find("ctx text") != std::string::npos);

  calls = 0;
  HttpCompletion refuse(http_config(server.url("/refuse")));
  try {
    refuse.complete(req);
    FAIL("expected ProviderError");
  } catch (const ProviderError& e) {
    CHECK(e.request_id() == "req-bad");
  }
  CHECK(calls == 1);

  HttpCompletion empty(http_config(server.url("/empty")));
  CHECK_THROWS_AS(empty.complete(req), EmptyCompletionError);

  calls = 0;
  HttpCompletion down(http_config(server.url("/down")));
  down.endpoint().backoff_base = std::chrono::milliseconds(1);
  CHECK_THROWS_AS(down.complete(req), ProviderError);
  CHECK(calls == 4);  // first try + 3 retries
}

TEST_CASE("http completion: transport errors are retried then reported") {
  // Nothing listens on port 1.
  auto cfg = http_config("http://127.0.0.1:1/v1");
  cfg.max_retries = 1;
  HttpCompletion c(cfg);
  c.endpoint().backoff_base = std::chrono::milliseconds(1);
  CompletionRequest req;
  req.prompt = "x";
  CHECK_THROWS_AS(c.complete(req), ProviderError);
}

TEST_CASE("http embedding and narration") {
  testutil::LocalServer server;
  server.http.Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    auto data = nlohmann::json::array();
    auto n = body["input"].size();
    for (std::size_t i = n; i-- > 0;)  // reversed, with explicit indices
      data.push_back({{"index", i}, {"embedding", {static_cast<double>(i), 1.0, 0.0}}});
    res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
  });
  server.http.Post("/embed-wrong", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"embeddings":[[1,2]]})", "application/json");
  });
  server.http.Post("/speak", [](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    res.set_content("ID3" + body["voice_id"].get<std::string>() + "|" + body["text"].get<std::string>(), "audio/mpeg");
  });
  server.start();

  auto cfg = http_config(server.url("/embed"));
  cfg.dimension = 3;
  HttpEmbedding emb(cfg);
  auto v = emb.embed({"a", "b"});
  REQUIRE(v.size() == 2);
  CHECK(v[0].values == std::vector<double>{0.0, 1.0, 0.0});
  CHECK(v[1].values == std::vector<double>{1.0, 1.0, 0.0});

  auto wrong = http_config(server.url("/embed-wrong"));
  wrong.dimension = 3;
  HttpEmbedding bad(wrong);
  CHECK_THROWS_AS(bad.embed({"a"}), ProviderError);

  auto ncfg = http_config(server.url("/speak"));
  ncfg.voice_id = "narrator";
  HttpNarration narr(ncfg);
  auto r = narr.synthesize({"", {"Step one", "Step two"}});
  CHECK(r.audio == "ID3narrator|Step one\nStep two");
}

TEST_CASE("network guard denies remote calls offline") {
  net::NetworkGuard::reset_attempts();
  {
    net::OfflineScope offline;
    CHECK_FALSE(net::NetworkGuard::allowed());
    HttpCompletion c(http_config("http://127.0.0.1:9/"));
    CompletionRequest req;
    req.prompt = "x";
    CHECK_THROWS_AS(c.complete(req), NetworkDeniedError);
    CHECK(net::NetworkGuard::attempts() == 1);
  }
  CHECK(net::NetworkGuard::allowed());
}

TEST_CASE("in-flight requests are bounded") {
  testutil::LocalServer server;
  std::atomic<int> current{0};
  std::atomic<int> peak{0};
  server.http.new_task_queue = [] { return new httplib::ThreadPool(8); };
  server.http.Post("/slow", [&](const httplib::Request&, httplib::Response& res) {
    int now = ++current;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    --current;
    res.set_content(R"({"content":"ok"})", "application/json");
  });
  server.start();
  auto cfg = http_config(server.url("/slow"));
  cfg.max_in_flight = 2;
  HttpCompletion c(cfg);
  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i)
    threads.emplace_back([&] {
      CompletionRequest req;
      req.prompt = "x";
      CHECK(c.complete(req) == "ok");
    });
  for (auto& t : threads) t.join();
  CHECK(peak <= 2);
}

}  // TEST_SUITE
