#include <gtest/gtest.h>

#include <thread>

#include "httplib.h"
#include "rag/gateway.hpp"
#include "support.hpp"

using namespace rag;
using test::entry;

namespace {

GatewayOptions fast() {
  GatewayOptions o;
  o.backoff_ms = 0;
  return o;
}

Gateway scripted(std::vector<ScriptEntry> script, std::shared_ptr<ManualClock> clock = nullptr,
                 std::shared_ptr<RerankBackend> reranker = nullptr) {
  auto chat = std::make_shared<ScriptedChatBackend>(std::move(script), clock);
  return Gateway(chat, std::make_shared<HashingEmbeddingBackend>(16), std::move(reranker), fast(), clock);
}

class CountingObserver : public CallObserver {
 public:
  std::vector<std::string> tags;
  std::size_t embeds = 0;
  std::size_t veto_after = 100;
  void before_completion(const std::string&) override {
    if (tags.size() >= veto_after) throw Error(ErrorCode::budget_exceeded, "budget exceeded");
  }
  void after_completion(const std::string& tag, std::int64_t) override { tags.push_back(tag); }
  void after_embed(std::size_t n) override { embeds += n; }
};

class VaryingDimEmbedder : public EmbeddingBackend {
 public:
  std::size_t dim = 4;
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
    return std::vector<std::vector<double>>(texts.size(), std::vector<double>(dim, 1.0));
  }
};

/// Local stand-in for the chat, embedding and rerank endpoints.
class StubServer {
 public:
  StubServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_auth = req.get_header_value("Authorization");
      last_body = nlohmann::json::parse(req.body);
      if (fail_next > 0) {
        --fail_next;
        res.status = 503;
        return;
      }
      nlohmann::json out{{"choices", {{{"message", {{"role", "assistant"}, {"content", "stub reply"}}}}}}};
      res.set_content(out.dump(), "application/json");
    });
    server_.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
      auto in = nlohmann::json::parse(req.body);
      nlohmann::json data = nlohmann::json::array();
      double i = 1;
      for (const auto& t : in["input"]) {
        (void)t;
        data.push_back({{"embedding", {i, 0.5, 0.25}}});
        i += 1;
      }
      res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
    });
    server_.Post("/v1/rerank", [](const httplib::Request& req, httplib::Response& res) {
      auto in = nlohmann::json::parse(req.body);
      nlohmann::json scores = nlohmann::json::array();
      for (const auto& d : in["documents"]) scores.push_back(static_cast<double>(d.get<std::string>().size()));
      res.set_content(nlohmann::json{{"scores", scores}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  HttpEndpoint endpoint(const std::string& path, const std::string& key = "") const {
    return HttpEndpoint{"http://127.0.0.1:" + std::to_string(port_), path, "stub-model", key, 5};
  }

  std::string last_auth;
  nlohmann::json last_body;
  int fail_next = 0;

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace

TEST(ModelRequest, Validation) {
  ModelRequest r;
  EXPECT_THROW(r.validate(), Error);
  r.turns.push_back({Role::assistant, "hi"});
  EXPECT_THROW(r.validate(), Error);
  r.turns.push_back({Role::user, ""});
  EXPECT_THROW(r.validate(), Error);
  r.turns.back().content = "question";
  EXPECT_NO_THROW(r.validate());
}

TEST(ScriptedBackend, EchoesReplyForTag) {
  auto g = scripted({entry("summary", "X")});
  EXPECT_EQ(g.complete(g.make_request("summary", "p")).text, "X");
}

TEST(ScriptedBackend, ConsumesEntriesInOrder) {
  auto g = scripted({entry("a", "first"), entry("a", "second")});
  EXPECT_EQ(g.complete(g.make_request("a", "p")).text, "first");
  EXPECT_EQ(g.complete(g.make_request("a", "p")).text, "second");
}

TEST(ScriptedBackend, ExhaustionFailsLoudly) {
  auto g = scripted({entry("a", "only")});
  g.complete(g.make_request("a", "p"));
  try {
    g.complete(g.make_request("a", "p"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::script_exhausted);
  }
}

TEST(ScriptedBackend, TagMustMatchWholePattern) {
  auto g = scripted({entry("qc_.*", "yes"), entry("judge", "7")});
  EXPECT_EQ(g.complete(g.make_request("qc_faithfulness", "p")).text, "yes");
  EXPECT_THROW(g.complete(g.make_request("judgement", "p")), Error);
}

TEST(ScriptedBackend, LatencyAdvancesLogicalClock) {
  auto clock = std::make_shared<ManualClock>();
  auto g = scripted({entry("a", "x", 250)}, clock);
  auto r = g.complete(g.make_request("a", "p"));
  EXPECT_EQ(r.latency_ms, 250);
  EXPECT_EQ(clock->now_ms(), 250);
  EXPECT_EQ(r.backend_id, "scripted");
}

TEST(ScriptParsing, JsonlFieldsAndErrors) {
  auto s = parse_script("{\"tag_pattern\":\"a\",\"reply\":\"r\",\"latency_ms\":5}\n\n{\"tag_pattern\":\"b\",\"reply\":\"\",\"fail\":true}\n");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].latency_ms, 5);
  EXPECT_TRUE(s[1].fail);
  EXPECT_THROW(parse_script("{\"reply\":\"x\"}"), Error);
  EXPECT_THROW(parse_script("{\"tag_pattern\":\"(\",\"reply\":\"x\"}"), Error);
}

TEST(Complete, RetriesTransportFailures) {
  auto g = scripted({test::failing("a"), test::failing("a"), entry("a", "ok")});
  EXPECT_EQ(g.complete(g.make_request("a", "p")).text, "ok");
}

TEST(Complete, ExhaustedRetriesKeepTag) {
  auto chat = std::make_shared<ScriptedChatBackend>(std::vector<ScriptEntry>{test::failing("synthesize")});
  GatewayOptions o = fast();
  o.llm_retries = 0;
  Gateway g(chat, nullptr, nullptr, o);
  try {
    g.complete(g.make_request("synthesize", "p"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::transport);
    EXPECT_NE(std::string(e.what()).find("[synthesize]"), std::string::npos);
  }
}

TEST(Complete, UnreachableEndpointKeepsTag) {
  GatewayOptions o = fast();
  o.llm_retries = 0;
  Gateway g(std::make_shared<HttpChatBackend>(HttpEndpoint{"http://127.0.0.1:1", "/v1/chat/completions", "m", "", 1}),
            nullptr, nullptr, o);
  try {
    g.complete(g.make_request("intent", "p"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::transport);
    EXPECT_NE(std::string(e.what()).find("[intent]"), std::string::npos);
  }
}

TEST(Complete, DoesNotMutateRequest) {
  auto g = scripted({entry("a", "x")});
  auto req = g.make_request("a", "prompt");
  auto copy = req;
  g.complete(req);
  EXPECT_EQ(req.turns, copy.turns);
  EXPECT_EQ(req.tag, copy.tag);
}

TEST(Observer, ScopedCopyReportsCallsAndCanVeto) {
  auto base = scripted({entry("a", "1"), entry("b", "2"), entry("c", "3")});
  CountingObserver obs;
  obs.veto_after = 2;
  auto g = base.scoped(obs);
  g.complete(g.make_request("a", "p"));
  g.complete(g.make_request("b", "p"));
  g.embed({"x", "y"});
  EXPECT_EQ(obs.tags, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(obs.embeds, 2u);
  EXPECT_THROW(g.complete(g.make_request("c", "p")), Error);
  base.complete(base.make_request("c", "p"));  // unscoped copy is not metered
  EXPECT_EQ(obs.tags.size(), 2u);
}

TEST(Embed, OneVectorPerTextAndDeterministic) {
  Gateway g(nullptr, std::make_shared<HashingEmbeddingBackend>(16));
  auto v = g.embed({"alpha beta", "gamma", "alpha beta"});
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0].size(), v[1].size());
  EXPECT_EQ(v[0], v[2]);
  EXPECT_TRUE(g.embed({}).empty());
  EXPECT_EQ(g.embedding_dim(), 16u);
}

TEST(Embed, BatchLimitAndEmptyText) {
  GatewayOptions o = fast();
  o.embed_batch = 2;
  Gateway g(nullptr, std::make_shared<HashingEmbeddingBackend>(8), nullptr, o);
  EXPECT_THROW(g.embed({"a", "b", "c"}), Error);
  EXPECT_THROW(g.embed({"a", ""}), Error);
}

TEST(Embed, DimensionFixedByFirstResponse) {
  auto e = std::make_shared<VaryingDimEmbedder>();
  Gateway g(nullptr, e);
  g.embed({"a"});
  e->dim = 5;
  EXPECT_THROW(g.embed({"b"}), Error);
}

TEST(Rerank, SingleCandidateUnchanged) {
  auto g = scripted({entry("rerank", "7")});
  auto out = g.rerank("q", {{"A", "text", 0.0}});
  ASSERT_EQ(out.candidates.size(), 1u);
  EXPECT_EQ(out.candidates[0].chunk_id, "A");
  EXPECT_EQ(out.candidates[0].relevance, 7.0);
}

TEST(Rerank, FallbackOrdersByScore) {
  auto g = scripted({entry("rerank", "3"), entry("rerank", "9")});
  auto out = g.rerank("q", {{"A", "a", 0}, {"B", "b", 0}});
  EXPECT_EQ(out.candidates[0].chunk_id, "B");
  EXPECT_EQ(out.candidates[1].chunk_id, "A");
}

TEST(Rerank, EqualScoresTieByChunkId) {
  auto g = scripted({entry("rerank", "5"), entry("rerank", "5")});
  auto out = g.rerank("q", {{"B", "b", 0}, {"A", "a", 0}});
  EXPECT_EQ(out.candidates[0].chunk_id, "A");
  EXPECT_EQ(out.candidates[1].chunk_id, "B");
}

TEST(Rerank, UnparsableScoreIsZeroWithWarning) {
  auto g = scripted({entry("rerank", "very relevant"), entry("rerank", "2")});
  auto out = g.rerank("q", {{"A", "a", 0}, {"B", "b", 0}});
  EXPECT_EQ(out.candidates[0].chunk_id, "B");
  EXPECT_EQ(out.candidates[1].relevance, 0.0);
  ASSERT_EQ(out.warnings.size(), 1u);
  EXPECT_NE(out.warnings[0].find("A"), std::string::npos);
}

TEST(Rerank, CrossEncoderIsPermutation) {
  auto g = scripted({}, nullptr, std::make_shared<LexicalRerankBackend>());
  std::vector<RerankCandidate> in{{"c1", "limits for the rates book", 0},
                                  {"c2", "unrelated words", 0},
                                  {"c3", "rates book limits and escalation", 0}};
  auto out = g.rerank("rates book limits", in);
  std::multiset<std::string> a, b;
  for (const auto& c : in) a.insert(c.chunk_id);
  for (const auto& c : out.candidates) b.insert(c.chunk_id);
  EXPECT_EQ(a, b);
  EXPECT_EQ(out.candidates.back().chunk_id, "c2");
}

TEST(Rerank, EmptyCandidateListRejected) {
  auto g = scripted({});
  EXPECT_THROW(g.rerank("q", {}), Error);
}

TEST(HttpParsing, ChatBodyAndResponse) {
  ModelRequest r;
  r.turns = {{Role::system, "sys"}, {Role::user, "hello"}};
  r.temperature = 0.0;
  r.max_tokens = 64;
  auto body = chat_request_body(r, "m1");
  EXPECT_EQ(body["model"], "m1");
  EXPECT_EQ(body["messages"][1]["role"], "user");
  EXPECT_EQ(body["max_tokens"], 64);
  EXPECT_EQ(parse_chat_response(nlohmann::json::parse(R"({"choices":[{"message":{"content":"hi"}}]})")), "hi");
  EXPECT_THROW(parse_chat_response(nlohmann::json::parse(R"({"choices":[]})")), Error);
}

TEST(HttpParsing, EmbeddingAndRerank) {
  auto e = parse_embedding_response(nlohmann::json::parse(R"({"data":[{"embedding":[1,2]},{"embedding":[3,4]}]})"), 2);
  EXPECT_EQ(e[1], (std::vector<double>{3, 4}));
  EXPECT_THROW(parse_embedding_response(nlohmann::json::parse(R"({"data":[]})"), 1), Error);
  EXPECT_EQ(parse_rerank_response(nlohmann::json::parse(R"({"scores":[0.5,2]})"), 2), (std::vector<double>{0.5, 2}));
}

TEST(HttpBackends, TalkToLocalStub) {
  StubServer stub;
  auto chat = std::make_shared<HttpChatBackend>(stub.endpoint("/v1/chat/completions", "secret"));
  auto emb = std::make_shared<HttpEmbeddingBackend>(stub.endpoint("/v1/embeddings"));
  auto rr = std::make_shared<HttpRerankBackend>(stub.endpoint("/v1/rerank"));
  Gateway g(chat, emb, rr, fast());

  EXPECT_EQ(g.complete(g.make_request("intent", "hello")).text, "stub reply");
  EXPECT_EQ(stub.last_auth, "Bearer secret");
  EXPECT_EQ(stub.last_body["model"], "stub-model");
  EXPECT_EQ(stub.last_body["messages"][0]["content"], "hello");

  stub.fail_next = 1;
  EXPECT_EQ(g.complete(g.make_request("intent", "again")).text, "stub reply");

  auto v = g.embed({"a", "b"});
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[1][0], 2.0);

  auto out = g.rerank("q", {{"short", "ab", 0}, {"long", "abcdef", 0}});
  EXPECT_EQ(out.candidates[0].chunk_id, "long");
}
