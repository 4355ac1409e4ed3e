#include "mbrot/adapter.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <memory>
#include <random>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "mbrot/doc_utility.hpp"
#include "oracles.hpp"

using namespace mbrot;

namespace {

/// In-process HTTP adapter speaking the wire protocol, scoring with token F1
/// (optionally shifted out of range).
class FakeHttpAdapter {
 public:
  explicit FakeHttpAdapter(double shift = 0.0) {
    server_.Post("/v1/score", [this, shift](const httplib::Request& req,
                                            httplib::Response& res) {
      ++requests_;
      auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.contains("pairs")) {
        res.status = 400;
        res.set_content(R"({"error":"malformed"})", "application/json");
        return;
      }
      auto scores = nlohmann::json::array();
      for (const auto& p : body["pairs"])
        scores.push_back(f1_.score(p["hyp"].get<std::string>(),
                                   p["ref"].get<std::string>()) + shift);
      res.set_content(nlohmann::json{{"scores", scores}}.dump(), "application/json");
    });
    server_.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"metric":"token-f1","version":"test"})", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeHttpAdapter() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int requests() const { return requests_.load(); }

 private:
  TokenF1 f1_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> requests_{0};
};

AdapterOptions fast_options(std::size_t batch = 64) {
  AdapterOptions o;
  o.timeout_seconds = 5.0;
  o.retries = 0;
  o.batch_size = batch;
  return o;
}

}  // namespace

TEST(AdapterProtocol, RequestShape) {
  std::vector<TextPair> pairs = {{"a", "b"}, {"c", "d"}};
  auto j = make_score_request(pairs, "m");
  EXPECT_EQ(j["metric"], "m");
  ASSERT_EQ(j["pairs"].size(), 2u);
  EXPECT_EQ(j["pairs"][1]["hyp"], "c");
  EXPECT_EQ(j["pairs"][1]["ref"], "d");
}

TEST(AdapterProtocol, ResponseValidation) {
  EXPECT_EQ(parse_score_response(R"({"scores":[0.5,1,0]})", 3),
            (std::vector<double>{0.5, 1.0, 0.0}));
  try {
    parse_score_response(R"({"scores":[0.5,1.5]})", 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AdapterRangeViolation);
    EXPECT_EQ(*e.index(), 1u);
  }
  EXPECT_THROW(parse_score_response(R"({"scores":[-0.1]})", 1), Error);
  EXPECT_THROW(parse_score_response(R"({"scores":[0.5]})", 2), Error);
  EXPECT_THROW(parse_score_response(R"({"error":"x"})", 1), Error);
  EXPECT_THROW(parse_score_response("not json", 1), Error);
}

TEST(HttpAdapter, RoundTripMatchesLocalScores) {
  FakeHttpAdapter server;
  auto transport = std::make_shared<HttpAdapterTransport>(server.url(), fast_options());
  ExternalAdapterUtility remote(transport, "token-f1", fast_options(7));
  TokenF1 local;

  std::mt19937_64 rng(9);
  std::vector<TextPair> pairs;
  for (int k = 0; k < 50; ++k)
    pairs.push_back({oracle::random_sentence(rng), oracle::random_sentence(rng)});
  auto scores = remote.score_batch(pairs);
  ASSERT_EQ(scores.size(), pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k)
    EXPECT_NEAR(scores[k], local.score(pairs[k].hyp, pairs[k].ref), 1e-6);
  // 50 pairs in batches of 7.
  EXPECT_EQ(server.requests(), 8);
  EXPECT_NEAR(remote.score("a b", "a b"), 1.0, 1e-12);
  EXPECT_FALSE(remote.symmetric());
}

TEST(HttpAdapter, RangeViolationCarriesPairIndex) {
  FakeHttpAdapter server(0.5);
  auto transport = std::make_shared<HttpAdapterTransport>(server.url(), fast_options());
  ExternalAdapterUtility remote(transport, "token-f1", fast_options(2));
  std::vector<TextPair> pairs = {{"x", "y"}, {"x", "y"}, {"a", "a"}};
  try {
    remote.score_batch(pairs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AdapterRangeViolation);
    EXPECT_EQ(*e.index(), 2u);
  }
}

TEST(HttpAdapter, UnreachableIsAdapterUnavailable) {
  int port;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  auto o = fast_options();
  o.timeout_seconds = 1.0;
  o.retries = 1;
  auto transport = std::make_shared<HttpAdapterTransport>(
      "http://127.0.0.1:" + std::to_string(port), o);
  ExternalAdapterUtility remote(transport, "token-f1", o);
  try {
    remote.score("a", "b");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AdapterUnavailable);
  }
}

TEST(HttpAdapter, ConcurrentBatchesKeepOrder) {
  FakeHttpAdapter server;
  auto transport = std::make_shared<HttpAdapterTransport>(server.url(), fast_options());
  ExternalAdapterUtility remote(transport, "token-f1", fast_options(3));
  TokenF1 local;
  std::vector<std::thread> threads;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      std::mt19937_64 rng(100 + t);
      std::vector<TextPair> pairs;
      for (int k = 0; k < 20; ++k)
        pairs.push_back({oracle::random_sentence(rng), oracle::random_sentence(rng)});
      auto scores = remote.score_batch(pairs);
      for (std::size_t k = 0; k < pairs.size(); ++k)
        if (std::abs(scores[k] - local.score(pairs[k].hyp, pairs[k].ref)) > 1e-6)
          ++mismatches;
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(mismatches.load(), 0);
}

TEST(HttpAdapter, DrivesDocumentUtility) {
  FakeHttpAdapter server;
  auto transport = std::make_shared<HttpAdapterTransport>(server.url(), fast_options());
  DocUtilityConfig remote_cfg;
  remote_cfg.sent_utility =
      std::make_shared<ExternalAdapterUtility>(transport, "token-f1", fast_options());
  DocUtilityConfig local_cfg;
  local_cfg.sent_utility = std::make_shared<TokenF1>();
  auto h = make_document("h", "I like cats and dogs. They are nice.", WeightScheme::Uniform);
  auto y = make_document("y", "I like cats. I like dogs.", WeightScheme::Uniform);
  EXPECT_NEAR(doc_utility(h, y, remote_cfg).value, doc_utility(h, y, local_cfg).value, 1e-6);
  // One request per cost matrix.
  EXPECT_EQ(server.requests(), 1);
}

#ifdef MBROT_FAKE_ADAPTER
TEST(StdioAdapter, RoundTrip) {
  auto transport = std::make_shared<StdioAdapterTransport>(MBROT_FAKE_ADAPTER, fast_options());
  ExternalAdapterUtility remote(transport, "token-f1", fast_options(4));
  TokenF1 local;
  std::mt19937_64 rng(21);
  std::vector<TextPair> pairs;
  for (int k = 0; k < 30; ++k)
    pairs.push_back({oracle::random_sentence(rng), oracle::random_sentence(rng)});
  auto scores = remote.score_batch(pairs);
  for (std::size_t k = 0; k < pairs.size(); ++k)
    EXPECT_NEAR(scores[k], local.score(pairs[k].hyp, pairs[k].ref), 1e-6);
}

TEST(StdioAdapter, ErrorsMapToKinds) {
  auto o = fast_options();
  auto transport = std::make_shared<StdioAdapterTransport>(MBROT_FAKE_ADAPTER, o);
  ExternalAdapterUtility out_of_range(transport, "out-of-range", o);
  try {
    out_of_range.score("a", "a");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AdapterRangeViolation);
  }
  ExternalAdapterUtility short_reply(transport, "short", o);
  EXPECT_THROW(short_reply.score("a", "b"), Error);
  ExternalAdapterUtility error_reply(transport, "error", o);
  EXPECT_THROW(error_reply.score("a", "b"), Error);

  ExternalAdapterUtility crash(transport, "crash", o);
  try {
    crash.score("a", "b");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AdapterUnavailable);
  }
  // The transport restarts the child after a crash.
  ExternalAdapterUtility ok(transport, "token-f1", o);
  EXPECT_EQ(ok.score("a b", "a b"), 1.0);
}

TEST(StdioAdapter, MissingCommandIsUnavailable) {
  auto o = fast_options();
  auto transport =
      std::make_shared<StdioAdapterTransport>("/nonexistent/adapter-binary", o);
  ExternalAdapterUtility remote(transport, "token-f1", o);
  try {
    remote.score("a", "b");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AdapterUnavailable);
  }
}
#endif
