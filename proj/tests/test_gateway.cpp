#include <catch2/catch_amalgamated.hpp>

#include <thread>

#include "gseo/gateway.hpp"
#include "helpers.hpp"

using namespace gseo;

namespace {

ChatRequest basic_request(std::string user = "hello") {
  ChatRequest req;
  req.backend_id = "default";
  req.model = "m1";
  req.messages.push_back({"system", "sys", std::nullopt});
  req.messages.push_back({"user", std::move(user), std::nullopt});
  req.temperature = 0.0;
  req.seed = 7;
  req.tag = "unit";
  return req;
}

}  // namespace

TEST_CASE("cache key covers identity fields and nothing else", "[gateway]") {
  ChatRequest a = basic_request();
  ChatRequest b = basic_request();
  CHECK(cache_key(a).digest == cache_key(b).digest);

  ChatRequest c = basic_request();
  c.temperature = 0.0001;  // four decimals are significant
  CHECK(cache_key(c).digest != cache_key(a).digest);

  ChatRequest d = basic_request();
  d.temperature = 0.00001;  // below the 4-decimal resolution
  CHECK(cache_key(d).digest == cache_key(a).digest);

  ChatRequest e = basic_request();
  e.seed = 8;
  CHECK(cache_key(e).digest != cache_key(a).digest);

  ChatRequest f = basic_request();
  f.seed = std::nullopt;
  CHECK(cache_key(f).digest != cache_key(a).digest);

  ChatRequest g = basic_request();
  g.model = "m2";
  CHECK(cache_key(g).digest != cache_key(a).digest);

  ChatRequest h = basic_request();
  h.backend_id = "other";
  CHECK(cache_key(h).digest != cache_key(a).digest);

  ChatRequest i = basic_request("different");
  CHECK(cache_key(i).digest != cache_key(a).digest);

  // Neither the tag nor max_tokens participates in identity.
  ChatRequest j = basic_request();
  j.tag = "othertag";
  j.max_tokens = 128;
  CHECK(cache_key(j).digest == cache_key(a).digest);

  ChatRequest k = basic_request();
  k.messages[1].image_ref = "https://x.example/i.png";
  CHECK(cache_key(k).digest != cache_key(a).digest);
}

TEST_CASE("request validation", "[gateway]") {
  ChatRequest empty;
  CHECK_THROWS_AS(validate_request(empty), Error);

  ChatRequest bad_role = basic_request();
  bad_role.messages[0].role = "assistant";
  CHECK_THROWS_AS(validate_request(bad_role), Error);

  ChatRequest no_content = basic_request();
  no_content.messages[1].content = "";
  CHECK_THROWS_AS(validate_request(no_content), Error);

  ChatRequest image_only = basic_request();
  image_only.messages[1].content = "";
  image_only.messages[1].image_ref = "https://x.example/i.png";
  CHECK_NOTHROW(validate_request(image_only));

  ChatRequest hot = basic_request();
  hot.temperature = 2.5;
  CHECK_THROWS_AS(validate_request(hot), Error);
}

TEST_CASE("response cache stores under two-level digest paths", "[gateway]") {
  testutil::TempDir tmp;
  ResponseCache cache(tmp.path);
  ChatRequest req = basic_request();
  CacheKey key = cache_key(req);
  CHECK_FALSE(cache.lookup(key.digest).has_value());
  cache.store(key, req, "stored text");
  auto hit = cache.lookup(key.digest);
  REQUIRE(hit.has_value());
  CHECK(*hit == "stored text");
  CHECK(fs::exists(tmp.path / key.digest.substr(0, 2) / (key.digest + ".json")));
}

TEST_CASE("gateway caches completions and replays them", "[gateway]") {
  testutil::TempDir tmp;
  auto counting = std::make_shared<CountingBackend>(std::make_shared<MockBackend>());
  Gateway gw(counting, tmp.path / "cache");

  ChatRequest req = basic_request();
  ChatResponse first = gw.complete(req);
  CHECK_FALSE(first.cache_hit);
  CHECK_FALSE(first.text.empty());
  CHECK(counting->calls() == 1);

  ChatResponse second = gw.complete(req);
  CHECK(second.cache_hit);
  CHECK(second.text == first.text);
  CHECK(counting->calls() == 1);

  // Replay over the warmed cache never reaches the backend.
  auto replay_count = std::make_shared<CountingBackend>(std::make_shared<ReplayBackend>());
  Gateway replay(replay_count, tmp.path / "cache");
  ChatResponse third = replay.complete(req);
  CHECK(third.cache_hit);
  CHECK(third.text == first.text);
  CHECK(replay_count->calls() == 0);
}

TEST_CASE("replay backend raises on a cold cache", "[gateway]") {
  testutil::TempDir tmp;
  Gateway gw(std::make_shared<ReplayBackend>(), tmp.path / "cache");
  try {
    gw.complete(basic_request());
    FAIL("expected replay miss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ReplayMiss);
    CHECK(e.detail() == cache_key(basic_request()).digest);
  }
}

TEST_CASE("null backend is reported as unconfigured", "[gateway]") {
  testutil::TempDir tmp;
  Gateway gw(nullptr, tmp.path / "cache");
  try {
    gw.complete(basic_request());
    FAIL("expected unconfigured backend");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BackendUnconfigured);
  }
}

TEST_CASE("mock backend is deterministic and tag-aware", "[gateway]") {
  MockBackend mock;
  ChatRequest req = basic_request();
  CHECK(mock.invoke(req, cache_key(req)).text == mock.invoke(req, cache_key(req)).text);

  ChatRequest judge = basic_request();
  judge.tag = "judge_relevance";
  std::string text = mock.invoke(judge, cache_key(judge)).text;
  auto parsed = [&]() {
    size_t pos = text.rfind("Score:");
    REQUIRE(pos != std::string::npos);
    return std::stoi(text.substr(pos + 6));
  }();
  CHECK(parsed >= 0);
  CHECK(parsed <= 5);

  ChatRequest cap = basic_request();
  cap.tag = "structural_caption";
  std::string caption = trim(mock.invoke(cap, cache_key(cap)).text);
  CHECK_FALSE(caption.empty());
  CHECK(caption.back() == '.');
}

TEST_CASE("mock precedence: hook beats fixture beats template beats simulation", "[gateway]") {
  MockBackend mock;
  ChatRequest req = basic_request();
  req.tag = "unit";
  std::string digest = cache_key(req).digest;

  std::string simulated = mock.invoke(req, cache_key(req)).text;

  mock.add_template("unit", "templated");
  CHECK(mock.invoke(req, cache_key(req)).text == "templated");

  mock.add_fixture("unit", digest, "fixed");
  CHECK(mock.invoke(req, cache_key(req)).text == "fixed");

  mock.set_hook([](const ChatRequest&) { return std::optional<std::string>("hooked"); });
  CHECK(mock.invoke(req, cache_key(req)).text == "hooked");

  mock.set_hook([](const ChatRequest&) { return std::optional<std::string>(); });
  CHECK(mock.invoke(req, cache_key(req)).text == "fixed");  // declining hook falls through
  CHECK_FALSE(simulated.empty());
}

TEST_CASE("recording backend captures outbound requests", "[gateway]") {
  testutil::TempDir tmp;
  auto recording = std::make_shared<RecordingBackend>(std::make_shared<MockBackend>());
  Gateway gw(recording, tmp.path / "cache");
  gw.complete(basic_request("first"));
  gw.complete(basic_request("second"));
  gw.complete(basic_request("first"));  // cache hit, not recorded
  auto captured = recording->captured();
  REQUIRE(captured.size() == 2);
  CHECK(captured[0].messages[1].content == "first");
  CHECK(captured[1].messages[1].content == "second");
}

TEST_CASE("gateway bounds backend concurrency", "[gateway]") {
  testutil::TempDir tmp;
  class SlowBackend : public Backend {
   public:
    BackendResult invoke(const ChatRequest& req, const CacheKey& key) override {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      MockBackend mock;
      return mock.invoke(req, key);
    }
  };
  auto counting = std::make_shared<CountingBackend>(std::make_shared<SlowBackend>());
  Gateway gw(counting, tmp.path / "cache", 2);

  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&gw, i]() { gw.complete(basic_request("msg " + std::to_string(i))); });
  }
  for (auto& t : threads) t.join();
  CHECK(counting->calls() == 8);
  CHECK(counting->max_in_flight() <= 2);
}

TEST_CASE("live backend parses completions and retries transient failures", "[gateway]") {
  std::vector<int> sleeps;
  int calls = 0;
  LiveBackend::Options opt;
  opt.base_url = "https://api.example.test";
  opt.transport = [&calls](const std::string&) -> HttpResult {
    ++calls;
    if (calls < 3) return {429, "slow down", false, ""};
    return {200, R"({"choices":[{"message":{"content":"live says hi"}}]})", false, ""};
  };
  opt.sleep_fn = [&sleeps](int s) { sleeps.push_back(s); };
  LiveBackend backend(opt);

  ChatRequest req = basic_request();
  BackendResult res = backend.invoke(req, cache_key(req));
  CHECK(res.text == "live says hi");
  CHECK(res.attempt_count == 3);
  CHECK(sleeps == std::vector<int>{1, 2});
}

TEST_CASE("live backend exhausts transient failures with exponential backoff", "[gateway]") {
  std::vector<int> sleeps;
  LiveBackend::Options opt;
  opt.base_url = "https://api.example.test";
  opt.transport = [](const std::string&) -> HttpResult { return {0, "", true, "conn refused"}; };
  opt.sleep_fn = [&sleeps](int s) { sleeps.push_back(s); };
  LiveBackend backend(opt);

  ChatRequest req = basic_request();
  try {
    backend.invoke(req, cache_key(req));
    FAIL("expected transient exhaustion");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TransientExhausted);
  }
  CHECK(sleeps == std::vector<int>{1, 2, 4, 8});
}

TEST_CASE("live backend rejects permanent failures without retrying", "[gateway]") {
  int calls = 0;
  LiveBackend::Options opt;
  opt.base_url = "https://api.example.test";
  opt.transport = [&calls](const std::string&) -> HttpResult {
    ++calls;
    return {400, "bad request body", false, ""};
  };
  opt.sleep_fn = [](int) {};
  LiveBackend backend(opt);

  ChatRequest req = basic_request();
  try {
    backend.invoke(req, cache_key(req));
    FAIL("expected permanent rejection");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PermanentRejection);
  }
  CHECK(calls == 1);
}

TEST_CASE("live backend sends OpenAI-shaped payloads with vision parts", "[gateway]") {
  testutil::TempDir tmp;
  std::string payload;
  LiveBackend::Options opt;
  opt.base_url = "https://api.example.test";
  opt.transport = [&payload](const std::string& body) -> HttpResult {
    payload = body;
    return {200, R"({"choices":[{"message":{"content":"ok"}}]})", false, ""};
  };
  opt.sleep_fn = [](int) {};
  LiveBackend backend(opt);

  write_file_atomic(tmp.path / "img.png", std::string("\x89PNG fake", 9));
  ChatRequest req = basic_request("describe");
  req.messages[1].image_ref = (tmp.path / "img.png").string();
  req.max_tokens = 64;
  backend.invoke(req, cache_key(req));

  json j = json::parse(payload);
  CHECK(j["model"] == "m1");
  CHECK(j["temperature"] == 0.0);
  CHECK(j["seed"] == 7);
  CHECK(j["max_tokens"] == 64);
  REQUIRE(j["messages"].size() == 2);
  const json& vision = j["messages"][1]["content"];
  REQUIRE(vision.is_array());
  bool has_image = false, has_text = false;
  for (const auto& part : vision) {
    if (part["type"] == "image_url") {
      has_image = true;
      std::string url = part["image_url"]["url"].get<std::string>();
      CHECK(url.rfind("data:image/png;base64,", 0) == 0);
    }
    if (part["type"] == "text") has_text = part["text"] == "describe";
  }
  CHECK(has_image);
  CHECK(has_text);
}

TEST_CASE("unreadable local image raises before any transport call", "[gateway]") {
  int calls = 0;
  LiveBackend::Options opt;
  opt.base_url = "https://api.example.test";
  opt.transport = [&calls](const std::string&) -> HttpResult {
    ++calls;
    return {200, "{}", false, ""};
  };
  LiveBackend backend(opt);
  ChatRequest req = basic_request("describe");
  req.messages[1].image_ref = "/nonexistent/image.png";
  try {
    backend.invoke(req, cache_key(req));
    FAIL("expected unreadable image");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ImageUnreadable);
  }
  CHECK(calls == 0);
}

TEST_CASE("gateway caption_image guards locators", "[gateway]") {
  testutil::TempDir tmp;
  Gateway gw(std::make_shared<MockBackend>(), tmp.path / "cache");
  ImageAsset missing{"i1", "", std::nullopt};
  ChatRequest base = basic_request();
  base.messages.pop_back();  // caption_image appends the user turn
  CHECK_THROWS_AS(gw.caption_image(missing, "prompt", base), Error);

  ImageAsset remote{"i2", "https://x.example/i.png", std::nullopt};
  ChatResponse resp = gw.caption_image(remote, "prompt", base);
  CHECK_FALSE(resp.text.empty());
}
