#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "brandlens/crypto.hpp"
#include "brandlens/provider_transport.hpp"

using namespace brandlens;
using nlohmann::json;

namespace {

LlmRequest vision_request() {
  LlmRequest r;
  r.model_id = "x/m";
  r.system_text = "sys";
  r.user_text = "user";
  r.image = ImageData{"PNGBYTES", "image/png"};
  r.max_output_tokens = 77;
  return r;
}

std::string header(const HttpCall& c, const std::string& name) {
  for (const auto& [k, v] : c.headers) {
    if (k == name) return v;
  }
  return {};
}

// Local stand-in for a provider endpoint.
class FakeProvider {
 public:
  FakeProvider() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeProvider() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(ProviderNames, EnvVarAndModelId) {
  EXPECT_EQ(api_key_env_var("openai"), "BRANDLENS_API_KEY_OPENAI");
  EXPECT_EQ(api_key_env_var("my-gemini.2"), "BRANDLENS_API_KEY_MY_GEMINI_2");
  EXPECT_EQ(split_model_id("anthropic/claude-3-opus"), (std::pair<std::string, std::string>{"anthropic", "claude-3-opus"}));
  EXPECT_EQ(split_model_id("google/models/x").second, "models/x");
  EXPECT_THROW(split_model_id("gpt-4"), std::invalid_argument);
  for (auto k : {ProviderKind::OpenAI, ProviderKind::Anthropic, ProviderKind::Gemini}) {
    EXPECT_EQ(provider_kind_from_string(to_string(k)), k);
  }
}

TEST(WireFormat, OpenAi) {
  auto call = build_provider_call(ProviderKind::OpenAI, vision_request(), "gpt-4-turbo", "k1");
  EXPECT_EQ(call.path, "/v1/chat/completions");
  EXPECT_EQ(header(call, "Authorization"), "Bearer k1");
  auto body = json::parse(call.body);
  EXPECT_EQ(body["model"], "gpt-4-turbo");
  EXPECT_EQ(body["max_tokens"], 77);
  EXPECT_EQ(body["temperature"], 0.0);
  EXPECT_EQ(body["messages"][0]["role"], "system");
  auto parts = body["messages"][1]["content"];
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[1]["image_url"]["url"], "data:image/png;base64," + base64_encode("PNGBYTES"));

  auto ok = parse_provider_response(
      ProviderKind::OpenAI, 200,
      R"({"choices":[{"message":{"content":"Brand: X"},"finish_reason":"stop"}],"usage":{"prompt_tokens":900,"completion_tokens":40}})",
      default_error_markers());
  EXPECT_EQ(ok.text, "Brand: X");
  EXPECT_EQ(ok.usage, (TokenUsage{900, 40}));

  try {
    parse_provider_response(ProviderKind::OpenAI, 200,
                            R"({"choices":[{"message":{"content":null},"finish_reason":"content_filter"}]})",
                            default_error_markers());
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::SafetyFilter);
  }
}

TEST(WireFormat, Anthropic) {
  auto call = build_provider_call(ProviderKind::Anthropic, vision_request(), "claude-3-opus", "k2");
  EXPECT_EQ(call.path, "/v1/messages");
  EXPECT_EQ(header(call, "x-api-key"), "k2");
  EXPECT_EQ(header(call, "anthropic-version"), "2023-06-01");
  auto body = json::parse(call.body);
  EXPECT_EQ(body["system"], "sys");
  auto content = body["messages"][0]["content"];
  EXPECT_EQ(content[0]["type"], "image");
  EXPECT_EQ(content[0]["source"]["data"], base64_encode("PNGBYTES"));

  auto ok = parse_provider_response(
      ProviderKind::Anthropic, 200,
      R"({"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}],"stop_reason":"end_turn","usage":{"input_tokens":5,"output_tokens":6}})",
      default_error_markers());
  EXPECT_EQ(ok.text, "ab");
  EXPECT_EQ(ok.usage, (TokenUsage{5, 6}));
}

TEST(WireFormat, Gemini) {
  auto call = build_provider_call(ProviderKind::Gemini, vision_request(), "gemini-pro-vision", "k3");
  EXPECT_EQ(call.path, "/v1beta/models/gemini-pro-vision:generateContent");
  EXPECT_EQ(header(call, "x-goog-api-key"), "k3");
  auto body = json::parse(call.body);
  EXPECT_EQ(body["generationConfig"]["maxOutputTokens"], 77);

  auto blocked = R"({"promptFeedback":{"blockReason":"SAFETY"}})";
  try {
    parse_provider_response(ProviderKind::Gemini, 200, blocked, default_error_markers());
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::SafetyFilter);
  }
  auto ok = parse_provider_response(
      ProviderKind::Gemini, 200,
      R"({"candidates":[{"content":{"parts":[{"text":"hi"}]},"finishReason":"STOP"}],"usageMetadata":{"promptTokenCount":3,"candidatesTokenCount":2}})",
      default_error_markers());
  EXPECT_EQ(ok.text, "hi");
  EXPECT_EQ(ok.usage, (TokenUsage{3, 2}));
}

TEST(WireFormat, ErrorStatuses) {
  for (auto kind : {ProviderKind::OpenAI, ProviderKind::Anthropic, ProviderKind::Gemini}) {
    try {
      parse_provider_response(kind, 429, "{}", default_error_markers());
      FAIL();
    } catch (const GatewayError& e) {
      EXPECT_EQ(e.kind(), GatewayErrorKind::RateLimited);
    }
    try {
      parse_provider_response(kind, 200, "{garbage", default_error_markers());
      FAIL();
    } catch (const GatewayError& e) {
      EXPECT_EQ(e.kind(), GatewayErrorKind::Malformed);
    }
  }
}

TEST(HttpTransport, RoundTripAgainstLocalServer) {
  FakeProvider fake;
  std::string seen_auth;
  fake.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    auto body = json::parse(req.body);
    json reply = {{"choices", {{{"message", {{"content", "echo " + body["model"].get<std::string>()}}},
                                {"finish_reason", "stop"}}}},
                  {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 2}}}};
    res.set_content(reply.dump(), "application/json");
  });
  fake.server().Post("/v1/messages", [&](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content(R"({"type":"error","error":{"type":"api_error","message":"Internal server error"}})",
                    "application/json");
  });
  ::setenv("BRANDLENS_API_KEY_LOCALOA", "sk-local", 1);
  ::setenv("BRANDLENS_API_KEY_LOCALAN", "an-local", 1);
  HttpProviderTransport t({ProviderConfig{"localoa", ProviderKind::OpenAI, fake.base_url()},
                           ProviderConfig{"localan", ProviderKind::Anthropic, fake.base_url()}});
  auto req = vision_request();
  req.model_id = "localoa/gpt-test";
  auto c = t.send(req);
  EXPECT_EQ(c.text, "echo gpt-test");
  EXPECT_EQ(c.usage, (TokenUsage{11, 2}));
  EXPECT_EQ(seen_auth, "Bearer sk-local");

  req.model_id = "localan/claude";
  try {
    t.send(req);
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::ServerError);
  }

  req.model_id = "unknown/model";
  EXPECT_THROW(t.send(req), GatewayError);
}

TEST(HttpTransport, ConnectionFailureIsTransport) {
  ::setenv("BRANDLENS_API_KEY_DEADPORT", "k", 1);
  ProviderConfig cfg{"deadport", ProviderKind::OpenAI, "http://127.0.0.1:1"};
  cfg.timeout_seconds = 2;
  HttpProviderTransport t({cfg});
  auto req = vision_request();
  req.model_id = "deadport/m";
  try {
    t.send(req);
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::Transport);
    EXPECT_TRUE(e.retryable());
  }
}

TEST(HttpTransport, MissingKeyNamesVariable) {
  ::unsetenv("BRANDLENS_API_KEY_NOKEY");
  try {
    HttpProviderTransport t({ProviderConfig{"nokey", ProviderKind::Gemini, "http://127.0.0.1:1"}});
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("BRANDLENS_API_KEY_NOKEY"), std::string::npos);
  }
}
