#pragma once

// Chat-completions client plus a deterministic offline stub. The stub answers
// the explainer's own prompts by parsing them back, so the whole pipeline runs
// without a network.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace imlc::llm {

enum class Mode { kOnline, kStub };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct LlmConfig {
  std::string endpoint = "https://api.openai.com/v1";  // POST <endpoint>/chat/completions
  std::string model = "gpt-3.5-turbo-0301";
  double temperature = 0.5;
  int max_tokens = 1024;
  double timeout_seconds = 60.0;
  std::string api_key_env = "LLM_API_KEY";
  Mode mode = Mode::kStub;
  int max_retries = 3;
  double backoff_seconds = 1.0;  // doubled after each failed attempt

  /// Throws ConfigError.
  void validate() const;
};

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
  int total_tokens = 0;
};

struct ChatExchange {
  std::string system_prompt;
  std::string user_prompt;
  std::string response;
  Usage usage;
  double latency_seconds = 0.0;
  int attempts = 0;
  std::string request_digest;   // SHA-256 of the request body
  std::string response_digest;  // SHA-256 of the response text
};

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  double timeout_seconds = 60.0;
};

struct HttpResponse {
  int status = 0;  // 0: no response (connection failure)
  std::string body;
};

/// Performs one POST. Throws TimeoutError when the deadline passes.
using Transport = std::function<HttpResponse(const HttpRequest&)>;

/// cpp-httplib transport; every call counts towards sockets_opened().
Transport http_transport();

/// Number of connections attempted by http_transport() in this process.
std::uint64_t sockets_opened() noexcept;

/// {model, temperature, max_tokens, messages:[{role:system}, {role:user}]}.
nlohmann::json request_body(const LlmConfig& cfg, const std::string& system_prompt, const std::string& user_prompt);

/// Deterministic replies for the explainer's prompt kinds.
std::string stub_reply(const std::string& system_prompt, const std::string& user_prompt);

/// Template answer restating scenario, limits and setpoints found in a Q&A context.
std::string stub_answer(const std::string& qa_context);

class Client {
 public:
  /// An empty transport selects http_transport(). A non-empty `exchange_log`
  /// appends one JSON line per exchange.
  explicit Client(LlmConfig cfg, Transport transport = nullptr, std::filesystem::path exchange_log = {});

  const LlmConfig& config() const noexcept { return cfg_; }

  /// Stub mode never touches the transport. Online mode reads the key from
  /// the environment (ConfigError when missing) and retries 429/5xx,
  /// connection failures and timeouts with exponential backoff.
  ChatExchange complete(const std::string& system_prompt, const std::string& user_prompt) const;

  /// One completion over a Q&A context. Throws InvalidInputError when empty.
  std::string answer_question(const std::string& qa_context) const;

  /// Replaces the sleep between retries (tests).
  void set_sleeper(std::function<void(double)> sleeper) { sleep_ = std::move(sleeper); }

 private:
  void log(const ChatExchange& ex) const;

  LlmConfig cfg_;
  Transport transport_;
  std::filesystem::path exchange_log_;
  std::function<void(double)> sleep_;
};

}  // namespace imlc::llm
