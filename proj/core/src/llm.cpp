#include "imlc/llm.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <regex>
#include <thread>

#include "imlc/digest.hpp"
#include "imlc/errors.hpp"
#include "imlc/explainer.hpp"

namespace imlc::llm {

namespace {

std::atomic<std::uint64_t> g_sockets{0};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string scrub(std::string text, const std::string& secret) {
  if (secret.empty()) return text;
  for (std::size_t pos; (pos = text.find(secret)) != std::string::npos;) text.replace(pos, secret.size(), "***");
  return text;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::vector<std::string> split(const std::string& s, const std::string& sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t pos; (pos = s.find(sep, start)) != std::string::npos; start = pos + sep.size()) {
    out.push_back(s.substr(start, pos - start));
  }
  out.push_back(s.substr(start));
  return out;
}

// Text of the line starting with `prefix`, without the prefix.
std::optional<std::string> line_after(const std::string& text, const std::string& prefix) {
  std::size_t pos = text.find(prefix);
  while (pos != std::string::npos && pos != 0 && text[pos - 1] != '\n') pos = text.find(prefix, pos + 1);
  if (pos == std::string::npos) return std::nullopt;
  const std::size_t begin = pos + prefix.size();
  return text.substr(begin, text.find('\n', begin) - begin);
}

// "name value; name value" -> pairs.
std::vector<std::pair<std::string, double>> parse_pairs(const std::string& line) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& item : split(line, ";")) {
    const std::string t = trim(item);
    if (t.empty()) continue;
    const auto sp = t.rfind(' ');
    if (sp == std::string::npos) throw InvalidInputError("malformed value list: " + t);
    out.emplace_back(t.substr(0, sp), std::stod(t.substr(sp + 1)));
  }
  return out;
}

std::string stub_shap(const std::string& user) {
  constexpr const char* kInstruction = "Only introduce the largest 3 impactful features plus the expected value.";
  const auto phis = line_after(user, "Shapley values: ");
  const auto values = line_after(user, "Variable values: ");
  if (!phis || !values) return "The prompt carried no Shapley values to describe.";

  shapley::Attribution a;
  for (const auto& [name, v] : parse_pairs(*phis)) {
    if (name == "expected_value") {
      a.base_value = v;
    } else if (name == "prediction") {
      a.prediction = v;
    } else {
      a.features.push_back({name, 0.0, v});
    }
  }
  const auto vals = parse_pairs(*values);
  for (std::size_t i = 0; i < a.features.size() && i < vals.size(); ++i) a.features[i].value = vals[i].second;

  std::string target = "the prediction";
  if (auto line = line_after(user, kInstruction)) {
    const std::string marker = "impactful to ";
    if (auto p = line->find(marker); p != std::string::npos) target = line->substr(p + marker.size());
  }
  explain::VariableDictionary dict;
  if (auto line = line_after(user, "The variable dictionary is listed as follows: {")) {
    const std::string body = line->substr(0, line->rfind('}'));
    for (const auto& entry : split(body, ", ")) {
      const auto colon = entry.find(": ");
      if (colon != std::string::npos) dict[entry.substr(0, colon)] = entry.substr(colon + 2);
    }
  }
  return explain::narrate_attribution(a, dict, target).text;
}

std::string stub_scenario(const std::string& user) {
  static const std::regex limit(R"(P_limit\(t\+2\) = ([-+0-9.eE]+) W)");
  static const std::regex threshold(R"(P_limit\(threshold\) = ([-+0-9.eE]+) W)");
  static const std::regex u1(R"(T_spt\(t\+1\) = ([-+0-9.eE]+) °C)");
  const auto inputs_at = user.find("Based on the following inputs");
  if (inputs_at == std::string::npos) return "No scenario inputs were given.";
  const std::string inputs = user.substr(inputs_at);
  std::smatch ml, mt, mu;
  if (!std::regex_search(inputs, ml, limit) || !std::regex_search(inputs, mt, threshold) ||
      !std::regex_search(inputs, mu, u1)) {
    return "The scenario inputs could not be read.";
  }
  const auto label = explain::classify_values(std::stod(ml[1]), std::stod(mu[1]), std::stod(mt[1]));
  return fmt::format("Scenario {} ({}): P_limit(t+2) = {} W against P_limit(threshold) = {} W and T_spt(t+1) = {} °C.",
                     label.id(), imlc::to_string(label.scenario), ml[1].str(), mt[1].str(), mu[1].str());
}

std::string table_value(const std::string& context, const std::string& key) {
  auto v = line_after(context, "| " + key + " | ");
  if (!v) return "unknown";
  return trim(v->substr(0, v->find(" |")));
}

}  // namespace

std::string to_string(Mode m) { return m == Mode::kOnline ? "online" : "stub"; }

Mode mode_from_string(const std::string& s) {
  if (s == "online") return Mode::kOnline;
  if (s == "stub") return Mode::kStub;
  throw ConfigError("llm mode must be 'online' or 'stub', got '" + s + "'");
}

void LlmConfig::validate() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw ConfigError("temperature must lie in [0, 2]");
  if (!(timeout_seconds > 0.0)) throw ConfigError("timeout must be positive");
  if (max_tokens <= 0) throw ConfigError("max_tokens must be positive");
  if (max_retries < 0) throw ConfigError("max_retries must be non-negative");
  if (mode == Mode::kOnline && endpoint.empty()) throw ConfigError("online mode needs an endpoint");
}

std::uint64_t sockets_opened() noexcept { return g_sockets.load(); }

Transport http_transport() {
  return [](const HttpRequest& req) -> HttpResponse {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(req.url, m, url_re)) throw ConfigError("unsupported endpoint URL: " + req.url);
    httplib::Client client(m[1].str());
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(req.timeout_seconds));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [k, v] : req.headers) {
      if (k == "Content-Type") content_type = v;
      else headers.emplace(k, v);
    }
    ++g_sockets;
    const auto start = Clock::now();
    auto res = client.Post(m[2].matched ? m[2].str() : "/", headers, req.body, content_type);
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout || seconds_since(start) >= req.timeout_seconds) {
        throw TimeoutError(fmt::format("no response within {} s", req.timeout_seconds));
      }
      return {0, httplib::to_string(err)};
    }
    return {res->status, res->body};
  };
}

nlohmann::json request_body(const LlmConfig& cfg, const std::string& system_prompt, const std::string& user_prompt) {
  return {{"model", cfg.model},
          {"temperature", cfg.temperature},
          {"max_tokens", cfg.max_tokens},
          {"messages",
           nlohmann::json::array({{{"role", "system"}, {"content", system_prompt}},
                                  {{"role", "user"}, {"content", user_prompt}}})}};
}

std::string stub_reply(const std::string& system_prompt, const std::string& user_prompt) {
  (void)system_prompt;
  if (user_prompt.find("Based on the Shapley value and variable values") != std::string::npos) {
    return stub_shap(user_prompt);
  }
  if (user_prompt.find("judge what kind of scenario it is") != std::string::npos) return stub_scenario(user_prompt);
  if (user_prompt.find("# Question") != std::string::npos) return stub_answer(user_prompt);
  return "Stub mode has no canned reply for this prompt.";
}

std::string stub_answer(const std::string& context) {
  if (trim(context).empty()) throw InvalidInputError("Q&A context is empty");
  static const std::regex scenario_re(R"(Scenario: ([123]) \(([a-z-]+)\))");
  std::smatch m;
  const bool have_scenario = std::regex_search(context, m, scenario_re);
  const int id = have_scenario ? m[1].str()[0] - '0' : 0;

  std::string question;
  if (auto p = context.find("# Question"); p != std::string::npos) question = trim(context.substr(p + 10));

  const std::string limit2 = table_value(context, "P_limit(t+2)");
  std::string out = have_scenario ? fmt::format("This timestep is Scenario {} ({}). ", id, m[2].str())
                                  : std::string("The scenario is not stated in the context. ");
  out += fmt::format(
      "The controller chose T_spt(t+1) = {} and T_spt(t+2) = {}, with power limits P_limit(t+1) = {} and "
      "P_limit(t+2) = {}; predicted cooling is P(t+1) = {} and P(t+2) = {}.",
      table_value(context, "T_spt(t+1)"), table_value(context, "T_spt(t+2)"), table_value(context, "P_limit(t+1)"),
      limit2, table_value(context, "Predicted P(t+1)"), table_value(context, "Predicted P(t+2)"));
  if (id == 1) {
    out += fmt::format(
        " Keeping the setpoint at 26 °C instead would skip pre-cooling, so cooling power in the event hour would "
        "likely exceed P_limit(t+2) = {} and incur the quadratic demand response penalty.",
        limit2);
  } else if (id == 3) {
    out += fmt::format(
        " A demand response event limits power to {} in the hour after next; the controller judged pre-cooling "
        "not worth its cost, so any penalty risk is accepted as computed.",
        limit2);
  } else if (id == 2) {
    out += " No demand response event lies within the horizon, so there is no penalty risk and the controller "
           "only minimizes cooling energy.";
  }
  if (!question.empty()) out += fmt::format(" (Question: {})", question);
  return out;
}

Client::Client(LlmConfig cfg, Transport transport, std::filesystem::path exchange_log)
    : cfg_(std::move(cfg)), transport_(std::move(transport)), exchange_log_(std::move(exchange_log)) {
  cfg_.validate();
  sleep_ = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
}

ChatExchange Client::complete(const std::string& system_prompt, const std::string& user_prompt) const {
  ChatExchange ex;
  ex.system_prompt = system_prompt;
  ex.user_prompt = user_prompt;
  const std::string body = request_body(cfg_, system_prompt, user_prompt).dump();
  ex.request_digest = sha256_hex(body);
  const auto start = Clock::now();

  if (cfg_.mode == Mode::kStub) {
    ex.response = stub_reply(system_prompt, user_prompt);
    ex.attempts = 0;
  } else {
    const char* key_env = std::getenv(cfg_.api_key_env.c_str());
    const std::string key = key_env ? key_env : "";
    if (key.empty()) throw ConfigError("online mode needs an API key in $" + cfg_.api_key_env);

    std::string url = cfg_.endpoint;
    while (!url.empty() && url.back() == '/') url.pop_back();
    HttpRequest req{url + "/chat/completions",
                    {{"Authorization", "Bearer " + key}, {"Content-Type", "application/json"}},
                    body,
                    cfg_.timeout_seconds};
    const Transport send = transport_ ? transport_ : http_transport();

    double backoff = cfg_.backoff_seconds;
    HttpResponse res;
    for (int attempt = 0;; ++attempt) {
      ex.attempts = attempt + 1;
      bool timed_out = false;
      std::string timeout_msg;
      try {
        res = send(req);
      } catch (const TimeoutError& e) {
        timed_out = true;
        timeout_msg = scrub(e.what(), key);
      }
      const bool transient = timed_out || res.status == 0 || res.status == 429 || res.status >= 500;
      if (!timed_out && res.status >= 200 && res.status < 300) break;
      if (!transient || attempt >= cfg_.max_retries) {
        if (timed_out) throw TimeoutError(fmt::format("{} after {} attempts", timeout_msg, ex.attempts));
        throw GatewayError(res.status, scrub(fmt::format("chat completion failed with status {} after {} attempts: {}",
                                                         res.status, ex.attempts, res.body.substr(0, 200)),
                                             key));
      }
      sleep_(backoff);
      backoff *= 2.0;
    }

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(res.body);
      ex.response = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw GatewayError(res.status, "malformed chat completion response");
    }
    if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
      ex.usage.prompt_tokens = u->value("prompt_tokens", 0);
      ex.usage.completion_tokens = u->value("completion_tokens", 0);
      ex.usage.total_tokens = u->value("total_tokens", 0);
    }
  }
  ex.latency_seconds = seconds_since(start);
  if (trim(ex.response).empty()) throw GatewayError(200, "empty completion");
  ex.response_digest = sha256_hex(ex.response);
  log(ex);
  return ex;
}

std::string Client::answer_question(const std::string& qa_context) const {
  if (trim(qa_context).empty()) throw InvalidInputError("Q&A context is empty");
  return complete(explain::mpc_formulation_summary(), qa_context).response;
}

void Client::log(const ChatExchange& ex) const {
  if (exchange_log_.empty()) return;
  nlohmann::json line = {{"mode", to_string(cfg_.mode)},
                         {"model", cfg_.model},
                         {"temperature", cfg_.temperature},
                         {"max_tokens", cfg_.max_tokens},
                         {"endpoint", cfg_.mode == Mode::kOnline ? cfg_.endpoint : ""},
                         {"request_sha256", ex.request_digest},
                         {"response_sha256", ex.response_digest},
                         {"attempts", ex.attempts},
                         {"latency_s", ex.latency_seconds},
                         {"usage",
                          {{"prompt_tokens", ex.usage.prompt_tokens},
                           {"completion_tokens", ex.usage.completion_tokens},
                           {"total_tokens", ex.usage.total_tokens}}}};
  std::ofstream out(exchange_log_, std::ios::app);
  if (!out) throw ConfigError("cannot open exchange log " + exchange_log_.string());
  out << line.dump() << '\n';
}

}  // namespace imlc::llm
