// imlc: excite -> train -> run -> explain -> ask.
// Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>

#include "imlc/cosim.hpp"
#include "imlc/errors.hpp"
#include "imlc/explainer.hpp"
#include "imlc/llm.hpp"
#include "imlc/surrogate.hpp"
#include "imlc/templates.hpp"
#include "imlc/testbed.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using namespace imlc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;
constexpr double kReferenceSecondsPerInterval = 4.19;

// --config: JSON object whose keys are option names; nested objects address
// subcommands, e.g. {"run": {"days": 7, "dr-prob": 0.3}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(input);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("--config: ") + e.what());
    }
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static void collect(const nlohmann::json& j, std::vector<std::string> parents, std::vector<CLI::ConfigItem>& out) {
    if (!j.is_object()) throw CLI::ConversionError("--config must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto nested = parents;
        nested.push_back(key);
        out.push_back({parents, key, {}});  // enters the subcommand
        collect(value, nested, out);
        continue;
      }
      CLI::ConfigItem item{parents, key, {}};
      if (value.is_boolean()) {
        item.inputs = {value.get<bool>() ? "true" : "false"};
      } else if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      } else {
        item.inputs = {value.is_string() ? value.get<std::string>() : value.dump()};
      }
      out.push_back(std::move(item));
    }
  }
};

testbed::TestbedConfig load_testbed_config(const std::optional<fs::path>& path) {
  testbed::TestbedConfig cfg;
  if (!path) return cfg;
  std::ifstream in(*path);
  if (!in) throw ConfigError("cannot open testbed config " + path->string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path->string(), e.what()));
  }
  // Accept either a bare testbed object or the sidecar written by `excite`.
  if (j.contains("testbed")) j = j.at("testbed");
  cfg = j.get<testbed::TestbedConfig>();
  cfg.validate();
  return cfg;
}

fs::path sidecar_path(const fs::path& csv) {
  fs::path p = csv;
  return p.replace_extension(".config.json");
}

explain::TemplateSet templates_from(const std::optional<fs::path>& dir) {
  return dir ? explain::load_templates(*dir) : explain::builtin_templates();
}

void maybe_manifest(const std::optional<fs::path>& manifest, const tools::ManifestEntry& entry) {
  if (manifest) tools::append_manifest(*manifest, entry);
}

struct LlmFlags {
  std::string mode = "stub";
  std::string endpoint = llm::LlmConfig{}.endpoint;
  std::string model = llm::LlmConfig{}.model;
  double temperature = llm::LlmConfig{}.temperature;
  int max_tokens = llm::LlmConfig{}.max_tokens;
  double timeout = llm::LlmConfig{}.timeout_seconds;
  std::string key_env = llm::LlmConfig{}.api_key_env;
  std::optional<fs::path> exchange_log;

  void attach(CLI::App* app) {
    app->add_option("--llm-mode", mode, "Language-model backend")->check(CLI::IsMember({"stub", "online"}));
    app->add_option("--endpoint", endpoint, "Chat-completions base URL (online mode)");
    app->add_option("--model", model, "Model name sent to the endpoint");
    app->add_option("--temperature", temperature, "Sampling temperature")->check(CLI::Range(0.0, 2.0));
    app->add_option("--max-tokens", max_tokens, "Completion token cap");
    app->add_option("--timeout", timeout, "Request timeout in seconds");
    app->add_option("--api-key-env", key_env, "Environment variable holding the API key");
    app->add_option("--exchange-log", exchange_log, "Append one JSON line per exchange");
  }

  llm::Client client() const {
    llm::LlmConfig cfg;
    cfg.mode = llm::mode_from_string(mode);
    cfg.endpoint = endpoint;
    cfg.model = model;
    cfg.temperature = temperature;
    cfg.max_tokens = max_tokens;
    cfg.timeout_seconds = timeout;
    cfg.api_key_env = key_env;
    if (cfg.mode == llm::Mode::kOnline && !std::getenv(key_env.c_str())) {
      throw ConfigError(fmt::format("online language-model mode needs an API key in ${}", key_env));
    }
    return llm::Client(cfg, nullptr, exchange_log.value_or(fs::path{}));
  }
};

// ---- excite ----------------------------------------------------------------

struct ExciteOpts {
  int days = 31;
  int first_day = 0;
  std::uint64_t seed = 1;
  double initial_temp = 26.0;
  fs::path out = "data.csv";
  std::optional<fs::path> testbed;
};

void cmd_excite(const ExciteOpts& o, const std::optional<fs::path>& manifest) {
  const auto cfg = load_testbed_config(o.testbed);
  const Table data = testbed::run_excitation(o.days, cfg, o.seed, o.first_day, o.initial_temp);
  if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
  data.save_csv(o.out, 6, {"time_hour"});
  const nlohmann::json sidecar = {{"testbed", cfg},       {"days", o.days},
                                  {"first_day", o.first_day}, {"seed", o.seed},
                                  {"initial_zone_temp_c", o.initial_temp}, {"rows", data.rows()}};
  std::ofstream(sidecar_path(o.out)) << sidecar.dump(2) << '\n';
  fmt::print("wrote {} rows to {} (config {})\n", data.rows(), o.out.string(), sidecar_path(o.out).string());
  maybe_manifest(manifest, {"excite", {}, {{"dataset", o.out}, {"config", sidecar_path(o.out)}}, {{"excite", o.seed}}});
}

// ---- train -----------------------------------------------------------------

struct TrainOpts {
  fs::path data;
  std::string target = "fx";
  fs::path out = "model.json";
  surrogate::TrainConfig cfg;
  std::string activation = "relu";
};

void cmd_train(TrainOpts o, const std::optional<fs::path>& manifest) {
  const Table data = Table::load_csv(o.data);
  const auto schema =
      o.target == "fx" ? surrogate::FeatureSchema::zone_temperature() : surrogate::FeatureSchema::cooling_rate();
  o.cfg.activation = surrogate::activation_from_string(o.activation);
  const auto model = surrogate::train(data, schema, o.cfg);
  if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
  model.save(o.out);
  const auto& log = model.log();
  fmt::print("target {} ({}), {} train / {} validation rows, {} epochs\n", o.target, schema.target.name,
             log.train_rows, log.validation_rows, log.epochs);
  fmt::print("final train MSE {:.6g}, validation MSE {:.6g} (RMSE {:.4g} {})\n", log.final_train_mse,
             log.final_validation_mse, std::sqrt(log.final_validation_mse), schema.target.unit);
  fmt::print("wrote {}\n", o.out.string());
  maybe_manifest(manifest, {"train", {{"dataset", o.data}}, {{"model", o.out}}, {{"train", o.cfg.rng_seed}}});
}

// ---- run -------------------------------------------------------------------

struct RunOpts {
  int days = 31;
  int first_day = 31;
  fs::path fx, fy;
  double dr_prob = 0.5;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> calendar_seed;
  double initial_temp = 26.0;
  std::optional<fs::path> testbed;
  fs::path out = "episode.jsonl";
  bool no_timing = false;
};

void print_census(const explain::Census& c) {
  fmt::print("scenario census: precool {}, normal {}, event-no-precool {} (total {})\n", c.precool, c.normal,
             c.event_no_precool, c.total());
}

void cmd_run(const RunOpts& o, const std::optional<fs::path>& manifest) {
  if (o.dr_prob < 0.0 || o.dr_prob > 1.0) throw ConfigError("--dr-prob must lie in [0, 1]");
  const auto tb = load_testbed_config(o.testbed);
  const auto fx = surrogate::SurrogateModel::load(o.fx);
  const auto fy = surrogate::SurrogateModel::load(o.fy);
  const auto models = cosim::ControllerModels::from(fx, fy);
  const std::uint64_t cal_seed = o.calendar_seed.value_or(o.seed);
  const auto calendar = testbed::generate_dr_calendar(o.days, o.dr_prob, cal_seed);

  cosim::EpisodeConfig cfg;
  cfg.n_days = o.days;
  cfg.first_day = o.first_day;
  cfg.initial_zone_temp_c = o.initial_temp;
  cfg.seed = o.seed;
  cfg.calendar_seed = cal_seed;
  cfg.dr_probability = o.dr_prob;
  auto episode = cosim::run_episode(cfg, tb, models, calendar);
  explain::label_episode(episode);
  if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
  cosim::save_episode(episode, o.out, !o.no_timing);

  const auto timing = cosim::timing_report(episode);
  fmt::print("{} control intervals, {} DR events; wrote {}\n", episode.records.size(), calendar.events().size(),
             o.out.string());
  fmt::print("optimization time per control interval: mean {:.4f} s, max {:.4f} s (reference {:.2f} s)\n",
             timing.mean, timing.max, kReferenceSecondsPerInterval);
  print_census(explain::scenario_census(episode));
  maybe_manifest(manifest, {"run",
                            {{"fx", o.fx}, {"fy", o.fy}},
                            {{"episode", o.out}},
                            {{"run", o.seed}, {"calendar", cal_seed}, {"testbed", tb.rng_seed}}});
}

// ---- explain ---------------------------------------------------------------

struct ExplainOpts {
  fs::path episode;
  std::string t = "all";
  std::string mode = "deterministic";
  fs::path out = "docs";
  std::optional<fs::path> templates;
  LlmFlags llm;
};

std::vector<long> select_timestamps(const cosim::Episode& ep, const std::string& t) {
  if (t == "all") {
    std::vector<long> out;
    for (const auto& r : ep.records) out.push_back(r.timestamp);
    return out;
  }
  long value = 0;
  try {
    std::size_t used = 0;
    value = std::stol(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
  } catch (const std::logic_error&) {
    throw ConfigError(fmt::format("--t must be an hour index or 'all', got '{}'", t));
  }
  ep.at(value);  // validates, listing the range on failure
  return {value};
}

void cmd_explain(const ExplainOpts& o, const std::optional<fs::path>& manifest) {
  auto episode = cosim::load_episode(o.episode);
  for (auto& r : episode.records) {
    if (!r.scenario) r.scenario = explain::classify(r);
  }
  const auto templates = templates_from(o.templates);
  const auto dictionary = explain::default_dictionary();
  const auto mode = o.mode == "llm" ? explain::RenderMode::kLlmEnhanced : explain::RenderMode::kDeterministic;

  std::optional<llm::Client> client;
  explain::Completer completer;
  if (mode == explain::RenderMode::kLlmEnhanced) {
    client.emplace(o.llm.client());
    completer = [&](const std::string& s, const std::string& u) { return client->complete(s, u).response; };
  }

  fs::create_directories(o.out);
  std::size_t written = 0, agreed = 0;
  tools::ManifestEntry entry{"explain", {{"episode", o.episode}}, {}, {}};
  for (long t : select_timestamps(episode, o.t)) {
    const auto doc = explain::explain_record(episode.at(t), templates, dictionary, mode, completer);
    std::ofstream(o.out / doc.filename()) << doc.markdown;
    for (const auto& chart : doc.charts) std::ofstream(o.out / chart.filename) << chart.content;
    if (doc.llm_agrees()) ++agreed;
    else fmt::print(stderr, "t={}: language model chose scenario {}, rubric says {}\n", t, *doc.llm_scenario,
                    doc.scenario.id());
    if (written == 0) entry.outputs["first_document"] = o.out / doc.filename();
    ++written;
  }
  fmt::print("wrote {} documents to {} ({} mode)\n", written, o.out.string(), explain::to_string(mode));
  if (mode == explain::RenderMode::kLlmEnhanced) {
    fmt::print("scenario agreement with the rubric: {}/{}\n", agreed, written);
  }
  maybe_manifest(manifest, entry);
}

// ---- ask -------------------------------------------------------------------

struct AskOpts {
  fs::path episode;
  long t = 0;
  std::string question;
  bool repl = false;
  std::optional<fs::path> templates;
  std::size_t token_budget = explain::QaOptions{}.token_budget;
  LlmFlags llm;
};

void cmd_ask(const AskOpts& o) {
  if (!o.repl && o.question.empty()) throw ConfigError("give --question or --repl");
  const auto episode = cosim::load_episode(o.episode);
  episode.at(o.t);
  const auto templates = templates_from(o.templates);
  const auto dictionary = explain::default_dictionary();
  const auto client = o.llm.client();
  auto answer = [&](const std::string& q) {
    const auto context = explain::build_qa_context(episode, o.t, q, templates, dictionary, {o.token_budget});
    fmt::print("{}\n", client.answer_question(context));
  };

  if (!o.question.empty()) answer(o.question);
  if (!o.repl) return;
  std::string line;
  while (true) {
    fmt::print("> ");
    std::fflush(stdout);
    if (!std::getline(std::cin, line)) break;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    answer(line);
  }
  fmt::print("\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpretable machine-learning control: simulate, train, control, explain, ask"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file overriding option defaults");
  std::optional<fs::path> manifest;
  app.add_option("--manifest", manifest, "Append provenance of this command to a run manifest");

  ExciteOpts excite;
  auto* sc_excite = app.add_subcommand("excite", "Random-setpoint excitation dataset");
  sc_excite->add_option("--days", excite.days, "Simulated days")->check(CLI::Range(1, 3650));
  sc_excite->add_option("--first-day", excite.first_day, "First weather day")->check(CLI::NonNegativeNumber);
  sc_excite->add_option("--seed", excite.seed, "Setpoint sequence seed");
  sc_excite->add_option("--initial-temp", excite.initial_temp, "Initial zone temperature °C");
  sc_excite->add_option("--testbed", excite.testbed, "Testbed config JSON")->check(CLI::ExistingFile);
  sc_excite->add_option("--out", excite.out, "Output CSV");

  TrainOpts train;
  auto* sc_train = app.add_subcommand("train", "Fit a surrogate");
  sc_train->add_option("--data", train.data, "Excitation CSV")->required()->check(CLI::ExistingFile);
  sc_train->add_option("--target", train.target, "fx: zone temperature, fy: cooling rate")
      ->check(CLI::IsMember({"fx", "fy"}));
  sc_train->add_option("--epochs", train.cfg.epochs, "Full-batch Adam epochs")->check(CLI::PositiveNumber);
  sc_train->add_option("--hidden", train.cfg.hidden_width, "Hidden width")->check(CLI::PositiveNumber);
  sc_train->add_option("--layers", train.cfg.hidden_layers, "Hidden layers")->check(CLI::PositiveNumber);
  sc_train->add_option("--lr", train.cfg.learning_rate, "Adam learning rate");
  sc_train->add_option("--activation", train.activation, "relu or tanh")->check(CLI::IsMember({"relu", "tanh"}));
  sc_train->add_option("--validation-fraction", train.cfg.validation_fraction, "Held-out tail fraction")
      ->check(CLI::Range(0.01, 0.49));
  sc_train->add_option("--background", train.cfg.background_size, "Shapley background rows");
  sc_train->add_option("--seed", train.cfg.rng_seed, "Initialization seed");
  sc_train->add_option("--out", train.out, "Output model JSON");

  RunOpts run;
  auto* sc_run = app.add_subcommand("run", "Closed-loop episode with attributions");
  sc_run->add_option("--days", run.days, "Episode days")->check(CLI::Range(1, 3650));
  sc_run->add_option("--first-day", run.first_day, "First weather day")->check(CLI::NonNegativeNumber);
  sc_run->add_option("--fx", run.fx, "Zone-temperature model")->required()->check(CLI::ExistingFile);
  sc_run->add_option("--fy", run.fy, "Cooling-rate model")->required()->check(CLI::ExistingFile);
  sc_run->add_option("--dr-prob", run.dr_prob, "Daily DR event probability");
  sc_run->add_option("--seed", run.seed, "Run seed (also the calendar seed unless given)");
  sc_run->add_option("--calendar-seed", run.calendar_seed, "DR calendar seed");
  sc_run->add_option("--initial-temp", run.initial_temp, "Initial zone temperature °C");
  sc_run->add_option("--testbed", run.testbed, "Testbed config JSON")->check(CLI::ExistingFile);
  sc_run->add_option("--out", run.out, "Output episode JSONL");
  sc_run->add_flag("--no-timing", run.no_timing, "Write the canonical form without wall-clock fields");

  ExplainOpts explain_o;
  auto* sc_explain = app.add_subcommand("explain", "Render explanation documents");
  sc_explain->add_option("--episode", explain_o.episode, "Episode JSONL")->required()->check(CLI::ExistingFile);
  sc_explain->add_option("--t", explain_o.t, "Hour index or 'all'");
  sc_explain->add_option("--mode", explain_o.mode, "deterministic or llm")
      ->check(CLI::IsMember({"deterministic", "llm"}));
  sc_explain->add_option("--out", explain_o.out, "Output directory");
  sc_explain->add_option("--templates", explain_o.templates, "Scenario template directory")
      ->check(CLI::ExistingDirectory);
  explain_o.llm.attach(sc_explain);

  AskOpts ask;
  auto* sc_ask = app.add_subcommand("ask", "Question answering over one timestep");
  sc_ask->add_option("--episode", ask.episode, "Episode JSONL")->required()->check(CLI::ExistingFile);
  sc_ask->add_option("--t", ask.t, "Hour index")->required();
  sc_ask->add_option("--question", ask.question, "One-shot question");
  sc_ask->add_flag("--repl", ask.repl, "Read questions from stdin until EOF");
  sc_ask->add_option("--templates", ask.templates, "Scenario template directory")->check(CLI::ExistingDirectory);
  sc_ask->add_option("--token-budget", ask.token_budget, "Approximate context budget in tokens");
  ask.llm.attach(sc_ask);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*sc_excite) cmd_excite(excite, manifest);
    else if (*sc_train) cmd_train(train, manifest);
    else if (*sc_run) cmd_run(run, manifest);
    else if (*sc_explain) cmd_explain(explain_o, manifest);
    else if (*sc_ask) cmd_ask(ask);
    return kExitOk;
  } catch (const ConfigError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const InvalidInputError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const std::out_of_range& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitRuntime;
  }
}
