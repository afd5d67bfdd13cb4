#pragma once

// Turns timestep records into explanation documents: scenario rubric,
// deterministic Shapley narration, prompt construction for the language-model
// path, Markdown + SVG rendering, and question-answering context.

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "imlc/cosim.hpp"
#include "imlc/scenario.hpp"
#include "imlc/shapley.hpp"
#include "imlc/templates.hpp"

namespace imlc::explain {

inline constexpr double kDefaultThresholdW = 5000.0;

/// Feature name -> plain-language description.
using VariableDictionary = std::map<std::string, std::string>;

/// Descriptions for both surrogate schemas.
VariableDictionary default_dictionary();

/// Scenario 1 iff P_limit(t+2) < threshold and u1 < 26 °C; Scenario 3 iff
/// P_limit(t+2) < threshold and u1 = 26 °C; Scenario 2 otherwise.
ScenarioLabel classify(const cosim::TimestepRecord& record, double threshold_w = kDefaultThresholdW);
ScenarioLabel classify_values(double limit_t2_w, double u1_c, double threshold_w = kDefaultThresholdW);

/// Labels every record in place.
void label_episode(cosim::Episode& episode, double threshold_w = kDefaultThresholdW);

struct Narration {
  std::string text;
  std::vector<std::string> undefined_terms;  // names missing from the dictionary
};

/// Top-3 features by |phi| with sign wording, plus the expected value.
Narration narrate_attribution(const shapley::Attribution& attribution, const VariableDictionary& dictionary,
                              const std::string& target_phrase = "the prediction");

/// Prompt asking a language model to narrate one attribution.
std::string build_shap_prompt(const shapley::Attribution& attribution, const VariableDictionary& dictionary,
                              const std::string& target_phrase = "the prediction");

/// System prompt describing the controller's formulation.
std::string mpc_formulation_summary();

/// Complete prompt asking a language model to pick the scenario of `record`.
std::string build_scenario_prompt(const cosim::TimestepRecord& record, const TemplateSet& templates,
                                  double threshold_w = kDefaultThresholdW);

/// Reads "Scenario N" from a model reply; nullopt when absent.
std::optional<int> parse_scenario_reply(const std::string& reply);

enum class RenderMode { kDeterministic, kLlmEnhanced };
std::string to_string(RenderMode m);

struct SvgFile {
  std::string filename;
  std::string content;

  bool operator==(const SvgFile&) const = default;
};

struct ExplanationDoc {
  long timestamp = 0;
  ScenarioLabel scenario;
  RenderMode mode = RenderMode::kDeterministic;
  std::string markdown;
  std::vector<SvgFile> charts;
  std::vector<std::string> undefined_terms;
  std::optional<int> llm_scenario;  // enhanced mode only

  std::string filename() const;
  /// True when no language-model label was requested, or it matched the rubric.
  bool llm_agrees() const noexcept { return !llm_scenario || *llm_scenario == scenario.id(); }
};

/// The four attribution paragraphs, in cosim::AttributionSlot order.
using Paragraphs = std::array<std::string, 4>;

/// Target phrase for each attribution slot.
const std::string& slot_target(std::size_t slot);

/// Fills the scenario template. Uses the record's stored label, classifying
/// first when it has none.
ExplanationDoc render_document(const cosim::TimestepRecord& record, const TemplateSet& templates, RenderMode mode,
                               const Paragraphs& paragraphs, std::vector<std::string> undefined_terms = {},
                               std::optional<int> llm_scenario = std::nullopt);

/// (system, user) -> reply.
using Completer = std::function<std::string(const std::string& system, const std::string& user)>;

/// Narrates (deterministically or through `completer`) and renders one record.
ExplanationDoc explain_record(const cosim::TimestepRecord& record, const TemplateSet& templates,
                              const VariableDictionary& dictionary, RenderMode mode,
                              const Completer& completer = nullptr);

struct QaOptions {
  std::size_t token_budget = 3000;  // approx. 4 characters per token
};

/// Formulation summary + the timestep's document + the question. Over budget,
/// attribution paragraphs are dropped starting from the last.
std::string build_qa_context(const cosim::Episode& episode, long timestamp, const std::string& question,
                             const TemplateSet& templates, const VariableDictionary& dictionary,
                             const QaOptions& options = {});

struct Census {
  std::size_t precool = 0;
  std::size_t normal = 0;
  std::size_t event_no_precool = 0;

  std::size_t total() const noexcept { return precool + normal + event_no_precool; }
  Census operator+(const Census& o) const noexcept {
    return {precool + o.precool, normal + o.normal, event_no_precool + o.event_no_precool};
  }
  bool operator==(const Census&) const = default;
};

/// Uses stored labels where present, the rubric otherwise.
Census scenario_census(const cosim::Episode& episode, double threshold_w = kDefaultThresholdW);

/// Horizontal bar chart of one attribution.
std::string render_attribution_svg(const shapley::Attribution& attribution, const std::string& title);

}  // namespace imlc::explain
