#include "imlc/explainer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <regex>

#include "imlc/errors.hpp"
#include "imlc/mpc.hpp"

namespace imlc::explain {

namespace {

constexpr const char* kShapInstruction =
    "Only introduce the largest 3 impactful features plus the expected value. Also, explain the potential "
    "reason why these features are impactful to ";

// Shortest round-trip text, so a prompt can be parsed back exactly.
std::string exact(double v) { return fmt::format("{}", v); }
std::string one_dp(double v) { return fmt::format("{:.1f}", v); }
std::string two_dp(double v) { return fmt::format("{:.2f}", v); }

std::string describe(const std::string& name, const VariableDictionary& dictionary,
                     std::vector<std::string>& undefined) {
  auto it = dictionary.find(name);
  if (it == dictionary.end()) {
    undefined.push_back(name);
    return name;
  }
  return fmt::format("{} ({})", it->second, name);
}

const std::array<std::string, 4> kSlotTargets = {
    "the predicted zone temperature T_z(t+1)", "the predicted cooling power P(t+1)",
    "the predicted zone temperature T_z(t+2)", "the predicted cooling power P(t+2)"};

const std::array<std::string, 4> kSlotCaptions = {
    "f_x attribution, first hour", "f_y attribution, first hour", "f_x attribution, second hour",
    "f_y attribution, second hour"};

std::string capitalized(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string trim_trailing(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.pop_back();
  return s;
}

std::string svg_name(long t, std::size_t slot) { return fmt::format("ts_{}_attr{}.svg", t, slot + 1); }

std::string dr_outcome(const cosim::TimestepRecord& r, Scenario s) {
  const auto& d = r.decision;
  if (s == Scenario::kPrecool) {
    if (d.v2 == 0.0) {
      return fmt::format(
          "The cooling power in the second hour P(t+2) = {}W is less than P_limit(t+2) = {}W, which avoids "
          "the penalty from the demand response event.",
          one_dp(d.y2), one_dp(r.limit_t2_w));
    }
    return fmt::format(
        "The cooling power in the second hour P(t+2) = {}W still exceeds P_limit(t+2) = {}W; pre-cooling "
        "reduces but does not remove the expected penalty V(t+2) = {}.",
        one_dp(d.y2), one_dp(r.limit_t2_w), one_dp(d.v2));
  }
  if (s == Scenario::kEventNoPrecool) {
    if (d.v2 == 0.0) {
      return fmt::format(
          "Without pre-cooling, the cooling power in the second hour P(t+2) = {}W is already below "
          "P_limit(t+2) = {}W, so no penalty is expected.",
          one_dp(d.y2), one_dp(r.limit_t2_w));
    }
    return fmt::format(
        "The cooling power in the second hour P(t+2) = {}W exceeds P_limit(t+2) = {}W; the controller found "
        "accepting the penalty V(t+2) = {} cheaper than pre-cooling.",
        one_dp(d.y2), one_dp(r.limit_t2_w), one_dp(d.v2));
  }
  return "";
}

std::string data_block(const cosim::TimestepRecord& r) {
  const auto& d = r.decision;
  std::string out = "| Quantity | Value |\n|---|---|\n";
  auto row = [&](const std::string& k, const std::string& v) { out += fmt::format("| {} | {} |\n", k, v); };
  row("Hour index t", std::to_string(r.timestamp));
  row("T_z(t)", one_dp(r.zone_temp_c) + " °C");
  row("Outdoor air temperature", one_dp(r.disturbance.oa_temp_c) + " °C");
  row("Direct solar radiation", one_dp(r.disturbance.oa_radiation_wm2) + " W/m²");
  row("Occupancy", one_dp(r.disturbance.occupancy) + " persons");
  row("Forecast outdoor air temperature (t+1)", one_dp(r.forecast.oa_temp_c) + " °C");
  row("P_limit(t+1)", one_dp(r.limit_t1_w) + " W");
  row("P_limit(t+2)", one_dp(r.limit_t2_w) + " W");
  row("T_spt(t+1)", one_dp(d.u1) + " °C");
  row("T_spt(t+2)", one_dp(d.u2) + " °C");
  row("Predicted T_z(t+1)", one_dp(d.x1) + " °C");
  row("Predicted T_z(t+2)", one_dp(d.x2) + " °C");
  row("Predicted P(t+1)", one_dp(d.y1) + " W");
  row("Predicted P(t+2)", one_dp(d.y2) + " W");
  row("Objective", one_dp(d.cost));
  row("Delivered cooling over [t, t+1)", one_dp(r.cooling_rate_w) + " W");
  return out;
}

std::string decision_sentence(const cosim::TimestepRecord& r) {
  const auto& d = r.decision;
  std::string out = fmt::format(
      "The controller applies T_spt(t+1) = {}°C for the coming hour; T_spt(t+2) = {}°C is re-planned at the next "
      "step. The chosen pair has the lowest objective, {}, of the {} candidates",
      one_dp(d.u1), one_dp(d.u2), one_dp(d.cost), d.candidates.size());
  auto it = std::find_if(d.candidates.begin(), d.candidates.end(), [](const mpc::Candidate& c) {
    return c.u1 == mpc::kSetpointHighC && c.u2 == mpc::kSetpointHighC;
  });
  if (it != d.candidates.end() && !(d.u1 == it->u1 && d.u2 == it->u2)) {
    out += fmt::format("; holding both hours at {}°C would cost {}", one_dp(it->u1), one_dp(it->cost));
  }
  return out + ".";
}

}  // namespace

VariableDictionary default_dictionary() {
  return {{"setpoint_t", "zone temperature setpoint"},
          {"zone_temp_tminus1", "zone air temperature at the start of the hour"},
          {"oa_temp_tminus1", "outdoor air dry-bulb temperature"},
          {"oa_radiation_tminus1", "direct solar radiation rate per area"},
          {"occupancy_tminus1", "occupancy"},
          {"zone_temp_t", "zone air temperature"},
          {"oa_temp_t", "outdoor air dry-bulb temperature"},
          {"oa_radiation_t", "direct solar radiation rate per area"},
          {"occupancy_t", "occupancy"}};
}

ScenarioLabel classify_values(double limit_t2_w, double u1_c, double threshold_w) {
  ScenarioLabel label{Scenario::kNormal, limit_t2_w, threshold_w, u1_c, mpc::kSetpointHighC};
  if (limit_t2_w < threshold_w) {
    label.scenario = u1_c < mpc::kSetpointHighC ? Scenario::kPrecool : Scenario::kEventNoPrecool;
  }
  return label;
}

ScenarioLabel classify(const cosim::TimestepRecord& record, double threshold_w) {
  return classify_values(record.limit_t2_w, record.decision.u1, threshold_w);
}

void label_episode(cosim::Episode& episode, double threshold_w) {
  for (auto& r : episode.records) r.scenario = classify(r, threshold_w);
}

Narration narrate_attribution(const shapley::Attribution& a, const VariableDictionary& dictionary,
                              const std::string& target_phrase) {
  if (a.features.empty()) throw InvalidInputError("attribution has no features");
  Narration n;
  const auto order = shapley::rank_by_magnitude(a);
  const std::size_t k = std::min<std::size_t>(3, order.size());
  const bool all_zero =
      std::all_of(a.features.begin(), a.features.end(), [](const auto& f) { return f.phi == 0.0; });

  std::vector<std::string> names;
  for (std::size_t i = 0; i < k; ++i) names.push_back(describe(a.features[order[i]].name, dictionary, n.undefined_terms));
  std::string list;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i > 0) list += (i + 1 == names.size()) ? (names.size() > 2 ? ", and " : " and ") : ", ";
    list += names[i];
  }

  if (all_zero) {
    n.text = fmt::format(
        "Every Shapley value for {} is zero, so the prediction equals the expected value of {}. In schema "
        "order the leading features are {}.",
        target_phrase, two_dp(a.base_value), list);
    return n;
  }

  n.text = fmt::format("The {} most impactful features on {} are {}.", k == 3 ? "three" : (k == 2 ? "two" : "one"),
                       target_phrase, list);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& f = a.features[order[i]];
    const char* direction = f.phi > 0.0   ? "which pushes the prediction up"
                            : f.phi < 0.0 ? "which pushes the prediction down"
                                          : "which leaves the prediction unchanged";
    n.text += fmt::format(" {} has value {} and a Shapley value of {}, {}.", capitalized(names[i]), two_dp(f.value),
                          two_dp(f.phi), direction);
  }
  n.text += fmt::format(" The expected value is {}, and the features together move the prediction to {}.",
                        two_dp(a.base_value), two_dp(a.prediction));
  return n;
}

std::string build_shap_prompt(const shapley::Attribution& a, const VariableDictionary& dictionary,
                              const std::string& target_phrase) {
  std::string phis, values, dict;
  for (const auto& f : a.features) {
    phis += fmt::format("{} {}; ", f.name, exact(f.phi));
    values += fmt::format("{}{} {}", values.empty() ? "" : "; ", f.name, exact(f.value));
    if (auto it = dictionary.find(f.name); it != dictionary.end()) {
      dict += fmt::format("{}{}: {}", dict.empty() ? "" : ", ", f.name, it->second);
    }
  }
  std::string out = "Based on the Shapley value and variable values, please help me generate a descriptive paragraph:\n\n";
  out += fmt::format("Shapley values: {}expected_value {}; prediction {}\n\n", phis, exact(a.base_value),
                     exact(a.prediction));
  out += fmt::format("Variable values: {}\n\n", values);
  out += fmt::format("{}{}\n", kShapInstruction, target_phrase);
  if (!dict.empty()) out += fmt::format("\nThe variable dictionary is listed as follows: {{{}}}\n", dict);
  return out;
}

std::string mpc_formulation_summary() {
  return fmt::format(
      "You explain the decisions of a model predictive controller (MPC) that sets the cooling setpoint of one "
      "building zone every hour.\n"
      "Decision variables: setpoints T_spt(t+1) = u1 and T_spt(t+2) = u2, each on a {} K grid from {}°C to {}°C "
      "({} candidate pairs, all evaluated).\n"
      "Models: x(t+1) = f_x(u(t+1), x(t), d(t)) predicts the zone temperature after one hour; "
      "y(t+1) = f_y(u(t+1), x(t), d(t)) predicts the cooling power over that hour. Both are neural networks "
      "trained on randomly excited data; d(t) holds outdoor air temperature, direct solar radiation and occupancy.\n"
      "Objective: minimize P(t+1) + V(t+1) + P(t+2) + V(t+2), where V = (P - P_limit)^2 when P exceeds the power "
      "limit and 0 otherwise.\n"
      "Demand response: a limit below P_limit(threshold) = {}W marks an event hour; otherwise the limit is {}W.\n"
      "Only u1 is applied; the problem is solved again the next hour.\n"
      "Scenarios: 1 = event expected at t+2 and the zone is pre-cooled (u1 below {}°C); 2 = no event within the "
      "horizon; 3 = event expected at t+2 but no pre-cooling (u1 = {}°C).",
      mpc::kGridStepK, mpc::kSetpointLowC, mpc::kSetpointHighC, 25, kDefaultThresholdW, testbed::kNormalPowerLimitW,
      mpc::kSetpointHighC, mpc::kSetpointHighC);
}

std::string build_scenario_prompt(const cosim::TimestepRecord& r, const TemplateSet& templates, double threshold_w) {
  std::string out =
      "The template defines three scenarios: 1) predicted demand response event and pre-cool the building, 2) no "
      "demand response event and keep the building operating normally, 3) predicted demand response event, but "
      "the building is not pre-cooled.\n\n";
  const std::array<std::string, 3> criteria = {
      "P_limit(t+2) < P_limit(threshold) and T_spt(t+1) < 26°C", "P_limit(t+2) >= P_limit(threshold)",
      "P_limit(t+2) < P_limit(threshold) and T_spt(t+1) = 26°C"};
  for (int id = 1; id <= 3; ++id) {
    out += fmt::format("Scenario {}: The criteria of Scenario {} is {}. Generate a paragraph like the following: \"{}\"\n\n",
                       id, id, criteria[id - 1], templates.for_scenario(id).text());
  }
  const auto& d = r.decision;
  out += "Based on the following inputs, judge what kind of scenario it is, and then generate the corresponding "
         "paragraph:\n";
  out += fmt::format(
      "P_limit(t+1) = {} W; P_limit(t+2) = {} W; P_limit(threshold) = {} W; T_z(t) = {} °C; T_spt(t+1) = {} °C; "
      "T_spt(t+2) = {} °C; T_z(t+1) = {} °C; T_z(t+2) = {} °C; P(t+1) = {} W; P(t+2) = {} W\n",
      exact(r.limit_t1_w), exact(r.limit_t2_w), exact(threshold_w), exact(r.zone_temp_c), exact(d.u1), exact(d.u2),
      exact(d.x1), exact(d.x2), exact(d.y1), exact(d.y2));
  out += "Start the reply with \"Scenario N\".\n";
  return out;
}

std::optional<int> parse_scenario_reply(const std::string& reply) {
  static const std::regex re(R"(Scenario\s*([123])\b)");
  std::smatch m;
  if (std::regex_search(reply, m, re)) return m[1].str()[0] - '0';
  return std::nullopt;
}

std::string to_string(RenderMode m) { return m == RenderMode::kDeterministic ? "deterministic" : "llm-enhanced"; }

std::string ExplanationDoc::filename() const { return fmt::format("ts_{}.md", timestamp); }

const std::string& slot_target(std::size_t slot) { return kSlotTargets.at(slot); }

ExplanationDoc render_document(const cosim::TimestepRecord& r, const TemplateSet& templates, RenderMode mode,
                               const Paragraphs& paragraphs, std::vector<std::string> undefined_terms,
                               std::optional<int> llm_scenario) {
  ExplanationDoc doc;
  doc.timestamp = r.timestamp;
  doc.scenario = r.scenario ? *r.scenario : classify(r);
  doc.mode = mode;
  doc.llm_scenario = llm_scenario;
  std::sort(undefined_terms.begin(), undefined_terms.end());
  undefined_terms.erase(std::unique(undefined_terms.begin(), undefined_terms.end()), undefined_terms.end());
  doc.undefined_terms = std::move(undefined_terms);

  const auto& d = r.decision;
  std::map<std::string, std::string> values = {
      {"p_limit_t1", one_dp(r.limit_t1_w)},  {"p_limit_t2", one_dp(r.limit_t2_w)},
      {"p_threshold", one_dp(doc.scenario.threshold_w)}, {"t_spt_max", one_dp(doc.scenario.ceiling_c)},
      {"t_spt_t1", one_dp(d.u1)},            {"t_spt_t2", one_dp(d.u2)},
      {"t_z_t", one_dp(r.zone_temp_c)},      {"t_z_t1", one_dp(d.x1)},
      {"t_z_t2", one_dp(d.x2)},              {"p_t1", one_dp(d.y1)},
      {"p_t2", one_dp(d.y2)},                {"dr_outcome", dr_outcome(r, doc.scenario.scenario)},
      {"shap_para_fx1", paragraphs[0]},      {"shap_para_fy1", paragraphs[1]},
      {"shap_para_fx2", paragraphs[2]},      {"shap_para_fy2", paragraphs[3]}};
  for (std::size_t k = 0; k < 4; ++k) {
    const std::string file = svg_name(r.timestamp, k);
    values[fmt::format("fig_ref_{}", k + 1)] = fmt::format("![Figure {}: {}]({})", k + 1, kSlotCaptions[k], file);
    doc.charts.push_back({file, render_attribution_svg(r.attributions[k], kSlotCaptions[k])});
  }
  const std::string body = trim_trailing(templates.for_scenario(doc.scenario.id()).render(values));

  std::string md = fmt::format("# Timestep {}\n\n## Data\n\n{}\n## Scenario and rationale\n\n{}\n\n## Decision\n\n{}\n\n",
                               r.timestamp, data_block(r), body, decision_sentence(r));
  md += "---\n\n";
  md += fmt::format("Scenario: {} ({}), by the deterministic rubric.  \n", doc.scenario.id(),
                    imlc::to_string(doc.scenario.scenario));
  md += fmt::format("Rendering mode: {}.  \n", to_string(mode));
  if (llm_scenario) {
    md += fmt::format("Language-model scenario: {} ({}).  \n", *llm_scenario,
                      doc.llm_agrees() ? "agrees with the rubric" : "disagrees; the rubric label is kept");
  }
  if (!doc.undefined_terms.empty()) {
    md += fmt::format("Terms missing from the variable dictionary: {}.  \n", fmt::join(doc.undefined_terms, ", "));
  }
  doc.markdown = std::move(md);
  return doc;
}

ExplanationDoc explain_record(const cosim::TimestepRecord& r, const TemplateSet& templates,
                              const VariableDictionary& dictionary, RenderMode mode, const Completer& completer) {
  if (mode == RenderMode::kLlmEnhanced && !completer) throw ConfigError("llm-enhanced rendering needs a completer");
  Paragraphs paragraphs;
  std::vector<std::string> undefined;
  std::optional<int> llm_scenario;
  const std::string system = mpc_formulation_summary();
  for (std::size_t k = 0; k < 4; ++k) {
    auto n = narrate_attribution(r.attributions[k], dictionary, kSlotTargets[k]);
    undefined.insert(undefined.end(), n.undefined_terms.begin(), n.undefined_terms.end());
    if (mode == RenderMode::kLlmEnhanced) {
      paragraphs[k] = completer(system, build_shap_prompt(r.attributions[k], dictionary, kSlotTargets[k]));
    } else {
      paragraphs[k] = std::move(n.text);
    }
  }
  if (mode == RenderMode::kLlmEnhanced) {
    llm_scenario = parse_scenario_reply(completer(system, build_scenario_prompt(r, templates)));
    if (!llm_scenario) llm_scenario = 0;  // unparseable reply counts as disagreement
  }
  return render_document(r, templates, mode, paragraphs, std::move(undefined), llm_scenario);
}

std::string build_qa_context(const cosim::Episode& episode, long timestamp, const std::string& question,
                             const TemplateSet& templates, const VariableDictionary& dictionary,
                             const QaOptions& options) {
  if (question.find_first_not_of(" \t\r\n") == std::string::npos) throw InvalidInputError("question is empty");
  const auto& r = episode.at(timestamp);
  Paragraphs paragraphs;
  for (std::size_t k = 0; k < 4; ++k) paragraphs[k] = narrate_attribution(r.attributions[k], dictionary, kSlotTargets[k]).text;

  auto assemble = [&] {
    const auto doc = render_document(r, templates, RenderMode::kDeterministic, paragraphs);
    return fmt::format("{}\n\n# Explanation document\n\n{}\n# Question\n\n{}\n", mpc_formulation_summary(),
                       doc.markdown, question);
  };
  std::string context = assemble();
  const std::size_t budget_chars = options.token_budget * 4;
  for (std::size_t k = 4; k-- > 0 && context.size() > budget_chars;) {
    paragraphs[k] = "(Attribution paragraph omitted for length.)";
    context = assemble();
  }
  return context;
}

Census scenario_census(const cosim::Episode& episode, double threshold_w) {
  Census c;
  for (const auto& r : episode.records) {
    switch ((r.scenario ? *r.scenario : classify(r, threshold_w)).scenario) {
      case Scenario::kPrecool: ++c.precool; break;
      case Scenario::kNormal: ++c.normal; break;
      case Scenario::kEventNoPrecool: ++c.event_no_precool; break;
    }
  }
  return c;
}

}  // namespace imlc::explain
