#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace imlc::explain {

/// Plain text with `{name}` placeholders. Every placeholder is required.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  PromptTemplate(int scenario_id, std::string text);

  int scenario_id() const noexcept { return scenario_id_; }
  const std::string& text() const noexcept { return text_; }
  const std::vector<std::string>& placeholders() const noexcept { return placeholders_; }

  /// Throws RenderError naming every unfilled placeholder, or when the result
  /// still contains a "[placeholder]" token.
  std::string render(const std::map<std::string, std::string>& values) const;

 private:
  int scenario_id_ = 0;
  std::string text_;
  std::vector<std::string> placeholders_;
};

/// One template per scenario, indexed by scenario id - 1.
struct TemplateSet {
  std::array<PromptTemplate, 3> scenarios;

  const PromptTemplate& for_scenario(int id) const;
};

/// Reads scenario1.txt .. scenario3.txt; a missing file is a ConfigError.
TemplateSet load_templates(const std::filesystem::path& dir);
TemplateSet builtin_templates();

}  // namespace imlc::explain
