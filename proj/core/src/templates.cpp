#include "imlc/templates.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "builtin_templates.inc"
#include "imlc/errors.hpp"

namespace imlc::explain {

namespace {

bool is_name_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Yields (begin, end, name) for every {name} token.
template <class F>
void scan(const std::string& text, F&& on_token) {
  std::size_t pos = 0;
  while ((pos = text.find('{', pos)) != std::string::npos) {
    std::size_t end = pos + 1;
    while (end < text.size() && is_name_char(text[end])) ++end;
    if (end < text.size() && text[end] == '}' && end > pos + 1) {
      on_token(pos, end + 1, text.substr(pos + 1, end - pos - 1));
      pos = end + 1;
    } else {
      ++pos;
    }
  }
}

}  // namespace

PromptTemplate::PromptTemplate(int scenario_id, std::string text)
    : scenario_id_(scenario_id), text_(std::move(text)) {
  scan(text_, [&](std::size_t, std::size_t, const std::string& name) {
    if (std::find(placeholders_.begin(), placeholders_.end(), name) == placeholders_.end()) {
      placeholders_.push_back(name);
    }
  });
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  std::vector<std::string> missing;
  for (const auto& name : placeholders_) {
    if (!values.contains(name)) missing.push_back(name);
  }
  if (!missing.empty()) {
    throw RenderError(fmt::format("scenario {} template: unfilled placeholders: {}", scenario_id_,
                                  fmt::join(missing, ", ")));
  }
  std::string out;
  out.reserve(text_.size() * 2);
  std::size_t last = 0;
  scan(text_, [&](std::size_t begin, std::size_t end, const std::string& name) {
    out.append(text_, last, begin - last);
    out += values.at(name);
    last = end;
  });
  out.append(text_, last, std::string::npos);
  if (out.find("[placeholder]") != std::string::npos) {
    throw RenderError(fmt::format("scenario {} template: rendered text still contains [placeholder]", scenario_id_));
  }
  return out;
}

const PromptTemplate& TemplateSet::for_scenario(int id) const {
  if (id < 1 || id > 3) throw RenderError(fmt::format("no template for scenario {}", id));
  return scenarios[static_cast<std::size_t>(id - 1)];
}

TemplateSet load_templates(const std::filesystem::path& dir) {
  TemplateSet set;
  for (int id = 1; id <= 3; ++id) {
    const auto path = dir / fmt::format("scenario{}.txt", id);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("missing template file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    set.scenarios[static_cast<std::size_t>(id - 1)] = PromptTemplate(id, ss.str());
  }
  return set;
}

TemplateSet builtin_templates() {
  TemplateSet set;
  set.scenarios[0] = PromptTemplate(1, kBuiltinScenario1);
  set.scenarios[1] = PromptTemplate(2, kBuiltinScenario2);
  set.scenarios[2] = PromptTemplate(3, kBuiltinScenario3);
  return set;
}

}  // namespace imlc::explain
