#include "manifest.hpp"

#include <chrono>
#include <fstream>
#include <nlohmann/json.hpp>

#include "imlc/errors.hpp"

namespace imlc::tools {

namespace {

std::string iso8601(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json describe_files(const std::map<std::string, std::filesystem::path>& files) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [role, path] : files) {
    std::error_code ec;
    const auto mtime = std::filesystem::last_write_time(path, ec);
    if (ec) throw ConfigError("manifest references a missing file: " + path.string());
    const auto sys = std::chrono::file_clock::to_sys(mtime);
    out[role] = {{"path", std::filesystem::absolute(path).lexically_normal().string()},
                 {"modified_utc", iso8601(sys)}};
  }
  return out;
}

}  // namespace

void append_manifest(const std::filesystem::path& path, const ManifestEntry& entry) {
  nlohmann::json manifest = {{"version", 1}, {"runs", nlohmann::json::array()}};
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    try {
      manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DeserializationError("manifest", std::string("unreadable manifest: ") + e.what());
    }
  }
  manifest["runs"].push_back({{"command", entry.command},
                              {"created_utc", iso8601(std::chrono::system_clock::now())},
                              {"inputs", describe_files(entry.inputs)},
                              {"outputs", describe_files(entry.outputs)},
                              {"seeds", entry.seeds}});
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write manifest " + path.string());
  out << manifest.dump(2) << '\n';
}

}  // namespace imlc::tools
