#include "shrinkfit/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "shrinkfit/errors.hpp"

namespace shrinkfit {

namespace {
std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}
}  // namespace

std::string fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open '" + path + "' for digest");
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ULL;
    }
    if (got < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << hash;
  return out.str();
}

void RunManifest::add_input(const std::string& path) {
  inputs.emplace_back(path, fnv1a64_file(path));
}

void RunManifest::stamp_start() { started_at = utc_now(); }
void RunManifest::stamp_finish() { finished_at = utc_now(); }

std::string manifest_path_for(const std::string& output_path) {
  return output_path + ".manifest.json";
}

void write_manifest(const std::string& output_path, const RunManifest& manifest) {
  nlohmann::ordered_json j;
  j["command"] = manifest.command;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : manifest.config) cfg[k] = v;
  j["config"] = cfg;
  j["seed"] = manifest.seed;
  j["version"] = manifest.version;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  for (const auto& [path, digest] : manifest.inputs) inputs[path] = digest;
  j["inputs"] = inputs;
  j["started_at"] = manifest.started_at;
  j["finished_at"] = manifest.finished_at;

  std::ofstream out(manifest_path_for(output_path));
  if (!out) throw parse_error("cannot write manifest for '" + output_path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace shrinkfit
