#include "manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include "impactlab/types.hpp"

#ifndef IMPACTLAB_VERSION
#define IMPACTLAB_VERSION "0.0.0"
#endif

namespace impactlab::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << contents;
    out.close();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw DataError("failed writing " + path.string());
    }
  }
  fs::rename(tmp, path);
}

ojson RunManifest::to_json() const {
  auto files = [](const std::vector<fs::path>& paths) {
    ojson arr = ojson::array();
    for (const auto& p : paths) {
      arr.push_back({{"path", p.generic_string()}, {"fnv1a64", file_digest(p)}});
    }
    return arr;
  };
  ojson j;
  j["command"] = command;
  j["args"] = args;
  j["seed"] = seed;
  j["config"] = config;
  j["inputs"] = files(inputs);
  j["outputs"] = files(outputs);
  j["tool_version"] = IMPACTLAB_VERSION;
  j["started"] = started;
  j["finished"] = finished;
  return j;
}

void record_run(const RunManifest& run) {
  std::map<fs::path, std::vector<fs::path>> by_dir;
  for (const auto& out : run.outputs) {
    by_dir[out.has_parent_path() ? out.parent_path() : fs::path(".")].push_back(out);
  }
  const ojson entry = run.to_json();
  for (const auto& [dir, outs] : by_dir) {
    const fs::path path = dir / "manifest.json";
    ojson manifest;
    if (fs::exists(path)) {
      std::ifstream in(path);
      try {
        manifest = ojson::parse(in);
      } catch (const ojson::parse_error&) {
        manifest = ojson();
      }
    }
    if (!manifest.is_object() || manifest.value("format", "") != "impactlab-manifest") {
      manifest = ojson{{"format", "impactlab-manifest"}, {"version", 1}, {"runs", ojson::object()}};
    }
    // keep runs sorted so re-runs reproduce the file regardless of order
    std::map<std::string, ojson> runs;
    for (const auto& [k, v] : manifest["runs"].items()) runs[k] = v;
    runs[run.command + ":" + outs.front().filename().string()] = entry;
    manifest["runs"] = ojson::object();
    for (auto& [k, v] : runs) manifest["runs"][k] = std::move(v);
    write_file_atomic(path, manifest.dump(2) + "\n");
  }
}

}  // namespace impactlab::cli
