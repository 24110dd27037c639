#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "impactlab/dataforge.hpp"
#include "impactlab/dynamics.hpp"
#include "text_format.hpp"

namespace impactlab {

namespace {

constexpr std::array<const char*, 14> kFields = {
    "trial_id", "m",  "I",      "rx",     "ry",    "qx",      "qy",
    "qth",      "vx_pre", "vy_pre", "w_pre", "vx_post", "vy_post", "w_post"};

std::array<double, 13> row_values(const ImpactTrial& t) {
  return {t.body.mass,   t.body.inertia, t.contact.r.x(), t.contact.r.y(), t.pre.q.x(),
          t.pre.q.y(),   t.pre.q.z(),    t.pre.v.x(),     t.pre.v.y(),     t.pre.v.z(),
          t.post.v.x(),  t.post.v.y(),   t.post.v.z()};
}

// Builds a trial from the 13 numeric fields; hard errors throw DataError,
// invariant violations set `flagged` and return a reason.
ImpactTrial make_trial(std::uint64_t id, const std::array<double, 13>& f, const std::string& where,
                       std::string& reason) {
  ImpactTrial t;
  t.id = id;
  t.body.mass = f[0];
  t.body.inertia = f[1];
  if (!(t.body.mass > 0.0 && std::isfinite(t.body.mass)) ||
      !(t.body.inertia > 0.0 && std::isfinite(t.body.inertia))) {
    throw DataError(where + ": mass and inertia must be positive and finite");
  }
  t.contact.r = Vec2(f[2], f[3]);
  t.pre.q = Vec3(f[4], f[5], f[6]);
  t.pre.v = Vec3(f[7], f[8], f[9]);
  t.post.q = t.pre.q;
  t.post.v = Vec3(f[10], f[11], f[12]);

  bool finite = true;
  for (double x : f) finite = finite && std::isfinite(x);
  if (!finite) {
    reason = "non-finite field";
  } else if (t.contact.r.norm() == 0.0) {
    reason = "zero contact offset";
  } else {
    const double vn = contact_velocity(t.contact, t.pre.v).y();
    if (!(vn < 0.0)) reason = "contact point not approaching (v_cn_pre = " + format_double(vn) + ")";
  }
  t.flagged = !reason.empty();
  return t;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::uint64_t parse_id(const std::string& text, const std::string& where) {
  std::uint64_t id = 0;
  std::string_view s = text;
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), id);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError(where + ": trial_id '" + text + "' is not a non-negative integer");
  }
  return id;
}

}  // namespace

void write_dataset_csv(std::ostream& out, const Dataset& dataset) {
  out << kCsvHeader << '\n';
  for (const ImpactTrial& t : dataset) {
    out << t.id;
    for (double x : row_values(t)) out << ',' << format_double(x);
    out << '\n';
  }
}

LoadResult read_dataset_csv(std::istream& in) {
  LoadResult out;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError("line 1: missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (line != kCsvHeader) {
    throw DataError("line 1: header mismatch; expected '" + std::string(kCsvHeader) + "'");
  }
  std::set<std::uint64_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    const auto fields = split_csv(line);
    if (fields.size() != kFields.size()) {
      throw DataError(where + ": expected " + std::to_string(kFields.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    const std::uint64_t id = parse_id(fields[0], where);
    if (!seen.insert(id).second) throw DataError(where + ": duplicate trial_id " + std::to_string(id));
    std::array<double, 13> values{};
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (!parse_double(fields[k + 1], values[k])) {
        throw DataError(where + ": field '" + kFields[k + 1] + "' is not a number: '" + fields[k + 1] + "'");
      }
    }
    std::string reason;
    out.trials.push_back(make_trial(id, values, where, reason));
    if (!reason.empty()) {
      out.warnings.push_back(where + ": trial " + std::to_string(id) + " flagged: " + reason);
    }
  }
  return out;
}

void write_dataset_json(std::ostream& out, const Dataset& dataset) {
  nlohmann::ordered_json j;
  j["format"] = "impactlab-dataset";
  j["version"] = 1;
  auto rows = nlohmann::ordered_json::array();
  for (const ImpactTrial& t : dataset) {
    nlohmann::ordered_json r;
    r["trial_id"] = t.id;
    const auto v = row_values(t);
    for (std::size_t k = 0; k < v.size(); ++k) r[kFields[k + 1]] = v[k];
    rows.push_back(r);
  }
  j["trials"] = rows;
  out << j.dump(1) << '\n';
}

LoadResult read_dataset_json(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("malformed dataset JSON: ") + e.what());
  }
  LoadResult out;
  try {
    if (j.at("format") != "impactlab-dataset") throw DataError("not an impactlab dataset");
    if (j.at("version") != 1) throw DataError("unsupported dataset version");
    std::set<std::uint64_t> seen;
    std::size_t index = 0;
    for (const auto& r : j.at("trials")) {
      const std::string where = "trial index " + std::to_string(index++);
      if (r.size() != kFields.size()) {
        throw DataError(where + ": expected exactly the fields " + std::string(kCsvHeader));
      }
      const auto id = r.at("trial_id").get<std::uint64_t>();
      if (!seen.insert(id).second) throw DataError(where + ": duplicate trial_id " + std::to_string(id));
      std::array<double, 13> values{};
      for (std::size_t k = 0; k < values.size(); ++k) values[k] = r.at(kFields[k + 1]).get<double>();
      std::string reason;
      out.trials.push_back(make_trial(id, values, where, reason));
      if (!reason.empty()) {
        out.warnings.push_back(where + ": trial " + std::to_string(id) + " flagged: " + reason);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed dataset JSON: ") + e.what());
  }
  return out;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  if (path.extension() == ".json") {
    write_dataset_json(out, dataset);
  } else {
    write_dataset_csv(out, dataset);
  }
  if (!out) throw DataError("failed writing " + path.string());
}

LoadResult load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return path.extension() == ".json" ? read_dataset_json(in) : read_dataset_csv(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace impactlab
