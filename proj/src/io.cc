#include "scissor/io.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <system_error>
#include <thread>

namespace scissor::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool NeedsQuotes(const std::string& s) {
  return s.find_first_of(",\"\n\r") != std::string::npos;
}

// Non-finite doubles are stored as strings because JSON has no literal
// for them.
json Number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

double ReadNumber(const json& j, const char* key) {
  if (!j.contains(key)) throw IoError(std::string("design file: missing '") + key + "'");
  const json& v = j.at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    if (s == "nan") return NAN;
  }
  throw IoError(std::string("design file: '") + key + "' is not a number");
}

std::vector<double> ReadNumbers(const json& j, const char* key) {
  std::vector<double> out;
  if (!j.contains(key)) return out;
  for (const json& v : j.at(key)) {
    if (v.is_number()) {
      out.push_back(v.get<double>());
    } else {
      json wrap = {{"v", v}};
      out.push_back(ReadNumber(wrap, "v"));
    }
  }
  return out;
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ostringstream tag;
  tag << std::this_thread::get_id();
  fs::path tmp = path;
  tmp += ".tmp." + tag.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

uint64_t fnv1a64(std::string_view data) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void Table::AddRow(std::vector<std::string> row) {
  if (row.size() != header.size()) {
    throw IoError("table row has " + std::to_string(row.size()) + " fields, header has " +
                  std::to_string(header.size()));
  }
  rows.push_back(std::move(row));
}

std::string Table::ToCsv() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      if (NeedsQuotes(fields[i])) {
        out += '"';
        for (char c : fields[i]) {
          if (c == '"') out += '"';
          out += c;
        }
        out += '"';
      } else {
        out += fields[i];
      }
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json run_result_to_json(const optimize::RunResult& r, const json& config_echo) {
  json j;
  j["kind"] = r.kind;
  json params;
  params["alphas"] = r.alphas;
  params["l"] = r.l;
  if (r.kind == "morph") {
    params["psi"] = r.psi;
    params["beta0"] = r.beta0;
    params["base"] = {r.base.x, r.base.y};
  } else {
    params["units_per_section"] = r.units_per_section;
    params["psi_max"] = r.psi_max;
    params["psi_min"] = r.psi_min;
    params["n_psi_samples"] = r.n_psi_samples;
  }
  j["params"] = params;
  json raw = json::object();
  for (size_t i = 0; i < r.raw.size() && i < r.names.size(); ++i) raw[r.names[i]] = r.raw[i];
  j["unconstrained"] = raw;
  j["parameter_order"] = r.names;
  j["loss"] = Number(r.loss);
  json trace = json::array();
  for (double v : r.trace) trace.push_back(Number(v));
  j["trace"] = trace;
  j["seed"] = r.seed;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["feasible"] = r.feasible;
  j["cancelled"] = r.cancelled;
  j["message"] = r.message;
  j["config"] = config_echo;
  j["version"] = kToolVersion;
  return j;
}

optimize::RunResult run_result_from_json(const json& j) {
  optimize::RunResult r;
  try {
    r.kind = j.at("kind").get<std::string>();
    if (r.kind != "morph" && r.kind != "write") {
      throw IoError("design file: unknown kind '" + r.kind + "'");
    }
    const json& p = j.at("params");
    r.alphas = ReadNumbers(p, "alphas");
    r.l = ReadNumber(p, "l");
    if (r.kind == "morph") {
      r.psi = ReadNumber(p, "psi");
      r.beta0 = ReadNumber(p, "beta0");
      const std::vector<double> base = ReadNumbers(p, "base");
      if (base.size() != 2) throw IoError("design file: base must have two coordinates");
      r.base = {base[0], base[1]};
    } else {
      r.units_per_section = p.at("units_per_section").get<std::vector<int>>();
      r.psi_max = ReadNumber(p, "psi_max");
      r.psi_min = ReadNumber(p, "psi_min");
      r.n_psi_samples = p.at("n_psi_samples").get<int>();
      if (r.units_per_section.size() != r.alphas.size()) {
        throw IoError("design file: one alpha per section expected");
      }
    }
    if (r.alphas.empty()) throw IoError("design file: no alphas");
    if (j.contains("parameter_order")) {
      r.names = j.at("parameter_order").get<std::vector<std::string>>();
      const json& raw = j.at("unconstrained");
      for (const std::string& n : r.names) r.raw.push_back(ReadNumber(raw, n.c_str()));
    }
    r.loss = ReadNumber(j, "loss");
    r.trace = ReadNumbers(j, "trace");
    r.seed = j.value("seed", uint64_t{0});
    r.iterations = j.value("iterations", 0);
    r.converged = j.value("converged", false);
    r.feasible = j.value("feasible", false);
    r.cancelled = j.value("cancelled", false);
    r.message = j.value("message", std::string());
  } catch (const json::exception& e) {
    throw IoError(std::string("design file: ") + e.what());
  }
  return r;
}

json manifest_to_json(const Manifest& m) {
  json j;
  j["command"] = m.command;
  j["config"] = m.config;
  j["inputs"] = m.input_hashes;
  j["outputs"] = m.output_hashes;
  j["seed"] = m.seed;
  j["version"] = kToolVersion;
  j["started"] = m.started;
  j["finished"] = m.finished;
  return j;
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace scissor::io
