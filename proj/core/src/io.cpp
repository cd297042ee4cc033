#include "stochreg/io.hpp"

#include "stochreg/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <unistd.h>

namespace stochreg {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw NumericalError("cannot format double");
  return std::string(buf, p);
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || p != end) throw InputError("not a number: '" + s + "'");
  return v;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  fs::path dir = target.parent_path();
  if (dir.empty()) dir = ".";
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("cannot write " + path + ": directory does not exist");
  const fs::path tmp = dir / ("." + target.filename().string() + ".tmp." + std::to_string(::getpid()) + "." +
                              std::to_string(reinterpret_cast<std::uintptr_t>(&content)));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw IoError("write failed for " + path);
    }
  }
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::string csv_field(const std::string& f) {
  if (f.find_first_of(",\"\n\r") == std::string::npos) return f;
  std::string q = "\"";
  for (char c : f) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

void csv_line(std::string& out, const std::vector<std::string>& fields) {
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k) out += ',';
    out += csv_field(fields[k]);
  }
  out += '\n';
}

}  // namespace

std::string write_csv(const CsvTable& t) {
  std::string out;
  csv_line(out, t.header);
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw InputError("csv row width does not match the header");
    csv_line(out, r);
  }
  return out;
}

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> lines;
  std::vector<std::string> cur;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      cur.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      cur.push_back(std::move(field));
      field.clear();
      lines.push_back(std::move(cur));
      cur.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw InputError("csv: unterminated quoted field");
  if (any || !field.empty()) {
    cur.push_back(std::move(field));
    lines.push_back(std::move(cur));
  }
  if (lines.empty()) throw InputError("csv: empty input");
  CsvTable t;
  t.header = std::move(lines.front());
  for (std::size_t k = 1; k < lines.size(); ++k) {
    if (lines[k].size() != t.header.size())
      throw InputError("csv: row " + std::to_string(k) + " has " + std::to_string(lines[k].size()) +
                       " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(lines[k]));
  }
  return t;
}

json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw InputError("expected a numeric array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw InputError("expected a numeric array");
    v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
  }
  return v;
}

json instance_to_json(const ProblemInstance& inst, const NoisyData* data) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "stochreg.instance";
  j["name"] = inst.name;
  j["n"] = inst.n();
  j["m"] = inst.m();
  j["nu"] = inst.nu;
  j["preconditioned"] = inst.preconditioned;
  json A = json::array();
  const RowMatrix& a = inst.A.matrix();
  for (Eigen::Index k = 0; k < a.size(); ++k) A.push_back(a.data()[k]);
  j["A"] = std::move(A);
  j["x_dag"] = to_json(inst.x_dag);
  j["y_dag"] = to_json(inst.y_dag);
  j["x0"] = to_json(inst.x0);
  if (data) {
    json d;
    d["epsilon"] = data->epsilon;
    d["seed"] = data->seed;
    d["delta"] = data->delta;
    d["delta_bar"] = data->delta_bar;
    d["y_delta"] = to_json(data->y_delta);
    j["data"] = std::move(d);
  }
  return j;
}

InstanceFile instance_from_json(const json& j) {
  try {
    if (!j.is_object()) throw InputError("instance file must hold a JSON object");
    const int ver = j.at("schema_version").get<int>();
    if (ver != kSchemaVersion) throw InputError("unsupported schema_version " + std::to_string(ver));
    const auto n = j.at("n").get<std::size_t>();
    const auto m = j.at("m").get<std::size_t>();
    const Vector flat = vector_from_json(j.at("A"));
    if (static_cast<std::size_t>(flat.size()) != n * m) throw InputError("A has the wrong number of entries");
    RowMatrix A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    std::copy(flat.data(), flat.data() + flat.size(), A.data());
    InstanceFile f;
    f.inst.name = j.at("name").get<std::string>();
    f.inst.A = DesignMatrix(std::move(A));
    f.inst.x_dag = vector_from_json(j.at("x_dag"));
    f.inst.y_dag = vector_from_json(j.at("y_dag"));
    f.inst.x0 = vector_from_json(j.at("x0"));
    f.inst.nu = j.at("nu").get<double>();
    f.inst.preconditioned = j.value("preconditioned", false);
    if (static_cast<std::size_t>(f.inst.x_dag.size()) != m || static_cast<std::size_t>(f.inst.x0.size()) != m ||
        static_cast<std::size_t>(f.inst.y_dag.size()) != n)
      throw InputError("instance vectors do not match n and m");
    if (j.contains("data")) {
      const json& d = j.at("data");
      NoisyData nd;
      nd.epsilon = d.at("epsilon").get<double>();
      nd.seed = d.at("seed").get<std::uint64_t>();
      nd.delta = d.at("delta").get<double>();
      nd.delta_bar = d.value("delta_bar", nd.delta / std::sqrt(static_cast<double>(n)));
      nd.y_delta = vector_from_json(d.at("y_delta"));
      if (static_cast<std::size_t>(nd.y_delta.size()) != n) throw InputError("y_delta does not match n");
      f.data = std::move(nd);
    }
    return f;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed instance file: ") + e.what());
  }
}

void save_instance(const std::string& path, const ProblemInstance& inst, const NoisyData* data) {
  write_file_atomic(path, instance_to_json(inst, data).dump(1) + "\n");
}

InstanceFile load_instance(const std::string& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError("cannot parse " + path + ": " + e.what());
  }
  return instance_from_json(j);
}

json to_json(const SolverConfig& cfg) {
  json j;
  j["method"] = to_string(cfg.method);
  j["c0"] = cfg.c0;
  j["M"] = cfg.M;
  j["max_epochs"] = cfg.max_epochs;
  j["seed"] = cfg.seed;
  j["stream"] = cfg.stream;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["checkpoint_iterations"] = cfg.checkpoint_iterations;
  j["allow_inadmissible_step"] = cfg.allow_inadmissible_step;
  return j;
}

CsvTable trajectory_table(const Trajectory& t) {
  CsvTable tab;
  tab.header = {"epoch", "iteration", "error_sq", "residual_sq"};
  for (const Checkpoint& c : t.checkpoints)
    tab.rows.push_back({format_double(c.epoch), std::to_string(c.iteration), format_double(c.error_sq),
                        format_double(c.residual_sq)});
  return tab;
}

namespace {

std::size_t column(const CsvTable& t, const std::string& name) {
  for (std::size_t k = 0; k < t.header.size(); ++k)
    if (t.header[k] == name) return k;
  throw InputError("csv: missing column '" + name + "'");
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || p != end) throw InputError("not an unsigned integer: '" + s + "'");
  return v;
}

}  // namespace

std::vector<Checkpoint> trajectory_from_table(const CsvTable& t) {
  const std::size_t ce = column(t, "epoch"), ci = column(t, "iteration"), cr = column(t, "error_sq"),
                    cs = column(t, "residual_sq");
  std::vector<Checkpoint> out;
  for (const auto& r : t.rows) {
    Checkpoint c;
    c.epoch = parse_double(r[ce]);
    c.iteration = parse_u64(r[ci]);
    c.error_sq = parse_double(r[cr]);
    c.residual_sq = parse_double(r[cs]);
    out.push_back(std::move(c));
  }
  return out;
}

json trajectory_sidecar(const Trajectory& t, const SolverConfig& cfg, const ProblemInstance& inst,
                        const std::string& instance_path) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "stochreg.trajectory";
  j["config"] = to_json(cfg);
  j["problem"] = {{"name", inst.name},
                  {"n", inst.n()},
                  {"m", inst.m()},
                  {"nu", inst.nu},
                  {"preconditioned", inst.preconditioned},
                  {"instance_path", instance_path}};
  j["k_star"] = t.k_star;
  j["e_at_k_star"] = t.e_at_k_star;
  j["step_admissible"] = t.step_admissible;
  j["checkpoints"] = t.checkpoints.size();
  j["columns"] = {"epoch", "iteration", "error_sq", "residual_sq"};
  return j;
}

CsvTable moment_table(const MomentReport& r) {
  CsvTable tab;
  tab.header = {"epoch",        "iteration", "bias_sq", "variance", "mse", "residual_mse", "mse_standard_error",
                "residual_standard_error", "run_count"};
  for (const MomentRow& m : r.rows)
    tab.rows.push_back({format_double(m.epoch), std::to_string(m.iteration), format_double(m.bias_sq),
                        format_double(m.variance), format_double(m.mse), format_double(m.residual_mse),
                        format_double(m.mse_standard_error), format_double(m.residual_standard_error),
                        std::to_string(m.run_count)});
  return tab;
}

std::vector<MomentRow> moment_rows_from_table(const CsvTable& t) {
  const std::size_t c[] = {column(t, "epoch"),        column(t, "iteration"),          column(t, "bias_sq"),
                           column(t, "variance"),     column(t, "mse"),                column(t, "residual_mse"),
                           column(t, "mse_standard_error"), column(t, "residual_standard_error"),
                           column(t, "run_count")};
  std::vector<MomentRow> out;
  for (const auto& r : t.rows) {
    MomentRow m;
    m.epoch = parse_double(r[c[0]]);
    m.iteration = parse_u64(r[c[1]]);
    m.bias_sq = parse_double(r[c[2]]);
    m.variance = parse_double(r[c[3]]);
    m.mse = parse_double(r[c[4]]);
    m.residual_mse = parse_double(r[c[5]]);
    m.mse_standard_error = parse_double(r[c[6]]);
    m.residual_standard_error = parse_double(r[c[7]]);
    m.run_count = parse_u64(r[c[8]]);
    out.push_back(std::move(m));
  }
  return out;
}

json to_json(const MomentReport& r, bool include_means) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "stochreg.moments";
  j["method"] = r.method;
  j["runs_requested"] = r.runs_requested;
  j["runs_used"] = r.runs_used;
  j["divergent_runs"] = r.divergent_runs;
  j["divergence_messages"] = r.divergence_messages;
  j["base_seed"] = r.base_seed;
  j["kstar_mean"] = r.kstar_mean;
  j["kstar_standard_error"] = r.kstar_standard_error;
  j["e_kstar_mean"] = r.e_kstar_mean;
  j["e_kstar_standard_error"] = r.e_kstar_standard_error;
  j["curve_kstar"] = r.curve_kstar;
  j["curve_e"] = r.curve_e;
  json rows = json::array();
  for (const MomentRow& m : r.rows) {
    json x = {{"epoch", m.epoch},
              {"iteration", m.iteration},
              {"bias_sq", m.bias_sq},
              {"variance", m.variance},
              {"mse", m.mse},
              {"residual_mse", m.residual_mse},
              {"mse_standard_error", m.mse_standard_error},
              {"residual_standard_error", m.residual_standard_error},
              {"run_count", m.run_count}};
    if (include_means) x["mean_iterate"] = to_json(m.mean_iterate);
    rows.push_back(std::move(x));
  }
  j["rows"] = std::move(rows);
  return j;
}

json to_json(const ConditionReport& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "stochreg.conditions";
  j["n"] = r.n;
  j["M"] = r.M;
  j["c0"] = r.c0;
  j["norm_B"] = r.norm_B;
  j["nu"] = r.nu;
  j["c_star"] = r.c_star;
  j["c_B"] = r.c_B;
  j["c_BM"] = r.c_BM;
  j["c_B_prime"] = r.c_B_prime;
  j["c_nu"] = r.c_nu;
  j["c_dstar"] = r.c_dstar;
  j["cond_rate"] = {{"lhs", r.cond_rate_lhs}, {"rhs", r.cond_rate_rhs}, {"holds", r.cond_rate}};
  j["cond_compare"] = json::array();
  for (int k = 0; k < 2; ++k)
    j["cond_compare"].push_back(
        {{"lhs", r.cond_compare_lhs[k]}, {"rhs", r.cond_compare_rhs[k]}, {"holds", r.cond_compare[k]}});
  j["scaled_rate_c"] = r.scaled_rate_c;
  j["scaled_compare_c"] = r.scaled_compare_c;
  return j;
}

}  // namespace stochreg
