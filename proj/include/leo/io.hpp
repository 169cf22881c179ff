#pragma once

// JSON and CSV persistence. Matrices use {"rows": r, "cols": c, "data": [row-major]}.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "leo/experiments.hpp"

namespace leo::io {

using json = nlohmann::json;

inline json to_json(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline Matrix matrix_from_json(const json& j) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
    throw DomainError("matrix JSON needs rows, cols and data");
  }
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const json& data = j.at("data");
  if (rows < 0 || cols < 0 || !data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw ShapeError("matrix JSON: data length does not match rows x cols");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) {
      const json& v = data.at(static_cast<std::size_t>(i * cols + j2));
      if (!v.is_number()) throw DomainError("matrix JSON: non-numeric entry");
      m(i, j2) = v.get<double>();
    }
  if (!m.allFinite()) throw DomainError("matrix JSON: non-finite entry");
  return m;
}

inline json to_json(const LtiParams& p) { return {{"A", to_json(p.A)}, {"B", to_json(p.B)}, {"C", to_json(p.C)}}; }

inline LtiParams params_from_json(const json& j) {
  LtiParams p{matrix_from_json(j.at("A")), matrix_from_json(j.at("B")), matrix_from_json(j.at("C"))};
  p.validate();
  return p;
}

inline json to_json(const LearnableParams& p) {
  json j = to_json(p.system());
  j["x0"] = to_json(Matrix(p.x0));
  return j;
}

inline json to_json(const ObserverGain& g) {
  json poles = json::array();
  for (const Complex& c : g.desired_poles) poles.push_back({c.real(), c.imag()});
  return {{"L", to_json(g.L)}, {"desired_poles", poles}};
}

inline ObserverGain gain_from_json(const json& j) {
  ObserverGain g;
  g.L = matrix_from_json(j.at("L"));
  for (const json& c : j.at("desired_poles")) g.desired_poles.emplace_back(c.at(0).get<double>(), c.at(1).get<double>());
  return g;
}

/// Designed observer: model parameters and gain side by side.
inline json observer_to_json(const LtiParams& p, const ObserverGain& g) {
  return {{"params", to_json(p)}, {"gain", to_json(g)}};
}

inline json to_json(const EpochLog& e) {
  return {{"epoch", e.epoch},         {"loss_total", e.loss.total}, {"loss_data", e.loss.data_term},
          {"reg_A", e.loss.reg_A},    {"reg_B", e.loss.reg_B},      {"reg_C", e.loss.reg_C},
          {"lr", e.lr},               {"L_refreshed", e.L_refreshed}};
}

/// One JSON object per line.
inline std::string training_log_jsonl(const std::vector<EpochLog>& log) {
  std::string out;
  for (const EpochLog& e : log) out += to_json(e).dump() + "\n";
  return out;
}

inline json to_json(const TrialResult& r) {
  return {{"seed", r.seed},
          {"e_nom_open", r.e_nom_open},
          {"e_enh_open", r.e_enh_open},
          {"e_nom_cl", r.e_nom_cl},
          {"e_enh_cl", r.e_enh_cl},
          {"red_open_pct", r.red_open_pct},
          {"red_cl_pct", r.red_cl_pct},
          {"gain_fallbacks", r.gain_fallbacks},
          {"final_gain_fallback", r.final_gain_fallback},
          {"diverged", r.diverged},
          {"failed", r.failed},
          {"regenerations", r.regenerations},
          {"flags", r.flags()},
          {"message", r.message}};
}

inline json to_json(const McSummary& s) {
  return {{"n", s.dims.n},
          {"p", s.dims.p},
          {"q", s.dims.q},
          {"trials", s.trials},
          {"master_seed", s.master_seed},
          {"ERR_open", s.err_open},
          {"ERR_closed", s.err_closed},
          {"SR_open", s.sr_open},
          {"SR_closed", s.sr_closed},
          {"p_open", s.p_open},
          {"p_closed", s.p_closed},
          {"failures", s.failures}};
}

/// Shortest decimal text that round-trips to the same double.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// RFC 4180 field: quoted only when it contains a separator, quote or line break.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) { row(header); }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) text_ += ',';
      text_ += csv_field(fields[i]);
    }
    text_ += '\n';
  }

  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

inline std::string trials_csv(const std::vector<TrialResult>& trials) {
  CsvWriter csv({"seed", "e_nom_open", "e_enh_open", "e_nom_cl", "e_enh_cl", "red_open_pct", "red_cl_pct", "flags"});
  for (const TrialResult& t : trials) {
    csv.row({std::to_string(t.seed), format_number(t.e_nom_open), format_number(t.e_enh_open),
             format_number(t.e_nom_cl), format_number(t.e_enh_cl), format_number(t.red_open_pct),
             format_number(t.red_cl_pct), t.flags()});
  }
  return csv.str();
}

/// Writes through a sibling temporary file and renames it into place.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + tmp.string() + " for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    if (!f) throw Error("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

}  // namespace leo::io
