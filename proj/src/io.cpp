#include "hzdrom/io.hpp"

#include <cstdio>
#include <sstream>

namespace hzdrom {

namespace headers {

Header trace() {
  return {"t", "step", "q1", "q2", "q3", "q4", "q5", "qd1", "qd2", "qd3", "qd4", "qd5", "u1", "u2", "u3", "u4"};
}

Header zero_dynamics() { return {"t", "step", "z1", "z1dot", "z2"}; }

Header actuated() {
  return {"t", "step", "eta1_1", "eta1_2", "eta1_3", "eta1_4", "eta2_1", "eta2_2", "eta2_3", "eta2_4"};
}

Header steps() {
  return {"step",        "t_start",     "duration",    "step_length", "commanded_step", "z1_plus",
          "z2_plus",     "z1_minus",    "z2_minus",    "invariance_residual"};
}

Header rom_orbit() { return {"t", "p", "v", "z1", "z2"}; }

Header s2s() { return {"k", "p", "v", "ell", "error"}; }

Header disturbance() { return {"k", "d1", "d2", "norm", "error"}; }

Header eigenvalues() { return {"index", "magnitude"}; }

Header sweep() {
  return {"value",     "completed", "steps",     "mean_velocity", "mean_duration",
          "d_sup",     "gamma",     "alpha",     "h_decay_rate"};
}

}  // namespace headers

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string join(const Header& h) {
  std::string s;
  for (size_t i = 0; i < h.size(); ++i) {
    if (i) s += ',';
    s += h[i];
  }
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::filesystem::path& path) {
  // nan/inf are legitimate entries (e.g. a residual without a manifold).
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw SchemaError(path.string() + ": non-numeric field '" + s + "'");
  }
  if (used != s.size()) throw SchemaError(path.string() + ": non-numeric field '" + s + "'");
  return v;
}

}  // namespace

CsvWriter::CsvWriter(const std::filesystem::path& path, Header header) : path_(path), header_(std::move(header)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  out_.open(path_, std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot open " + path_.string() + " for writing");
  out_ << join(header_) << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != header_.size()) {
    throw SchemaError(path_.string() + ": row has " + std::to_string(values.size()) + " fields, header has " +
                      std::to_string(header_.size()));
  }
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out_ << ',';
    out_ << format_double(values[i]);
  }
  out_ << '\n';
}

void CsvWriter::close() {
  if (!out_.is_open()) return;
  out_.close();
  if (out_.fail()) throw std::runtime_error("error writing " + path_.string());
  validate_csv(path_, header_);
}

std::size_t validate_csv(const std::filesystem::path& path, const Header& header) {
  const CsvTable table = read_csv(path);
  if (table.header != header) {
    throw SchemaError(path.string() + ": header '" + join(table.header) + "' does not match '" + join(header) + "'");
  }
  return table.rows.size();
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot read " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path.string() + ": missing header");
  table.header = split(line);
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto cells = split(line);
    if (cells.size() != table.header.size()) {
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(table.header.size()) + " fields, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_number(c, path));
    table.rows.push_back(std::move(row));
  }
  return table;
}

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  throw SchemaError("no column '" + name + "'");
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  out.close();
  if (out.fail()) throw std::runtime_error("error writing " + path.string());
}

void validate_json(const std::filesystem::path& path, const std::vector<std::string>& required) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot read " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  for (const auto& key : required) {
    if (!doc.contains(key)) throw SchemaError(path.string() + ": missing key '" + key + "'");
  }
}

}  // namespace hzdrom
