#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace hzdrom {

/// Raised when an output file does not match its documented schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Header = std::vector<std::string>;

namespace headers {

/// One row per integrator sample, global time.
Header trace();
/// t, step, z1, z1dot, z2.
Header zero_dynamics();
/// t, step, eta1_1..eta1_4, eta2_1..eta2_4.
Header actuated();
/// One row per completed step.
Header steps();
Header rom_orbit();
Header s2s();
Header disturbance();
Header eigenvalues();
Header sweep();

}  // namespace headers

/// Numeric CSV with a fixed header. Values are written with %.17g so the
/// output is reproducible bit for bit.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, Header header);

  void row(const std::vector<double>& values);
  /// Flushes, closes and validates the file against the header.
  void close();
  const std::filesystem::path& path() const { return path_; }
  const Header& header() const { return header_; }

 private:
  std::filesystem::path path_;
  Header header_;
  std::ofstream out_;
};

/// Checks the header line and that every row has the same number of numeric
/// fields. Returns the number of data rows.
std::size_t validate_csv(const std::filesystem::path& path, const Header& header);

struct CsvTable {
  Header header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
/// Re-reads the file and checks that the listed top-level keys are present.
void validate_json(const std::filesystem::path& path, const std::vector<std::string>& required);

std::string format_double(double v);

}  // namespace hzdrom
