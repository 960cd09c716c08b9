#include "tapelab/csv.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>

namespace tapelab {
namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string_view>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based line of each row
  std::string storage;
};

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

CsvTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidData("cannot open '" + path.string() + "'");
  CsvTable table;
  std::ostringstream buffer;
  buffer << in.rdbuf();
  table.storage = buffer.str();

  std::string_view text(table.storage);
  std::size_t line_no = 0;
  bool have_header = false;
  while (!text.empty()) {
    std::size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    if (!have_header) {
      for (auto field : split(line)) table.header.emplace_back(field);
      have_header = true;
      continue;
    }
    table.rows.push_back(split(line));
    table.line_numbers.push_back(line_no);
    if (table.rows.back().size() != table.header.size())
      throw ParseError("'" + path.string() + "': ragged row with " +
                           std::to_string(table.rows.back().size()) + " fields, header has " +
                           std::to_string(table.header.size()),
                       line_no, 0);
  }
  if (!have_header) throw ParseError("'" + path.string() + "': missing header", 1, 0);
  return table;
}

void expect_header(const CsvTable& table, const std::vector<std::string>& fixed,
                   const std::string& prefix, const std::filesystem::path& path) {
  const auto& h = table.header;
  if (h.size() < fixed.size() + 1)
    throw ParseError("'" + path.string() + "': header too short", 1, 0);
  for (std::size_t i = 0; i < fixed.size(); ++i)
    if (h[i] != fixed[i])
      throw ParseError("'" + path.string() + "': expected column '" + fixed[i] + "', found '" +
                           h[i] + "'",
                       1, i + 1);
  for (std::size_t i = fixed.size(); i < h.size(); ++i) {
    const std::string expected = prefix + std::to_string(i - fixed.size());
    if (h[i] != expected)
      throw ParseError("'" + path.string() + "': expected column '" + expected + "', found '" +
                           h[i] + "'",
                       1, i + 1);
  }
}

double parse_double(std::string_view field, std::size_t row, std::size_t col) {
  double value = 0;
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc{} || ptr != end || field.empty())
    throw ParseError("non-numeric value '" + std::string(field) + "'", row, col);
  return value;
}

std::optional<int> parse_label(std::string_view field, std::size_t row, std::size_t col) {
  if (field.empty()) return std::nullopt;
  int value = 0;
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc{} || ptr != end) throw ParseError("invalid label", row, col);
  return value;
}

Eigen::VectorXd parse_values(const std::vector<std::string_view>& fields, std::size_t first,
                             std::size_t row) {
  Eigen::VectorXd values(static_cast<Index>(fields.size() - first));
  for (std::size_t i = first; i < fields.size(); ++i)
    values(static_cast<Index>(i - first)) = parse_double(fields[i], row, i + 1);
  return values;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidData("cannot write '" + path.string() + "'");
  return out;
}

void write_provenance(std::ostream& out, const std::string& provenance) {
  if (!provenance.empty()) out << "# " << provenance << '\n';
}

void write_values(std::ostream& out, const Eigen::VectorXd& values) {
  for (Index i = 0; i < values.size(); ++i) out << ',' << format_double(values(i));
  out << '\n';
}

void write_indexed_header(std::ostream& out, const std::string& fixed, const std::string& prefix,
                          Index n) {
  out << fixed;
  for (Index i = 0; i < n; ++i) out << ',' << prefix << i;
  out << '\n';
}

Index common_length(const auto& items, const char* what) {
  if (items.empty()) return 0;
  const Index n = items.front().size();
  for (const auto& item : items)
    if (item.size() != n) throw InvalidArgument(std::string(what) + ": records differ in length");
  return n;
}

std::string label_text(const std::optional<int>& label) {
  return label ? std::to_string(*label) : std::string{};
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

ProfileFileKind detect_profile_file(const std::filesystem::path& path) {
  const CsvTable table = read_table(path);
  return table.header.size() > 3 && table.header[3] == "component" ? ProfileFileKind::kMicro
                                                                   : ProfileFileKind::kProfiles;
}

std::vector<RoughnessProfile> load_profiles(const std::filesystem::path& path) {
  const CsvTable table = read_table(path);
  expect_header(table, {"id", "label", "spacing_um"}, "h_", path);
  std::vector<RoughnessProfile> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& f = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    RoughnessProfile p;
    p.id = std::string(f[0]);
    p.label = parse_label(f[1], line, 2);
    p.spacing = parse_double(f[2], line, 3);
    p.heights = parse_values(f, 3, line);
    try {
      p.validate();
    } catch (const InvalidData& e) {
      throw ParseError(e.what(), line, 0);
    }
    out.push_back(std::move(p));
  }
  return out;
}

void save_profiles(std::span<const RoughnessProfile> profiles, const std::filesystem::path& path,
                   const std::string& provenance) {
  const Index n = common_length(profiles, "save_profiles");
  auto out = open_out(path);
  write_provenance(out, provenance);
  write_indexed_header(out, "id,label,spacing_um", "h_", n);
  for (const auto& p : profiles) {
    out << p.id << ',' << label_text(p.label) << ',' << format_double(p.spacing);
    write_values(out, p.heights);
  }
}

std::vector<MicroProfile> load_micro_profiles(const std::filesystem::path& path) {
  const CsvTable table = read_table(path);
  expect_header(table, {"id", "label", "spacing_um", "component"}, "h_", path);
  std::vector<MicroProfile> out;
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& f = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    const std::string id(f[0]);
    const std::string component(f[3]);
    if (component != "micro" && component != "macro")
      throw ParseError("component must be 'micro' or 'macro'", line, 4);
    auto [it, inserted] = index.try_emplace(id, out.size());
    if (inserted) {
      out.emplace_back();
      out.back().id = id;
      out.back().label = parse_label(f[1], line, 2);
      out.back().spacing = parse_double(f[2], line, 3);
    }
    MicroProfile& p = out[it->second];
    Eigen::VectorXd values = parse_values(f, 4, line);
    (component == "micro" ? p.heights : p.macro) = std::move(values);
  }
  for (const auto& p : out) {
    if (p.heights.size() == 0 || p.macro.size() != p.heights.size())
      throw ParseError("'" + path.string() + "': profile '" + p.id +
                           "' needs one micro and one macro row",
                       0, 0);
    p.validate();
  }
  return out;
}

void save_micro_profiles(std::span<const MicroProfile> profiles,
                         const std::filesystem::path& path, const std::string& provenance) {
  const Index n = common_length(profiles, "save_micro_profiles");
  auto out = open_out(path);
  write_provenance(out, provenance);
  write_indexed_header(out, "id,label,spacing_um,component", "h_", n);
  for (const auto& p : profiles) {
    for (const char* component : {"micro", "macro"}) {
      out << p.id << ',' << label_text(p.label) << ',' << format_double(p.spacing) << ','
          << component;
      write_values(out, std::string_view(component) == "micro" ? p.heights : p.macro);
    }
  }
}

std::vector<RoughnessProfile> load_micro_heights(const std::filesystem::path& path,
                                                 double cutoff_um) {
  std::vector<RoughnessProfile> out;
  if (detect_profile_file(path) == ProfileFileKind::kMicro) {
    for (auto& m : load_micro_profiles(path))
      out.push_back(RoughnessProfile{m.id, m.heights, m.spacing, m.label});
    return out;
  }
  auto profiles = load_profiles(path);
  if (cutoff_um <= 0) return profiles;
  out.reserve(profiles.size());
  for (const auto& p : profiles) {
    MicroProfile m = decompose(p, {cutoff_um});
    out.push_back(RoughnessProfile{m.id, m.heights, m.spacing, m.label});
  }
  return out;
}

std::vector<DicCurve> load_dic(const std::filesystem::path& path) {
  const CsvTable table = read_table(path);
  expect_header(table, {"id", "stage", "eps_z_um", "artifact_value"}, "d_", path);
  std::vector<DicCurve> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& f = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    DicCurve c;
    c.id = std::string(f[0]);
    try {
      c.stage = parse_dic_stage(std::string(f[1]));
    } catch (const InvalidData&) {
      throw ParseError("unknown DIC stage '" + std::string(f[1]) + "'", line, 2);
    }
    c.eps_z = parse_double(f[2], line, 3);
    if (!f[3].empty()) c.artifact_value = parse_double(f[3], line, 4);
    c.values = parse_values(f, 4, line);
    out.push_back(std::move(c));
  }
  return out;
}

void save_dic(std::span<const DicCurve> curves, const std::filesystem::path& path,
              const std::string& provenance) {
  const Index n = curves.empty() ? 0 : curves.front().values.size();
  for (const auto& c : curves)
    if (c.values.size() != n) throw InvalidArgument("save_dic: curves differ in length");
  auto out = open_out(path);
  write_provenance(out, provenance);
  write_indexed_header(out, "id,stage,eps_z_um,artifact_value", "d_", n);
  for (const auto& c : curves) {
    out << c.id << ',' << to_string(c.stage) << ',' << format_double(c.eps_z) << ','
        << (c.artifact_value ? format_double(*c.artifact_value) : std::string{});
    write_values(out, c.values);
  }
}

}  // namespace tapelab
