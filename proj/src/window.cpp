#include "physden/window.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace physden {

SampleWindow::SampleWindow(std::vector<std::string> names_, RowMatrixd values_, double dt_,
                           std::vector<std::string> units_)
    : names(std::move(names_)), units(std::move(units_)), values(std::move(values_)), dt(dt_) {
  if (units.empty()) units.assign(names.size(), "");
  if (static_cast<Index>(names.size()) != values.rows() || units.size() != names.size()) {
    throw DimensionError("sample window: " + std::to_string(names.size()) + " names for " +
                         std::to_string(values.rows()) + " rows");
  }
}

std::optional<Index> SampleWindow::find(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<Index>(i);
  }
  return std::nullopt;
}

Index SampleWindow::index_of(const std::string& name) const {
  if (auto i = find(name)) return *i;
  throw SpecError("window has no channel '" + name + "'");
}

RowMatrixd SampleWindow::select(const std::vector<std::string>& channel_names) const {
  RowMatrixd out(static_cast<Index>(channel_names.size()), length());
  for (std::size_t i = 0; i < channel_names.size(); ++i) out.row(static_cast<Index>(i)) = values.row(index_of(channel_names[i]));
  return out;
}

void SampleWindow::assign(const std::vector<std::string>& channel_names, const RowMatrixd& rows) {
  if (rows.rows() != static_cast<Index>(channel_names.size()) || rows.cols() != length()) {
    throw DimensionError("sample window: assigned block does not match channel list or length");
  }
  for (std::size_t i = 0; i < channel_names.size(); ++i) values.row(index_of(channel_names[i])) = rows.row(static_cast<Index>(i));
}

void SampleWindow::validate() const {
  if (channels() < 1) throw ValidationError("sample window needs at least one channel");
  if (length() < 3) throw ValidationError("sample window needs at least 3 timesteps, got " + std::to_string(length()));
  if (!(dt > 0) || !std::isfinite(dt)) throw ValidationError("sample window dt must be positive");
  if (static_cast<Index>(names.size()) != channels()) throw ValidationError("sample window: channel names do not match rows");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty() || n.find_first_of(", \t\r\n") != std::string::npos) {
      throw ValidationError("sample window: invalid channel name '" + n + "'");
    }
    if (!seen.insert(n).second) throw ValidationError("sample window: duplicate channel name '" + n + "'");
  }
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) {
    while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.pop_back();
    std::size_t start = field.find_first_not_of(' ');
    out.push_back(start == std::string::npos ? std::string() : field.substr(start));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  // strtod rather than stod: stod rejects subnormals as out of range.
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || std::isinf(v)) {
    throw ParseError(path.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
  return v;
}

}  // namespace

void save_csv(const SampleWindow& window, const std::filesystem::path& path) {
  window.validate();
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path.string());
  os << 't';
  for (const auto& n : window.names) os << ',' << n;
  os << '\n';
  for (Index t = 0; t < window.length(); ++t) {
    os << format_double(static_cast<double>(t) * window.dt);
    for (Index c = 0; c < window.channels(); ++c) os << ',' << format_double(window.values(c, t));
    os << '\n';
  }
  if (!os) throw ValidationError("error while writing " + path.string());
}

SampleWindow load_csv(const std::filesystem::path& path, const std::vector<std::string>& schema) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ParseError(path.string() + ": empty file");
  const auto header = split_fields(line);
  if (header.empty() || header.front() != "t") {
    throw ParseError(path.string() + ":1: header must start with 't'");
  }
  std::vector<std::string> names(header.begin() + 1, header.end());
  if (!schema.empty()) {
    std::string missing;
    for (const auto& want : schema) {
      if (std::find(names.begin(), names.end(), want) == names.end()) missing += (missing.empty() ? "" : ", ") + want;
    }
    if (!missing.empty()) throw ParseError(path.string() + ":1: missing channel(s) " + missing);
  }

  std::vector<double> times;
  std::vector<std::vector<double>> columns(names.size());
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                       " fields, got " + std::to_string(fields.size()));
    }
    const double t = parse_number(fields[0], path, lineno);
    if (!times.empty()) {
      const double step = t - times.back();
      if (!(step > 0)) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": time column is not strictly increasing");
      }
      if (times.size() >= 2) {
        const double first = times[1] - times[0];
        if (std::abs(step - first) > 1e-6 * first) {
          throw ParseError(path.string() + ":" + std::to_string(lineno) + ": non-uniform time step " +
                           format_double(step) + " (expected " + format_double(first) + ")");
        }
      }
    }
    times.push_back(t);
    for (std::size_t c = 0; c < names.size(); ++c) columns[c].push_back(parse_number(fields[c + 1], path, lineno));
  }
  if (times.size() < 2) throw ParseError(path.string() + ": need at least two rows to infer dt");

  RowMatrixd values(static_cast<Index>(names.size()), static_cast<Index>(times.size()));
  for (std::size_t c = 0; c < names.size(); ++c) {
    values.row(static_cast<Index>(c)) = Eigen::Map<const Eigen::RowVectorXd>(columns[c].data(), static_cast<Index>(times.size()));
  }
  // Files written by save_csv store t = i * dt exactly; recover that dt bit for bit.
  double dt = times[1] - times[0];
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] != times[0] + static_cast<double>(i) * dt) {
      dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
      break;
    }
  }
  SampleWindow window(std::move(names), std::move(values), dt);
  try {
    window.validate();
  } catch (const ValidationError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return window;
}

}  // namespace physden
