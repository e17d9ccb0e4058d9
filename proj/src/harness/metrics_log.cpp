#include "pvfl/harness/metrics_log.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pvfl::harness {
namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(where + ": not a number: '" + s + "'");
  }
}

std::uint64_t to_uint(const std::string& s, const std::string& where) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw std::runtime_error(where + ": not a non-negative integer: '" + s + "'");
  }
  return std::stoull(s);
}

}  // namespace

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string format_row(const MetricsRow& r) {
  std::string sel;
  for (std::size_t i = 0; i < r.selected.size(); ++i) {
    if (i) sel += ';';
    sel += std::to_string(r.selected[i]);
  }
  std::ostringstream os;
  os << r.round << ',' << r.policy << ',' << r.seed << ',' << r.cluster_size << ',' << sel << ','
     << format_number(r.reward) << ',' << format_number(r.val_f1) << ',' << format_number(r.test_acc) << ','
     << (r.td_loss ? format_number(*r.td_loss) : "") << ',' << (r.wall_ms ? format_number(*r.wall_ms) : "");
  return os.str();
}

void write_metrics(std::ostream& out, const MetricsLog& log) {
  out << kMetricsHeader << '\n';
  for (const auto& r : log.rows) out << format_row(r) << '\n';
}

MetricsLog parse_metrics(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(source + ": empty metrics file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader) throw std::runtime_error(source + ": unexpected header '" + line + "'");

  MetricsLog log;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto f = split(line, ',');
    if (f.size() != 10) throw std::runtime_error(where + ": expected 10 fields, got " + std::to_string(f.size()));
    MetricsRow r;
    r.round = to_uint(f[0], where);
    r.policy = f[1];
    r.seed = to_uint(f[2], where);
    r.cluster_size = to_uint(f[3], where);
    if (!f[4].empty()) {
      for (const auto& id : split(f[4], ';')) r.selected.push_back(static_cast<int>(to_uint(id, where)));
    }
    r.reward = to_double(f[5], where);
    r.val_f1 = to_double(f[6], where);
    r.test_acc = to_double(f[7], where);
    if (!f[8].empty()) r.td_loss = to_double(f[8], where);
    if (!f[9].empty()) r.wall_ms = to_double(f[9], where);

    if (log.rows.empty()) {
      log.policy = r.policy;
      log.seed = r.seed;
    } else {
      if (r.policy != log.policy || r.seed != log.seed) throw std::runtime_error(where + ": mixes policies or seeds");
      if (r.round != log.rows.back().round + 1) throw std::runtime_error(where + ": round index is not consecutive");
    }
    log.rows.push_back(std::move(r));
  }
  if (log.rows.empty()) throw std::runtime_error(source + ": no rows");
  return log;
}

MetricsLog read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_metrics(ss.str(), path.string());
}

}  // namespace pvfl::harness
