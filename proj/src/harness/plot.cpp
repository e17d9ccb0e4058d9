#include "pvfl/harness/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pvfl::harness {

Smoothed moving_average(std::span<const double> values, std::size_t window) {
  if (window == 0) throw std::invalid_argument("moving_average: window must be >= 1");
  if (window > values.size()) {
    throw std::invalid_argument("moving_average: window " + std::to_string(window) + " exceeds series length " +
                                std::to_string(values.size()));
  }
  Smoothed out;
  for (std::size_t i = 0; i + window <= values.size(); ++i) {
    double m = 0.0;
    for (std::size_t j = 0; j < window; ++j) m += values[i + j];
    m /= static_cast<double>(window);
    double var = 0.0;
    for (std::size_t j = 0; j < window; ++j) var += (values[i + j] - m) * (values[i + j] - m);
    out.mean.push_back(m);
    out.std.push_back(std::sqrt(var / static_cast<double>(window)));
  }
  return out;
}

namespace {

constexpr const char* kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_plot(std::span<const MetricsLog> logs, std::size_t window, const std::string& title) {
  if (logs.empty()) throw std::invalid_argument("plot: no metrics logs");
  if (window == 0) throw std::invalid_argument("plot: window must be >= 1");

  struct Series {
    std::string name;
    std::vector<double> x;
    Smoothed s;
  };
  std::vector<Series> series;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& log : logs) {
    std::vector<double> acc;
    for (const auto& r : log.rows) acc.push_back(r.test_acc);
    if (window > acc.size()) {
      throw std::invalid_argument("plot: window " + std::to_string(window) + " exceeds the " +
                                  std::to_string(acc.size()) + " rows of " + log.policy + " seed " +
                                  std::to_string(log.seed));
    }
    Series s{log.policy + " (seed " + std::to_string(log.seed) + ")", {}, moving_average(acc, window)};
    for (std::size_t i = 0; i < s.s.mean.size(); ++i) {
      const double x = static_cast<double>(log.rows[i + window - 1].round);
      s.x.push_back(x);
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, s.s.mean[i] - s.s.std[i]);
      ymax = std::max(ymax, s.s.mean[i] + s.s.std[i]);
    }
    series.push_back(std::move(s));
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax - ymin < 1e-9) {
    ymin -= 0.05;
    ymax += 0.05;
  }

  const double W = 720, H = 440, L = 60, R = 20, T = 40, B = 50;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = ymin + (ymax - ymin) * k / 4.0;
    const double xv = xmin + (xmax - xmin) * k / 4.0;
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << yv << "</text>\n";
    os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
       << static_cast<long long>(std::llround(xv)) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">round</text>\n";
  os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
     << (T + H - B) / 2 << ")\">test accuracy</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* colour = kColours[k % std::size(kColours)];
    os << "<polygon fill=\"" << colour << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << px(s.x[i]) << ',' << py(s.s.mean[i] + s.s.std[i]) << ' ';
    for (std::size_t i = s.x.size(); i-- > 0;) os << px(s.x[i]) << ',' << py(s.s.mean[i] - s.s.std[i]) << ' ';
    os << "\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << px(s.x[i]) << ',' << py(s.s.mean[i]) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << L + 10 << "\" y=\"" << T + 14 + 14 * k << "\" font-size=\"11\" fill=\"" << colour << "\">"
       << escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void emit_plot(std::span<const MetricsLog> logs, std::size_t window, const std::filesystem::path& path,
               const std::string& title) {
  const std::string svg = render_plot(logs, window, title);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write plot " + path.string());
  out << svg;
}

}  // namespace pvfl::harness
