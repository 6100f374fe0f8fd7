#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "matchbound/errors.hpp"
#include "matchbound/format.hpp"
#include "matchbound_cli/cli.hpp"

namespace matchbound::cli {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 50.0;

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Scale {
  double lo;
  double hi;
  double from;
  double to;
  double operator()(double v) const { return hi == lo ? (from + to) / 2.0 : from + (v - lo) / (hi - lo) * (to - from); }
};

}  // namespace

std::string render_sweep_svg(const SweepResult& sweep) {
  if (sweep.points.empty()) throw PreconditionError("cannot plot an empty sweep");

  struct Series {
    std::vector<std::pair<double, double>> points;
  } upper, lower;
  double ymin = std::min(0.0, sweep.baseline.estimate);
  double ymax = std::max(0.0, sweep.baseline.estimate);
  for (const auto& p : sweep.points) {
    if (p.bounds.upper.estimate) {
      upper.points.emplace_back(p.epsilon, p.bounds.upper.estimate->estimate);
      ymax = std::max(ymax, p.bounds.upper.estimate->estimate);
      ymin = std::min(ymin, p.bounds.upper.estimate->estimate);
    }
    if (p.bounds.lower.estimate) {
      lower.points.emplace_back(p.epsilon, p.bounds.lower.estimate->estimate);
      ymax = std::max(ymax, p.bounds.lower.estimate->estimate);
      ymin = std::min(ymin, p.bounds.lower.estimate->estimate);
    }
  }
  const double pad = ymax > ymin ? 0.05 * (ymax - ymin) : 1.0;
  ymin -= pad;
  ymax += pad;
  const double xmin = sweep.points.front().epsilon;
  const double xmax = sweep.points.back().epsilon;
  const Scale sx{xmin, xmax, kLeft, kWidth - kRight};
  const Scale sy{ymin, ymax, kHeight - kBottom, kTop};

  std::ostringstream svg;
  svg << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << kWidth << R"(" height=")" << kHeight
      << R"(" viewBox="0 0 )" << kWidth << ' ' << kHeight << R"(" font-family="sans-serif" font-size="12">)" << '\n';
  svg << R"(  <rect width="100%" height="100%" fill="white"/>)" << '\n';
  svg << "  <text x=\"" << fixed(kWidth / 2) << "\" y=\"18\" text-anchor=\"middle\">Matching bounds by tolerance</text>\n";

  // Axes.
  svg << "  <line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kHeight - kBottom) << "\" x2=\"" << fixed(kWidth - kRight)
      << "\" y2=\"" << fixed(kHeight - kBottom) << "\" stroke=\"black\"/>\n";
  svg << "  <line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop) << "\" x2=\"" << fixed(kLeft) << "\" y2=\""
      << fixed(kHeight - kBottom) << "\" stroke=\"black\"/>\n";
  for (const auto& p : sweep.points) {
    svg << "  <text x=\"" << fixed(sx(p.epsilon)) << "\" y=\"" << fixed(kHeight - kBottom + 16)
        << "\" text-anchor=\"middle\">" << format_double(p.epsilon) << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = ymin + (ymax - ymin) * k / 4.0;
    svg << "  <text x=\"" << fixed(kLeft - 6) << "\" y=\"" << fixed(sy(v) + 4) << "\" text-anchor=\"end\">" << fixed(v)
        << "</text>\n";
  }
  svg << "  <text x=\"" << fixed(kWidth / 2) << "\" y=\"" << fixed(kHeight - 12)
      << "\" text-anchor=\"middle\">tolerance epsilon</text>\n";
  svg << "  <text x=\"16\" y=\"" << fixed(kHeight / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << fixed(kHeight / 2) << ")\">estimate</text>\n";

  // Reference lines.
  svg << "  <line class=\"zero\" x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(sy(0.0)) << "\" x2=\""
      << fixed(kWidth - kRight) << "\" y2=\"" << fixed(sy(0.0)) << "\" stroke=\"gray\" stroke-width=\"1\"/>\n";
  svg << "  <line class=\"baseline\" x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(sy(sweep.baseline.estimate))
      << "\" x2=\"" << fixed(kWidth - kRight) << "\" y2=\"" << fixed(sy(sweep.baseline.estimate))
      << "\" stroke=\"green\" stroke-dasharray=\"6 4\"/>\n";

  auto draw = [&](const Series& s, const char* cls, const char* color) {
    if (s.points.size() >= 2) {
      svg << "  <polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t k = 0; k < s.points.size(); ++k) {
        svg << (k ? " " : "") << fixed(sx(s.points[k].first)) << ',' << fixed(sy(s.points[k].second));
      }
      svg << "\"/>\n";
    }
    for (const auto& [x, y] : s.points) {
      svg << "  <circle class=\"" << cls << "\" cx=\"" << fixed(sx(x)) << "\" cy=\"" << fixed(sy(y))
          << "\" r=\"4\" fill=\"" << color << "\" data-epsilon=\"" << format_double(x) << "\" data-estimate=\""
          << format_double(y) << "\"/>\n";
    }
  };
  draw(upper, "upper", "#c0392b");
  draw(lower, "lower", "#2c3e91");

  svg << "  <text x=\"" << fixed(kWidth - kRight - 4) << "\" y=\"" << fixed(kTop + 12)
      << "\" text-anchor=\"end\" fill=\"#c0392b\">upper bound</text>\n";
  svg << "  <text x=\"" << fixed(kWidth - kRight - 4) << "\" y=\"" << fixed(kTop + 28)
      << "\" text-anchor=\"end\" fill=\"#2c3e91\">lower bound</text>\n";
  svg << "  <text x=\"" << fixed(kWidth - kRight - 4) << "\" y=\"" << fixed(kTop + 44)
      << "\" text-anchor=\"end\" fill=\"green\">baseline (" << sweep.baseline.method << ")</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

void emit_sweep_svg(const SweepResult& sweep, const std::filesystem::path& path) {
  const std::string text = render_sweep_svg(sweep);
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write " + path.string());
  file << text;
  if (!file) throw IoError("failed writing " + path.string());
}

}  // namespace matchbound::cli
