#pragma once

// Result tables, scaling summaries and scaling plots. Numbers use the shortest round-trip
// decimal form, so identical runs produce byte-identical files.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "psyfit/experiments.hpp"
#include "psyfit/tsv.hpp"

namespace psyfit {

inline constexpr std::string_view kUndefined = "UNDEFINED";

namespace detail {

inline std::string opt_number(const std::optional<double>& v, std::string_view absent) {
  return v ? tsv::format_double(*v) : std::string(absent);
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string xml_escape(std::string_view s) {
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

} // namespace detail

/// One row per variant. An undefined correlation is written as UNDEFINED; a normalized score is
/// NA when no ceiling applies.
inline void write_results(std::ostream& out, const std::vector<VariantScore>& scores) {
  out << "dataset\tmodel\tparams\tsteps\tr\tnormalized_r\tn\n";
  for (const auto& s : scores) {
    out << s.dataset_id << '\t' << s.model_name << '\t' << s.parameter_count << '\t' << s.training_steps << '\t'
        << detail::opt_number(s.pearson_r, kUndefined) << '\t'
        << detail::opt_number(s.normalized_r, s.pearson_r ? "NA" : kUndefined) << '\t' << s.n_heldout << '\n';
  }
}

inline void write_scaling_summary(std::ostream& out, const std::vector<ScalingReport>& reports) {
  out << "set\tgroup\tn_points\tn_undefined\tslope\tintercept\tp_positive\tp_negative\tn_perm\tseed\n";
  for (const auto& r : reports) {
    out << r.label << '\t' << r.group << '\t' << (r.points.size() - r.n_undefined) << '\t' << r.n_undefined << '\t';
    if (r.line) {
      out << tsv::format_double(r.line->slope) << '\t' << tsv::format_double(r.line->intercept) << '\t';
    } else {
      out << "NA\tNA\t";
    }
    if (r.permutation) {
      out << tsv::format_double(r.permutation->p_positive) << '\t' << tsv::format_double(r.permutation->p_negative)
          << '\t' << r.permutation->n_permutations << '\t' << r.permutation->seed;
    } else {
      out << "NA\tNA\t0\tNA";
    }
    out << '\n';
  }
}

/// The numbers behind a scaling plot: one row per variant.
inline void write_scaling_points(std::ostream& out, const ScalingReport& r) {
  out << "model\tfamily\tparams\tlog10_params\tscore\n";
  for (const auto& s : r.points) {
    out << s.model_name << '\t' << s.family << '\t' << s.parameter_count << '\t'
        << tsv::format_double(std::log10(static_cast<double>(s.parameter_count))) << '\t'
        << detail::opt_number(s.reported(), kUndefined) << '\n';
  }
}

/// Scatter of score against log10 parameter count with the fitted line. Undefined scores are
/// omitted from the plot and counted in the caption.
inline void write_scaling_svg(std::ostream& out, const ScalingReport& r) {
  constexpr double W = 640, H = 420, L = 70, R = 20, T = 40, B = 60;
  std::vector<std::pair<double, double>> pts;
  for (const auto& s : r.points) {
    if (const auto v = s.reported()) pts.emplace_back(std::log10(static_cast<double>(s.parameter_count)), *v);
  }
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!pts.empty()) {
    x0 = x1 = pts.front().first;
    y0 = y1 = pts.front().second;
    for (const auto& [x, y] : pts) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  const auto pad = [](double& lo, double& hi) {
    const double span = hi - lo;
    const double m = span > 0 ? 0.08 * span : 0.5;
    lo -= m;
    hi += m;
  };
  pad(x0, x1);
  pad(y0, y1);
  const auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  const auto sy = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  const auto f = [](double v) { return detail::fixed(v, 2); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << L << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">"
      << detail::xml_escape(r.label + " (" + r.group + ")") << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0;
    const double yv = y0 + (y1 - y0) * i / 4.0;
    out << "<text x=\"" << f(sx(xv)) << "\" y=\"" << H - B + 18
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << detail::fixed(xv, 2)
        << "</text>\n";
    out << "<text x=\"" << L - 6 << "\" y=\"" << f(sy(yv) + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << detail::fixed(yv, 3)
        << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 20
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">log10(parameters)</text>\n";
  out << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" font-family=\"sans-serif\" font-size=\"12\" "
      << "text-anchor=\"middle\" transform=\"rotate(-90 16 " << (T + H - B) / 2 << ")\">score</text>\n";
  for (const auto& [x, y] : pts) {
    out << "<circle cx=\"" << f(sx(x)) << "\" cy=\"" << f(sy(y)) << "\" r=\"4\" fill=\"steelblue\"/>\n";
  }
  if (r.line) {
    double lo = pts.front().first, hi = lo;
    for (const auto& p : pts) {
      lo = std::min(lo, p.first);
      hi = std::max(hi, p.first);
    }
    out << "<line x1=\"" << f(sx(lo)) << "\" y1=\"" << f(sy(r.line->intercept + r.line->slope * lo)) << "\" x2=\""
        << f(sx(hi)) << "\" y2=\"" << f(sy(r.line->intercept + r.line->slope * hi))
        << "\" stroke=\"firebrick\" stroke-width=\"2\"/>\n";
  }
  std::string caption = "n=" + std::to_string(pts.size());
  if (r.n_undefined > 0) caption += " (" + std::to_string(r.n_undefined) + " undefined)";
  if (r.line) caption += "  slope=" + detail::fixed(r.line->slope, 4);
  if (r.permutation) {
    caption += "  p+=" + detail::fixed(r.permutation->p_positive, 4) +
               "  p-=" + detail::fixed(r.permutation->p_negative, 4);
  }
  out << "<text x=\"" << W - R << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">"
      << detail::xml_escape(caption) << "</text>\n";
  out << "</svg>\n";
}

} // namespace psyfit
