#include "acida/metrics.hpp"

#include <fstream>
#include <sstream>

#include "acida/io_util.hpp"

namespace acida {

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    out.push_back(field);
  }
  return out;
}

}  // namespace

ScoreSet<double> read_score_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open score file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("score file is empty: " + path.string());
  const auto header = split_commas(line);
  const auto find = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("score file lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t score_col = find("score");
  const std::size_t morph_col = find("is_morph");

  ScoreSet<double> set;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_commas(line);
    if (fields.size() <= std::max(score_col, morph_col)) {
      throw DataError("score file line " + std::to_string(line_no) + " is short");
    }
    double score = 0.0;
    try {
      score = std::stod(fields[score_col]);
    } catch (const std::exception&) {
      throw DataError("score file line " + std::to_string(line_no) + ": bad score");
    }
    const std::string& flag = fields[morph_col];
    if (flag == "1" || flag == "true") set.morph.push_back(score);
    else if (flag == "0" || flag == "false") set.bona_fide.push_back(score);
    else throw DataError("score file line " + std::to_string(line_no) + ": bad is_morph value");
  }
  return set;
}

std::string det_curve_csv(const DetCurve& curve) {
  std::string out = "apcer,bpcer\n";
  for (const DetPoint& p : curve) {
    out += format_double(p.apcer) + "," + format_double(p.bpcer) + "\n";
  }
  return out;
}

std::string det_curve_svg(const std::vector<std::pair<std::string, DetCurve>>& curves) {
  constexpr double kSize = 480.0;
  constexpr double kMargin = 60.0;
  constexpr double kFloor = 1e-3;
  const auto axis = [&](double v) {
    const double clamped = std::clamp(v, kFloor, 1.0);
    return (std::log10(clamped) - std::log10(kFloor)) / -std::log10(kFloor) * kSize;
  };
  static constexpr std::array<const char*, 6> kColors = {"#1f77b4", "#d62728", "#2ca02c",
                                                         "#ff7f0e", "#9467bd", "#8c564b"};
  std::ostringstream svg;
  const double total = kSize + 2 * kMargin;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total << "\" height=\"" << total
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<g transform=\"translate(" << kMargin << "," << kMargin << ")\">\n";
  svg << "<rect width=\"" << kSize << "\" height=\"" << kSize
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double tick : {0.001, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0}) {
    const double x = axis(tick);
    const double y = kSize - axis(tick);
    svg << "<line x1=\"" << x << "\" y1=\"0\" x2=\"" << x << "\" y2=\"" << kSize
        << "\" stroke=\"#ddd\"/>\n";
    svg << "<line x1=\"0\" y1=\"" << y << "\" x2=\"" << kSize << "\" y2=\"" << y
        << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << x << "\" y=\"" << kSize + 15 << "\" text-anchor=\"middle\">" << tick
        << "</text>\n";
    svg << "<text x=\"-6\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << tick << "</text>\n";
  }
  svg << "<text x=\"" << kSize / 2 << "\" y=\"" << kSize + 35
      << "\" text-anchor=\"middle\">APCER</text>\n";
  svg << "<text transform=\"translate(-45," << kSize / 2
      << ") rotate(-90)\" text-anchor=\"middle\">BPCER</text>\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const char* color = kColors[c % kColors.size()];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const DetPoint& p : curves[c].second) {
      svg << axis(p.apcer) << "," << kSize - axis(p.bpcer) << " ";
    }
    svg << "\"/>\n";
    svg << "<text x=\"" << kSize - 10 << "\" y=\"" << 18 + 16 * c << "\" text-anchor=\"end\" fill=\""
        << color << "\">" << curves[c].first << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

}  // namespace acida
