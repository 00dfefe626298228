#include "jepa_fer/eval/report.hpp"

#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>

#include "jepa_fer/error.hpp"

namespace jepa_fer::eval {

namespace {

using json = nlohmann::ordered_json;

std::string format_number(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
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

std::string metrics_json(const std::vector<MetricsReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    json j;
    j["dataset"] = r.dataset;
    if (r.source_dataset) j["source_dataset"] = *r.source_dataset;
    j["voting"] = to_string(r.voting);
    if (r.mode) j["mode"] = to_string(*r.mode);
    j["labels"] = r.labels;
    json folds = json::array();
    for (std::size_t f = 0; f < r.folds.size(); ++f) {
      const auto& fm = r.folds[f];
      json excluded = json::array();
      for (auto c : fm.excluded) excluded.push_back(r.labels.at(c));
      folds.push_back({{"fold", f},
                       {"uar", fm.uar},
                       {"war", fm.war},
                       {"evaluated", fm.evaluated},
                       {"dropped", fm.dropped},
                       {"excluded_classes", excluded}});
    }
    j["folds"] = folds;
    j["mean_uar"] = r.mean_uar;
    j["mean_war"] = r.mean_war;
    j["std_uar"] = r.std_uar;
    j["std_war"] = r.std_war;
    j["dropped"] = r.dropped;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::string confusion_csv(const std::vector<std::string>& labels, const std::vector<double>& values) {
  const auto k = labels.size();
  if (values.size() != k * k) throw DimensionError("confusion_csv: value count does not match labels");
  std::ostringstream out;
  out << "truth\\predicted";
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  for (std::size_t t = 0; t < k; ++t) {
    out << labels[t];
    for (std::size_t p = 0; p < k; ++p) out << ',' << format_number(values[t * k + p]);
    out << '\n';
  }
  return out.str();
}

std::string confusion_csv(const std::vector<std::string>& labels, const ConfusionMatrix& cm) {
  std::vector<double> values;
  for (std::size_t t = 0; t < cm.classes(); ++t) {
    for (std::size_t p = 0; p < cm.classes(); ++p) values.push_back(static_cast<double>(cm.at(t, p)));
  }
  return confusion_csv(labels, values);
}

std::string confusion_svg(const std::vector<std::string>& labels, const std::vector<double>& values,
                          const std::string& title) {
  const auto k = labels.size();
  if (values.size() != k * k) throw DimensionError("confusion_svg: value count does not match labels");
  const int cell = 56, margin = 110, top = 60;
  const int size = static_cast<int>(k) * cell;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << margin + size + 20 << "\" height=\""
      << top + size + margin << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<text x=\"" << margin << "\" y=\"24\" font-size=\"15\">" << xml_escape(title) << "</text>\n";
  for (std::size_t t = 0; t < k; ++t) {
    double row = 0;
    for (std::size_t p = 0; p < k; ++p) row += values[t * k + p];
    for (std::size_t p = 0; p < k; ++p) {
      const double v = values[t * k + p];
      const double frac = row > 0 ? v / row : 0.0;
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - frac)));
      const int x = margin + static_cast<int>(p) * cell, y = top + static_cast<int>(t) * cell;
      out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
          << "\" fill=\"rgb(" << shade << "," << shade << ",255)\" stroke=\"#888\"/>\n";
      out << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\" fill=\""
          << (frac > 0.6 ? "white" : "black") << "\">" << format_number(v) << "</text>\n";
    }
    out << "<text x=\"" << margin - 6 << "\" y=\"" << top + static_cast<int>(t) * cell + cell / 2 + 4
        << "\" text-anchor=\"end\">" << xml_escape(labels[t]) << "</text>\n";
  }
  for (std::size_t p = 0; p < k; ++p) {
    const int x = margin + static_cast<int>(p) * cell + cell / 2, y = top + size + 12;
    out << "<text x=\"" << x << "\" y=\"" << y << "\" text-anchor=\"end\" transform=\"rotate(-45 " << x << ' ' << y
        << ")\">" << xml_escape(labels[p]) << "</text>\n";
  }
  out << "<text x=\"" << margin + size / 2 << "\" y=\"" << top + size + margin - 8
      << "\" text-anchor=\"middle\">predicted</text>\n";
  out << "<text x=\"16\" y=\"" << top + size / 2 << "\" transform=\"rotate(-90 16 " << top + size / 2
      << ")\" text-anchor=\"middle\">ground truth</text>\n";
  out << "</svg>\n";
  return out.str();
}

std::string pca_csv(const Pca2& pca, const std::vector<std::string>& labels) {
  if (labels.size() != pca.coords.size()) throw DimensionError("pca_csv: label count does not match points");
  std::ostringstream out;
  out.precision(9);
  out << "x,y,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << pca.coords[i][0] << ',' << pca.coords[i][1] << ',' << labels[i] << '\n';
  }
  return out.str();
}

}  // namespace jepa_fer::eval
