#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "promptrl/bench.hpp"

namespace promptrl {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
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

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

}  // namespace

json report_to_json(const StudyReport& r) {
  json rows = json::array(), tests = json::array(), curves = json::array();
  for (const auto& x : r.rows) {
    rows.push_back({{"arm", x.arm}, {"metric", x.metric}, {"mean", x.mean}, {"sd", x.sd},
                    {"n", x.n}, {"seed_hash", x.seed_hash}});
  }
  for (const auto& t : r.tests) {
    tests.push_back({{"arm_a", t.arm_a}, {"arm_b", t.arm_b}, {"metric", t.metric},
                     {"method", t.method}, {"statistic", t.statistic}, {"p_value", t.p_value}});
  }
  for (const auto& c : r.curves) {
    curves.push_back({{"arm", c.arm}, {"t", c.t}, {"mean", c.mean}, {"sd", c.sd}});
  }
  return json{{"study", r.study}, {"arms", r.arms},         {"rows", rows},
              {"tests", tests},   {"curves", curves},       {"unit_dice", r.unit_dice},
              {"metadata", r.metadata}};
}

StudyReport report_from_json(const json& j) {
  StudyReport r;
  try {
    r.study = j.at("study").get<std::string>();
    r.arms = j.at("arms").get<std::vector<std::string>>();
    for (const auto& x : j.at("rows")) {
      r.rows.push_back({x.at("arm"), x.at("metric"), x.at("mean"), x.at("sd"), x.at("n"), x.at("seed_hash")});
    }
    for (const auto& t : j.at("tests")) {
      r.tests.push_back({t.at("arm_a"), t.at("arm_b"), t.at("metric"), t.at("method"),
                         t.at("statistic"), t.at("p_value")});
    }
    for (const auto& c : j.at("curves")) r.curves.push_back({c.at("arm"), c.at("t"), c.at("mean"), c.at("sd")});
    r.unit_dice = j.at("unit_dice").get<std::vector<std::vector<double>>>();
    r.metadata = j.at("metadata");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string report_csv(const StudyReport& r) {
  std::string out = "study,arm,metric,mean,sd,n,seed_hash\n";
  for (const auto& x : r.rows) {
    out += csv_field(r.study) + "," + csv_field(x.arm) + "," + x.metric + "," + num(x.mean) + "," +
           num(x.sd) + "," + std::to_string(x.n) + "," + x.seed_hash + "\n";
  }
  return out;
}

std::string tests_csv(const StudyReport& r) {
  std::string out = "study,arm_a,arm_b,metric,method,statistic,p_value\n";
  for (const auto& t : r.tests) {
    out += csv_field(r.study) + "," + csv_field(t.arm_a) + "," + csv_field(t.arm_b) + "," + t.metric +
           "," + t.method + "," + num(t.statistic) + "," + num(t.p_value) + "\n";
  }
  return out;
}

std::string curves_csv(const StudyReport& r) {
  std::string out = "study,arm,t,mean,sd\n";
  for (const auto& c : r.curves) {
    out += csv_field(r.study) + "," + csv_field(c.arm) + "," + std::to_string(c.t) + "," + num(c.mean) +
           "," + num(c.sd) + "\n";
  }
  return out;
}

std::string report_svg(const StudyReport& r) {
  constexpr double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << xml_escape(r.study) << "</text>\n";
  auto y_of = [&](double v) { return T + ph * (1.0 - std::clamp(v, 0.0, 1.0)); };
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0;
    s << "<line x1=\"" << L << "\" x2=\"" << L + pw << "\" y1=\"" << y_of(v) << "\" y2=\"" << y_of(v)
      << "\" stroke=\"#ddd\"/>\n"
      << "<text x=\"" << L - 6 << "\" y=\"" << y_of(v) + 4 << "\" text-anchor=\"end\">" << num(v)
      << "</text>\n";
  }
  s << "<text x=\"16\" y=\"" << T + ph / 2 << "\" transform=\"rotate(-90 16 " << T + ph / 2
    << ")\" text-anchor=\"middle\">Dice</text>\n";

  if (!r.curves.empty()) {
    int t_max = 1;
    for (const auto& c : r.curves) t_max = std::max(t_max, c.t);
    auto x_of = [&](double t) { return L + pw * t / t_max; };
    for (int t = 0; t <= t_max; ++t) {
      s << "<text x=\"" << x_of(t) << "\" y=\"" << T + ph + 18 << "\" text-anchor=\"middle\">" << t
        << "</text>\n";
    }
    s << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\">prompt count</text>\n";
    for (std::size_t a = 0; a < r.arms.size(); ++a) {
      const char* color = kPalette[a % std::size(kPalette)];
      std::string points;
      for (const auto& c : r.curves) {
        if (c.arm == r.arms[a]) points += num(x_of(c.t)) + "," + num(y_of(c.mean)) + " ";
      }
      s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << points
        << "\"/>\n"
        << "<text x=\"" << L + pw - 4 << "\" y=\"" << T + 14 + 14 * a << "\" text-anchor=\"end\" fill=\""
        << color << "\">" << xml_escape(r.arms[a]) << "</text>\n";
    }
  } else {
    const double slot = pw / std::max<std::size_t>(1, r.arms.size());
    for (std::size_t a = 0; a < r.arms.size(); ++a) {
      const double cx = L + slot * (a + 0.5);
      s << "<text x=\"" << cx << "\" y=\"" << T + ph + 18 << "\" text-anchor=\"middle\">"
        << xml_escape(r.arms[a]) << "</text>\n";
      if (a >= r.unit_dice.size() || r.unit_dice[a].empty()) continue;
      const auto& v = r.unit_dice[a];
      const double lo = quantile(v, 0.0), q1 = quantile(v, 0.25), med = quantile(v, 0.5),
                   q3 = quantile(v, 0.75), hi = quantile(v, 1.0);
      const double bw = std::min(60.0, slot * 0.5);
      const char* color = kPalette[a % std::size(kPalette)];
      s << "<line x1=\"" << cx << "\" x2=\"" << cx << "\" y1=\"" << y_of(lo) << "\" y2=\"" << y_of(hi)
        << "\" stroke=\"#333\"/>\n"
        << "<rect x=\"" << cx - bw / 2 << "\" y=\"" << y_of(q3) << "\" width=\"" << bw << "\" height=\""
        << std::max(0.0, y_of(q1) - y_of(q3)) << "\" fill=\"" << color
        << "\" fill-opacity=\"0.5\" stroke=\"#333\"/>\n"
        << "<line x1=\"" << cx - bw / 2 << "\" x2=\"" << cx + bw / 2 << "\" y1=\"" << y_of(med)
        << "\" y2=\"" << y_of(med) << "\" stroke=\"#000\" stroke-width=\"2\"/>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

void emit_report(const StudyReport& r, const fs::path& dir, const std::vector<std::string>& formats) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
  auto wants = [&](const char* f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };
  if (wants("csv")) {
    write_text(dir / "report.csv", report_csv(r));
    write_text(dir / "tests.csv", tests_csv(r));
    if (!r.curves.empty()) write_text(dir / "curves.csv", curves_csv(r));
  }
  if (wants("json")) write_text(dir / "report.json", report_to_json(r).dump(2) + "\n");
  if (wants("svg")) write_text(dir / "report.svg", report_svg(r));
}

}  // namespace promptrl
