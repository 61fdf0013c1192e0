#include "cyclebench/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cyclebench {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string short_real(double v, const char* fmt = "%.3g") {
  char buf[40];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

void write_file(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
  if (!out) throw std::runtime_error("error writing " + file.string());
}

const char* kCsvHeader = "kind,model,track,metric,value,std,count\n";

std::string metrics_csv(const EvalReport& report) {
  std::ostringstream os;
  os << kCsvHeader;
  for (const auto& row : report.per_track) {
    const auto values = track_metric_values(row.metrics);
    for (const auto& name : track_metric_names()) {
      auto it = values.find(name);
      if (it == values.end()) continue;
      os << "TRACK," << row.model << ',' << row.track << ',' << name << ',' << format_real(it->second) << ",,\n";
    }
  }
  for (const auto& agg : report.aggregates) {
    for (const auto& [name, s] : agg.stats) {
      os << "AGG," << agg.model << ",," << name << ',' << format_real(s.mean) << ',' << format_real(s.std) << ','
         << s.count << '\n';
    }
    os << "AGG," << agg.model << ",,g1s_failures," << agg.g1s_failures << ",,\n";
    os << "AGG," << agg.model << ",,sg2_failures," << agg.sg2_failures << ",,\n";
    static const char* cls[] = {"g1", "s", "g2"};
    for (std::size_t k = 0; k < 3; ++k) {
      os << "AGG," << agg.model << ",,pooled_f1_" << cls[k] << ',' << format_real(agg.pooled_f1[k]) << ",,\n";
    }
  }
  return os.str();
}

std::string partial_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "model,tau1,tau2,value,tracks\n";
  for (const auto& map : report.partial_maps) {
    for (std::size_t i = 0; i < map.taus.size(); ++i) {
      for (std::size_t j = i; j < map.taus.size(); ++j) {
        os << map.model << ',' << format_real(map.taus[i]) << ',' << format_real(map.taus[j]) << ','
           << format_real(map.values(static_cast<Index>(i), static_cast<Index>(j))) << ',' << map.tracks << '\n';
      }
    }
  }
  return os.str();
}

json report_metadata(const EvalReport& report) {
  json meta;
  meta["condition"] = report.condition;
  meta["conventions"] = {
      {"dtw", "squared Euclidean step cost over both channels; each non-diagonal move adds penalty^2; "
              "boundary anchored; value is sqrt of the accumulated cost"},
      {"dtw_penalty", kDtwPenalty},
      {"r2", "1 - SS_res/SS_tot over both channels jointly, SS_tot about per-channel means"},
      {"checkpoints", "linearized signal, min-max normalized, centered moving average, threshold crossing"},
      {"checkpoint_threshold", kDetectionThreshold},
      {"checkpoint_window", kDetectionWindow},
      {"partial_map_statistic", "absolute error at the last frame of each crop, averaged over channels and tracks"},
      {"std", "sample standard deviation (n - 1)"}};
  json models = json::array();
  for (const auto& a : report.aggregates) {
    json m = {{"model", a.model}, {"g1s_failures", a.g1s_failures}, {"sg2_failures", a.sg2_failures}};
    for (const auto& [k, s] : a.stats) {
      m[k] = {{"mean", std::isfinite(s.mean) ? json(s.mean) : json(nullptr)}, {"std", s.std}, {"count", s.count}};
    }
    m["pooled_f1"] = a.pooled_f1;
    models.push_back(m);
  }
  meta["models"] = models;
  json maps = json::array();
  for (const auto& p : report.partial_maps) {
    maps.push_back({{"model", p.model}, {"grid_step", p.grid_step}, {"valid_cells", p.valid_cells()},
                    {"tracks", p.tracks}});
  }
  meta["partial_maps"] = maps;
  meta["config"] = report.config_echo;
  return meta;
}

// ---- SVG --------------------------------------------------------------------------

std::string color_scale(double t) {
  static const double stops[5][3] = {
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * 4.0;
  const int k = std::min(3, static_cast<int>(t));
  const double f = t - k;
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(stops[k][0] + f * (stops[k + 1][0] - stops[k][0]))),
                static_cast<int>(std::lround(stops[k][1] + f * (stops[k + 1][1] - stops[k][1]))),
                static_cast<int>(std::lround(stops[k][2] + f * (stops[k + 1][2] - stops[k][2]))));
  return buf;
}

std::string svg_open(int w, int h) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
     << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return os.str();
}

std::string strip_plot(const EvalReport& report) {
  std::vector<std::string> models;
  for (const auto& a : report.aggregates) models.push_back(a.model);
  double hi = 0.0;
  for (const auto& r : report.per_track) hi = std::max(hi, r.metrics.dtw);
  if (!(hi > 0.0)) hi = 1.0;
  const int w = 120 + 140 * static_cast<int>(models.size());
  const int h = 420;
  const double top = 40;
  const double bottom = 360;
  auto ypos = [&](double v) { return bottom - (bottom - top) * v / hi; };

  std::ostringstream os;
  os << svg_open(w, h);
  os << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\">Per-track DTW (" << report.condition
     << ")</text>\n";
  os << "<line x1=\"70\" y1=\"" << top << "\" x2=\"70\" y2=\"" << bottom << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = hi * k / 4.0;
    os << "<text x=\"64\" y=\"" << ypos(v) + 4 << "\" text-anchor=\"end\">" << short_real(v) << "</text>\n";
  }
  for (std::size_t m = 0; m < models.size(); ++m) {
    const double cx = 140 + 140.0 * static_cast<double>(m);
    std::size_t i = 0;
    for (const auto& r : report.per_track) {
      if (r.model != models[m]) continue;
      const double jitter = (static_cast<double>((i * 37) % 41) / 40.0 - 0.5) * 60.0;
      os << "<circle cx=\"" << short_real(cx + jitter, "%.2f") << "\" cy=\"" << short_real(ypos(r.metrics.dtw), "%.2f")
         << "\" r=\"2.5\" fill=\"#3b528b\" fill-opacity=\"0.6\"/>\n";
      ++i;
    }
    const auto& s = report.aggregates[m].stats.at("dtw");
    os << "<line x1=\"" << cx - 40 << "\" x2=\"" << cx + 40 << "\" y1=\"" << short_real(ypos(s.mean), "%.2f")
       << "\" y2=\"" << short_real(ypos(s.mean), "%.2f") << "\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << cx << "\" y=\"" << bottom + 20 << "\" text-anchor=\"middle\">" << models[m] << "</text>\n";
    os << "<text x=\"" << cx << "\" y=\"" << bottom + 36 << "\" text-anchor=\"middle\">" << short_real(s.mean)
       << " &#177; " << short_real(s.std) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string heat_map(const PartialMap& map) {
  const auto g = static_cast<int>(map.taus.size());
  const int cell = std::max(8, 420 / g);
  const int left = 70;
  const int top = 40;
  const int w = left + g * cell + 170;
  const int h = top + g * cell + 60;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < map.values.size(); ++i) {
    const double v = map.values.data()[i];
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) lo = hi = 0.0;
  const double span = hi > lo ? hi - lo : 1.0;

  std::ostringstream os;
  os << svg_open(w, h);
  os << "<text x=\"" << left << "\" y=\"22\">" << map.model << ": last-frame L1 of crop (tau1, tau2)</text>\n";
  for (int i = 0; i < g; ++i) {
    for (int j = i; j < g; ++j) {
      const double v = map.values(i, j);
      // tau2 along x, tau1 along y (top row tau1 = 0).
      os << "<rect class=\"cell\" x=\"" << left + j * cell << "\" y=\"" << top + i * cell << "\" width=\"" << cell
         << "\" height=\"" << cell << "\" fill=\"" << color_scale((v - lo) / span) << "\"><title>tau1="
         << short_real(map.taus[static_cast<std::size_t>(i)]) << " tau2=" << short_real(map.taus[static_cast<std::size_t>(j)])
         << " L1=" << short_real(v, "%.4g") << "</title></rect>\n";
    }
  }
  os << "<text x=\"" << left + g * cell / 2 << "\" y=\"" << top + g * cell + 20
     << "\" text-anchor=\"middle\">tau2 (segment end)</text>\n";
  os << "<text x=\"20\" y=\"" << top + g * cell / 2 << "\" transform=\"rotate(-90 20 " << top + g * cell / 2
     << ")\" text-anchor=\"middle\">tau1 (segment start)</text>\n";
  const int lx = left + g * cell + 30;
  for (int k = 0; k < 10; ++k) {
    os << "<rect class=\"legend\" x=\"" << lx << "\" y=\"" << top + (9 - k) * 20 << "\" width=\"20\" height=\"20\" fill=\""
       << color_scale(k / 9.0) << "\"/>\n";
  }
  os << "<text x=\"" << lx + 26 << "\" y=\"" << top + 12 << "\">max " << short_real(hi, "%.4g") << "</text>\n";
  os << "<text x=\"" << lx + 26 << "\" y=\"" << top + 192 << "\">min " << short_real(lo, "%.4g") << "</text>\n";
  os << "<text x=\"" << lx << "\" y=\"" << top + 220 << "\">color scale: L1 error</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::string overlay_plot(const Exemplar& ex, double frame_interval_min) {
  const int w = 640;
  const int h = 320;
  const double left = 60, right = 620, top = 40, bottom = 280;
  const Index n = ex.y.rows();
  double lo = std::min(ex.y.minCoeff(), ex.yhat.minCoeff());
  double hi = std::max(ex.y.maxCoeff(), ex.yhat.maxCoeff());
  if (!(hi > lo)) hi = lo + 1.0;
  auto xpos = [&](Index t) { return left + (right - left) * (n > 1 ? static_cast<double>(t) / (n - 1) : 0.0); };
  auto ypos = [&](double v) { return bottom - (bottom - top) * (v - lo) / (hi - lo); };
  auto line = [&](const Matrix& m, Index c, const char* color, const char* dash) {
    std::ostringstream os;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"" << dash << " points=\"";
    for (Index t = 0; t < n; ++t) os << short_real(xpos(t), "%.1f") << ',' << short_real(ypos(m(t, c)), "%.1f") << ' ';
    os << "\"/>\n";
    return os.str();
  };
  std::ostringstream os;
  os << svg_open(w, h);
  os << "<text x=\"" << left << "\" y=\"22\">" << ex.model << ", " << ex.label << " track " << ex.track
     << " (DTW " << short_real(ex.dtw) << ")</text>\n";
  os << line(ex.y, 0, "#d62728", "") << line(ex.yhat, 0, "#d62728", " stroke-dasharray=\"5,3\"");
  os << line(ex.y, 1, "#2ca02c", "") << line(ex.yhat, 1, "#2ca02c", " stroke-dasharray=\"5,3\"");
  os << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\"" << bottom
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (left + right) / 2 << "\" y=\"" << bottom + 30 << "\" text-anchor=\"middle\">time (h), "
     << short_real(static_cast<double>(n - 1) * frame_interval_min / 60.0) << " h total</text>\n";
  os << "<text x=\"" << right - 200 << "\" y=\"" << top - 4
     << "\">solid: ground truth, dashed: predicted; red fucci1, green fucci2</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& s, const fs::path& file) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw std::runtime_error(file.string() + ": bad number '" + s + "'");
  return v;
}

TrackMetrics metrics_from_values(const std::map<std::string, double>& v) {
  auto opt = [&v](const char* k) -> std::optional<double> {
    auto it = v.find(k);
    return it == v.end() ? std::nullopt : std::optional<double>(it->second);
  };
  auto opt_index = [&](const char* k) -> std::optional<Index> {
    auto x = opt(k);
    return x ? std::optional<Index>(static_cast<Index>(*x)) : std::nullopt;
  };
  TrackMetrics m;
  m.l1_fucci1 = v.at("l1_fucci1");
  m.l1_fucci2 = v.at("l1_fucci2");
  m.r2 = opt("r2");
  m.dtw = v.at("dtw");
  m.t_g1s_pred = opt_index("t_g1s_pred");
  m.t_sg2_pred = opt_index("t_sg2_pred");
  m.t_g1s_true = opt_index("t_g1s_true");
  m.t_sg2_true = opt_index("t_sg2_true");
  m.dt_g1s_min = opt("dt_g1s_min");
  m.dt_sg2_min = opt("dt_sg2_min");
  static const char* cls[] = {"g1", "s", "g2"};
  for (std::size_t k = 0; k < 3; ++k) {
    m.phase_f1[k] = v.at(std::string("f1_") + cls[k]);
    m.counts.tp[k] = static_cast<long long>(v.at(std::string("tp_") + cls[k]));
    m.counts.fp[k] = static_cast<long long>(v.at(std::string("fp_") + cls[k]));
    m.counts.fn[k] = static_cast<long long>(v.at(std::string("fn_") + cls[k]));
  }
  return m;
}

}  // namespace

std::vector<fs::path> emit_report(const EvalReport& report, const fs::path& out_dir, EmitFormats formats) {
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_file(out_dir / name, text);
    written.push_back(out_dir / name);
  };
  if (formats.csv) {
    emit("metrics.csv", metrics_csv(report));
    if (!report.partial_maps.empty()) emit("partial.csv", partial_csv(report));
    emit("report.json", report_metadata(report).dump(2) + "\n");
  }
  if (formats.svg) {
    if (!report.per_track.empty()) {
      emit("dtw_strip.svg", strip_plot(report));
      for (const auto& ex : report.exemplars) {
        emit("overlay_" + ex.model + "_" + ex.label + ".svg", overlay_plot(ex, ex.frame_interval_min));
      }
    }
    for (const auto& map : report.partial_maps) emit("partial_" + map.model + ".svg", heat_map(map));
  }
  return written;
}

EvalReport read_report_csv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::string line;
  std::getline(in, line);
  if (line + "\n" != kCsvHeader) throw std::runtime_error(file.string() + ": unexpected header '" + line + "'");

  EvalReport report;
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::map<std::string, double>> track_values;
  std::map<std::string, ModelAggregate> aggs;
  std::vector<std::string> agg_order;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 7) throw std::runtime_error(file.string() + ": malformed row '" + line + "'");
    if (f[0] == "TRACK") {
      auto key = std::make_pair(f[1], f[2]);
      if (!track_values.count(key)) keys.push_back(key);
      track_values[key][f[3]] = parse_real(f[4], file);
    } else if (f[0] == "AGG") {
      if (!aggs.count(f[1])) {
        agg_order.push_back(f[1]);
        aggs[f[1]].model = f[1];
      }
      auto& a = aggs[f[1]];
      const double v = parse_real(f[4], file);
      if (f[3] == "g1s_failures") {
        a.g1s_failures = static_cast<long long>(v);
      } else if (f[3] == "sg2_failures") {
        a.sg2_failures = static_cast<long long>(v);
      } else if (f[3] == "pooled_f1_g1") {
        a.pooled_f1[0] = v;
      } else if (f[3] == "pooled_f1_s") {
        a.pooled_f1[1] = v;
      } else if (f[3] == "pooled_f1_g2") {
        a.pooled_f1[2] = v;
      } else {
        a.stats[f[3]] = {v, parse_real(f[5], file), static_cast<long long>(parse_real(f[6], file))};
      }
    } else {
      throw std::runtime_error(file.string() + ": unknown row kind '" + f[0] + "'");
    }
  }
  for (const auto& key : keys) report.per_track.push_back({key.first, key.second, metrics_from_values(track_values[key])});
  for (const auto& m : agg_order) report.aggregates.push_back(aggs[m]);
  return report;
}

std::string checkpoint_table(const EvalReport& report) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-20s %12s %12s %8s %8s %8s\n", "model", "dt_G1S_min", "dt_SG2_min", "F1_G1",
                "F1_S", "F1_G2");
  os << buf;
  for (const auto& a : report.aggregates) {
    std::snprintf(buf, sizeof buf, "%-20s %12.1f %12.1f %8.3f %8.3f %8.3f\n", a.model.c_str(),
                  a.stats.at("dt_g1s_min").mean, a.stats.at("dt_sg2_min").mean, a.pooled_f1[0], a.pooled_f1[1],
                  a.pooled_f1[2]);
    os << buf;
  }
  return os.str();
}

}  // namespace cyclebench
