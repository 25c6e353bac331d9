#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "alsim/harness.hpp"
#include "alsim/json_io.hpp"

namespace alsim {

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  os << text;
  if (!os) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

std::string percent(double f) { return fmt::format("{:.0f}%", 100.0 * f); }

MethodSeries series_of(const RunReport& r) {
  MethodSeries s;
  s.method = std::string(to_string(r.method));
  for (const RoundResult& rr : r.rounds) {
    s.pool_fraction.push_back(rr.pool_fraction);
    std::array<double, kNumClasses> ap{};
    for (std::size_t c = 0; c < kNumClasses; ++c) ap[c] = rr.eval.per_class[c].ap;
    s.class_ap.push_back(ap);
    std::array<double, kNumClasses> dist{};
    double total = 0.0;
    for (auto n : rr.class_counts) total += static_cast<double>(n);
    for (std::size_t c = 0; c < kNumClasses; ++c)
      dist[c] = total > 0.0 ? static_cast<double>(rr.class_counts[c]) / total : 0.0;
    s.class_distribution.push_back(dist);
  }
  if (!r.rounds.empty()) s.final_ap_gap = ap_spread(r.rounds.back().eval);
  return s;
}

}  // namespace

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::mAP: return "mAP";
    case Metric::mATE: return "mATE";
    case Metric::mASE: return "mASE";
    case Metric::mAOE: return "mAOE";
    case Metric::mAVE: return "mAVE";
    case Metric::mAAE: return "mAAE";
    case Metric::NDS: return "NDS";
  }
  return "?";
}

bool higher_is_better(Metric m) { return m == Metric::mAP || m == Metric::NDS; }

double metric_value(const EvalReport& r, Metric m) {
  switch (m) {
    case Metric::mAP: return r.mAP;
    case Metric::mATE: return r.mATE;
    case Metric::mASE: return r.mASE;
    case Metric::mAOE: return r.mAOE;
    case Metric::mAVE: return r.mAVE;
    case Metric::mAAE: return r.mAAE;
    case Metric::NDS: return r.NDS;
  }
  return 0.0;
}

ComparisonSummary compare(const RunReport& a, const RunReport& b) {
  if (!(a.config.budget == b.config.budget))
    throw ComparisonError("reports were produced under different budget schedules");
  if (a.seed != b.seed) throw ComparisonError(fmt::format("reports use different seeds ({} vs {})", a.seed, b.seed));
  if (a.rounds.size() != b.rounds.size())
    throw ComparisonError(fmt::format("reports hold {} and {} rounds", a.rounds.size(), b.rounds.size()));

  ComparisonSummary s;
  for (std::size_t r = 0; r < a.rounds.size(); ++r) {
    for (Metric m : kAllMetrics) {
      MetricCell cell;
      cell.round_index = a.rounds[r].round_index;
      cell.metric = m;
      cell.value_a = metric_value(a.rounds[r].eval, m);
      cell.value_b = metric_value(b.rounds[r].eval, m);
      if (cell.value_a != cell.value_b) {
        const bool a_better = higher_is_better(m) ? cell.value_a > cell.value_b : cell.value_a < cell.value_b;
        cell.winner = a_better ? 0 : 1;
        (a_better ? s.wins_a : s.wins_b) += 1;
      }
      s.cells.push_back(cell);
    }
  }
  s.total_cells = s.cells.size();
  s.a = series_of(a);
  s.b = series_of(b);
  return s;
}

std::string format_report_table(const RunReport& report) {
  std::ostringstream os;
  os << fmt::format("method: {}   seed: {}   rounds: {}{}\n", to_string(report.method), report.seed,
                    report.rounds.size(), report.complete ? "" : "   (incomplete)");
  os << fmt::format("{:>5} | {:>5} | {:>7} | {:>7} | {:>7} | {:>7} | {:>7} | {:>7} | {:>7}\n", "Round", "Pool", "mAP",
                    "mATE", "mASE", "mAOE", "mAVE", "mAAE", "NDS");
  os << std::string(81, '-') << '\n';
  for (const RoundResult& r : report.rounds) {
    const EvalReport& e = r.eval;
    os << fmt::format("{:>5} | {:>5} | {:>7.4f} | {:>7.4f} | {:>7.4f} | {:>7.4f} | {:>7.4f} | {:>7.4f} | {:>7.4f}\n",
                      r.round_index + 1, percent(r.pool_fraction), e.mAP, e.mATE, e.mASE, e.mAOE, e.mAVE, e.mAAE,
                      e.NDS);
  }
  if (report.failure)
    os << fmt::format("failed at round {} during {}: {}\n", report.failure->round_index, report.failure->stage,
                      report.failure->message);
  return os.str();
}

std::string format_comparison_table(const RunReport& a, const RunReport& b, const ComparisonSummary& s) {
  std::ostringstream os;
  const auto na = to_string(a.method), nb = to_string(b.method);
  os << fmt::format("{:>5} | {:>5}", "Round", "Pool");
  for (Metric m : kAllMetrics) os << fmt::format(" | {:^19}", to_string(m));
  os << '\n' << fmt::format("{:>5} | {:>5}", "", "");
  for (std::size_t i = 0; i < kAllMetrics.size(); ++i) os << fmt::format(" | {:>9.9} {:>9.9}", na, nb);
  os << '\n' << std::string(13 + 22 * kAllMetrics.size(), '-') << '\n';
  for (std::size_t r = 0; r < a.rounds.size(); ++r) {
    os << fmt::format("{:>5} | {:>5}", r + 1, percent(a.rounds[r].pool_fraction));
    for (std::size_t m = 0; m < kAllMetrics.size(); ++m) {
      const MetricCell& c = s.cells[r * kAllMetrics.size() + m];
      os << fmt::format(" | {:>8.4f}{} {:>8.4f}{}", c.value_a, c.winner == 0 ? '*' : ' ', c.value_b,
                        c.winner == 1 ? '*' : ' ');
    }
    os << '\n';
  }
  os << fmt::format("\n{} wins {} of {} cells, {} wins {} ({} ties)\n", na, s.wins_a, s.total_cells, nb, s.wins_b,
                    s.total_cells - s.wins_a - s.wins_b);
  os << fmt::format("final-round class AP spread (best - worst): {} {:.4f}, {} {:.4f}\n\n", na, s.a.final_ap_gap, nb,
                    s.b.final_ap_gap);

  // Cumulative labeled objects per class.
  os << fmt::format("{:<22}", "Data [%]");
  for (const auto& r : a.rounds) os << fmt::format(" | {:^17}", percent(r.pool_fraction));
  os << '\n' << fmt::format("{:<22}", "");
  for (std::size_t i = 0; i < a.rounds.size(); ++i) os << fmt::format(" | {:>8.8} {:>8.8}", na, nb);
  os << '\n';
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    os << fmt::format("{:<22}", display_name(class_at(c)));
    for (std::size_t r = 0; r < a.rounds.size(); ++r)
      os << fmt::format(" | {:>8} {:>8}", a.rounds[r].class_counts[c], b.rounds[r].class_counts[c]);
    os << '\n';
  }
  return os.str();
}

std::string format_eval_report(const EvalReport& e) {
  std::ostringstream os;
  os << fmt::format("{:<22} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}\n", "class", "GT", "AP", "ATE", "ASE",
                    "AOE", "AVE", "AAE", "AP@4m");
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const ClassMetrics& m = e.per_class[c];
    if (m.tp)
      os << fmt::format("{:<22} {:>6} {:>7.4f} {:>7.4f} {:>7.4f} {:>7.4f} {:>7.4f} {:>7.4f} {:>7.4f}\n",
                        display_name(class_at(c)), m.num_ground_truth, m.ap, m.tp->ate, m.tp->ase, m.tp->aoe,
                        m.tp->ave, m.tp->aae, m.ap_per_threshold.back());
    else
      os << fmt::format("{:<22} {:>6} {:>7.4f} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7.4f}\n", display_name(class_at(c)),
                        m.num_ground_truth, m.ap, "-", "-", "-", "-", "-", m.ap_per_threshold.back());
  }
  os << fmt::format("mAP {:.4f}  mATE {:.4f}  mASE {:.4f}  mAOE {:.4f}  mAVE {:.4f}  mAAE {:.4f}  NDS {:.4f}\n", e.mAP,
                    e.mATE, e.mASE, e.mAOE, e.mAVE, e.mAAE, e.NDS);
  return os.str();
}

std::string report_json(const RunReport& report) { return json(report).dump(1) + "\n"; }

RunReport read_report(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(fmt::format("cannot open report '{}'", path.string()));
  try {
    return json::parse(is).get<RunReport>();
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("report '{}': {}", path.string(), e.what()));
  }
}

std::vector<std::filesystem::path> emit_report(const RunReport& report, ReportFormat format,
                                               const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  std::vector<std::filesystem::path> out;
  if (format != ReportFormat::Json) {
    std::string text = format_report_table(report);
    if (!report.rounds.empty()) text += "\nfinal round, per class:\n" + format_eval_report(report.rounds.back().eval);
    write_file(dir / "report.txt", text);
    out.push_back(dir / "report.txt");
  }
  if (format != ReportFormat::Text) {
    write_file(dir / "report.json", report_json(report));
    out.push_back(dir / "report.json");
    json timings = json::array();
    for (const auto& r : report.rounds) timings.push_back(r.wall_clock_seconds);
    write_file(dir / "timings.json", json{{"wall_clock_seconds", timings}}.dump() + "\n");
    out.push_back(dir / "timings.json");
  }
  return out;
}

// ---------------------------------------------------------------------------
// SVG charts

namespace {

constexpr std::array<const char*, kNumClasses> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

struct Frame {
  double width = 480, height = 320, left = 56, right = 130, top = 36, bottom = 44;
  double x0, x1, y0, y1;
  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

void svg_axes(std::ostringstream& os, const Frame& f, const std::string& title, const std::string& xlabel,
              const std::string& ylabel) {
  os << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="11">)",
                    f.width, f.height)
     << '\n';
  os << fmt::format(R"(<rect width="{}" height="{}" fill="white"/>)", f.width, f.height) << '\n';
  os << fmt::format(R"(<text x="{}" y="20" font-size="13" text-anchor="middle">{}</text>)", (f.left + f.width - f.right) / 2,
                    title)
     << '\n';
  os << fmt::format(R"(<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/>)", f.left, f.height - f.bottom,
                    f.width - f.right)
     << '\n';
  os << fmt::format(R"(<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>)", f.left, f.top, f.height - f.bottom)
     << '\n';
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    os << fmt::format(R"(<text x="{}" y="{:.1f}" text-anchor="end">{:.2f}</text>)", f.left - 4, f.py(yv) + 4, yv) << '\n';
    os << fmt::format(R"(<line x1="{}" y1="{:.1f}" x2="{}" y2="{:.1f}" stroke="#ddd"/>)", f.left, f.py(yv),
                      f.width - f.right, f.py(yv))
       << '\n';
  }
  os << fmt::format(R"(<text x="{}" y="{}" text-anchor="middle">{}</text>)", (f.left + f.width - f.right) / 2,
                    f.height - 8, xlabel)
     << '\n';
  os << fmt::format(R"svg(<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>)svg",
                    (f.top + f.height - f.bottom) / 2, (f.top + f.height - f.bottom) / 2, ylabel)
     << '\n';
}

void svg_polyline(std::ostringstream& os, const Frame& f, const std::vector<double>& xs, const std::vector<double>& ys,
                  const char* color, const char* dash) {
  os << R"(<polyline fill="none" stroke-width="2" stroke=")" << color << '"';
  if (*dash) os << " stroke-dasharray=\"" << dash << '"';
  os << " points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) os << fmt::format("{:.1f},{:.1f} ", f.px(xs[i]), f.py(ys[i]));
  os << "\"/>\n";
  for (std::size_t i = 0; i < xs.size(); ++i)
    os << fmt::format(R"(<circle cx="{:.1f}" cy="{:.1f}" r="3" fill="{}"/>)", f.px(xs[i]), f.py(ys[i]), color) << '\n';
}

std::string file_stem(std::string_view name) {
  std::string s(name);
  std::replace(s.begin(), s.end(), ' ', '_');
  return s;
}

}  // namespace

std::vector<std::filesystem::path> emit_plots(const ComparisonSummary& s, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  std::vector<std::filesystem::path> out;
  if (s.a.pool_fraction.empty()) return out;

  const double xmin = std::min(s.a.pool_fraction.front(), s.b.pool_fraction.front());
  const double xmax = std::max(s.a.pool_fraction.back(), s.b.pool_fraction.back());
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    Frame f;
    f.x0 = xmin;
    f.x1 = xmax > xmin ? xmax : xmin + 0.01;
    f.y0 = 0.0;
    f.y1 = 1.0;
    std::ostringstream os;
    svg_axes(os, f, fmt::format("{} AP", display_name(class_at(c))), "labeled pool fraction", "AP");
    for (const auto* series : {&s.a, &s.b}) {
      std::vector<double> ys;
      for (const auto& ap : series->class_ap) ys.push_back(ap[c]);
      const bool first = series == &s.a;
      svg_polyline(os, f, series->pool_fraction, ys, first ? "#d62728" : "#1f77b4", first ? "" : "6,3");
      const double ly = f.top + (first ? 10 : 28);
      os << fmt::format(R"(<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{3}" stroke-width="2"/>)",
                        f.width - f.right + 10, ly, f.width - f.right + 34, first ? "#d62728" : "#1f77b4")
         << '\n';
      os << fmt::format(R"(<text x="{}" y="{}">{}</text>)", f.width - f.right + 38, ly + 4, series->method) << '\n';
    }
    os << "</svg>\n";
    const auto path = dir / fmt::format("ap_{}.svg", file_stem(detection_name(class_at(c))));
    write_file(path, os.str());
    out.push_back(path);
  }

  for (const auto* series : {&s.a, &s.b}) {
    Frame f;
    f.x0 = -0.5;
    f.x1 = static_cast<double>(series->class_distribution.size()) - 0.5;
    f.y0 = 0.0;
    f.y1 = 1.0;
    std::ostringstream os;
    svg_axes(os, f, fmt::format("labeled objects by class ({})", series->method), "round", "share");
    const double bar = 0.7 * (f.px(1.0) - f.px(0.0));
    for (std::size_t r = 0; r < series->class_distribution.size(); ++r) {
      double acc = 0.0;
      const double cx = f.px(static_cast<double>(r));
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const double v = series->class_distribution[r][c];
        os << fmt::format(R"(<rect x="{:.1f}" y="{:.1f}" width="{:.1f}" height="{:.1f}" fill="{}"/>)", cx - bar / 2,
                          f.py(acc + v), bar, f.py(acc) - f.py(acc + v), kPalette[c])
           << '\n';
        acc += v;
      }
      os << fmt::format(R"(<text x="{:.1f}" y="{}" text-anchor="middle">{}</text>)", cx, f.height - f.bottom + 14,
                        percent(series->pool_fraction[r]))
         << '\n';
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const double ly = f.top + 14.0 * static_cast<double>(c);
      os << fmt::format(R"(<rect x="{}" y="{}" width="10" height="10" fill="{}"/>)", f.width - f.right + 10, ly,
                        kPalette[c])
         << '\n';
      os << fmt::format(R"(<text x="{}" y="{}">{}</text>)", f.width - f.right + 24, ly + 9, display_name(class_at(c)))
         << '\n';
    }
    os << "</svg>\n";
    const auto path = dir / fmt::format("class_distribution_{}.svg", file_stem(series->method));
    write_file(path, os.str());
    out.push_back(path);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Replicas

ReplicaAggregate aggregate(const std::vector<RunReport>& reports) {
  ReplicaAggregate agg;
  agg.replicas = reports.size();
  if (reports.empty()) return agg;
  agg.method = std::string(to_string(reports.front().method));
  std::size_t rounds = reports.front().rounds.size();
  for (const auto& r : reports) rounds = std::min(rounds, r.rounds.size());
  agg.rounds.resize(rounds);
  for (std::size_t r = 0; r < rounds; ++r) {
    for (std::size_t m = 0; m < kAllMetrics.size(); ++m) {
      double sum = 0.0, sq = 0.0;
      for (const auto& rep : reports) sum += metric_value(rep.rounds[r].eval, kAllMetrics[m]);
      const double mean = sum / static_cast<double>(reports.size());
      for (const auto& rep : reports) {
        const double d = metric_value(rep.rounds[r].eval, kAllMetrics[m]) - mean;
        sq += d * d;
      }
      const double sd = reports.size() > 1 ? std::sqrt(sq / static_cast<double>(reports.size() - 1)) : 0.0;
      agg.rounds[r][m] = MeanStd{mean, sd};
    }
  }
  return agg;
}

std::string format_aggregate(const ReplicaAggregate& agg) {
  std::ostringstream os;
  os << fmt::format("method: {}   replicas: {}   (mean +- sd)\n", agg.method, agg.replicas);
  os << fmt::format("{:>5}", "Round");
  for (Metric m : kAllMetrics) os << fmt::format(" | {:^15}", to_string(m));
  os << '\n';
  for (std::size_t r = 0; r < agg.rounds.size(); ++r) {
    os << fmt::format("{:>5}", r + 1);
    for (const MeanStd& v : agg.rounds[r]) os << fmt::format(" | {:.4f}+-{:.4f}", v.mean, v.stddev);
    os << '\n';
  }
  return os.str();
}

}  // namespace alsim
