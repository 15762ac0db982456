#include "carlab/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace carlab::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string g4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Parses a file written by to_csv.
Table read_csv(const fs::path& p) {
  std::istringstream in(read_text(p));
  Table t;
  t.name = p.stem().string();
  std::string line;
  if (!std::getline(in, line)) throw Error(p.string() + " is empty");
  std::istringstream head(line);
  for (std::string cell; std::getline(head, cell, ',');) t.columns.push_back(cell);
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream cells(line);
    for (std::string cell; std::getline(cells, cell, ',');) row.push_back(std::strtod(cell.c_str(), nullptr));
    t.add(row);
  }
  return t;
}

const char* kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

}  // namespace

std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t j = 0; j < t.columns.size(); ++j) out += (j ? "," : "") + t.columns[j];
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out += (j ? "," : "") + g17(row[j]);
    out += '\n';
  }
  return out;
}

std::string to_svg(const Table& t) {
  constexpr double W = 640, H = 420, L = 80, R = 20, Tm = 30, B = 60;
  const auto map = [](double v, bool lg) { return lg ? std::log10(v) : v; };
  const auto usable = [](double v, bool lg) { return std::isfinite(v) && (!lg || v > 0.0); };

  const auto xs = t.column(t.plot_x);
  std::vector<std::vector<double>> ys;
  for (const auto& c : t.plot_y) ys.push_back(t.column(c));

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (std::size_t s = 0; s < ys.size(); ++s) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!usable(xs[i], t.log_x) || !usable(ys[s][i], t.log_y)) continue;
      x0 = std::min(x0, map(xs[i], t.log_x));
      x1 = std::max(x1, map(xs[i], t.log_x));
      y0 = std::min(y0, map(ys[s][i], t.log_y));
      y1 = std::max(y1, map(ys[s][i], t.log_y));
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
  const auto py = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - Tm - B); };
  const auto label = [](double v, bool lg) { return lg ? "1e" + g4(v) : g4(v); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\">" << t.name << "</text>\n";
  os << "<rect x=\"" << L << "\" y=\"" << Tm << "\" width=\"" << W - L - R << "\" height=\"" << H - Tm - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << label(xv, t.log_x)
       << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << label(yv, t.log_y)
       << "</text>\n";
  }
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 20 << "\" text-anchor=\"middle\">" << t.plot_x
     << (t.log_x ? " (log)" : "") << "</text>\n";
  for (std::size_t s = 0; s < ys.size(); ++s) {
    const char* colour = kColours[s % 5];
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (usable(xs[i], t.log_x) && usable(ys[s][i], t.log_y)) {
        os << px(map(xs[i], t.log_x)) << ',' << py(map(ys[s][i], t.log_y)) << ' ';
      }
    }
    os << "\"/>\n";
    os << "<text x=\"" << L + 10 << "\" y=\"" << Tm + 16 + 14 * s << "\" fill=\"" << colour << "\">"
       << t.plot_y[s] << (t.log_y ? " (log)" : "") << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void write_table(const fs::path& dir, const Table& t) {
  write_text(dir / (t.name + ".csv"), to_csv(t));
  if (!t.plot_y.empty()) write_text(dir / (t.name + ".svg"), to_svg(t));
}

std::string emit_report(const fs::path& run_dir) {
  const fs::path summary_path = run_dir / "summary.json";
  if (!fs::is_regular_file(summary_path)) {
    throw Error("run directory " + run_dir.string() + " is incomplete: no summary.json");
  }
  json summary;
  try {
    summary = json::parse(read_text(summary_path));
  } catch (const json::exception& e) {
    throw Error(summary_path.string() + ": " + e.what());
  }
  if (!summary.contains("checks") || !summary["checks"].is_array()) {
    throw Error(summary_path.string() + " lists no checks");
  }
  for (const auto& c : summary["checks"]) {
    for (const auto& f : c.value("tables", json::array())) {
      if (!fs::is_regular_file(run_dir / f.get<std::string>())) {
        throw Error("run directory " + run_dir.string() + " is incomplete: missing " + f.get<std::string>());
      }
    }
  }

  std::ostringstream os;
  os << "subcommand: " << summary.value("subcommand", "?") << "\n";
  os << "seed: " << summary.value("seed", 0ULL) << "\n";
  os << "overall: " << (summary.value("pass", false) ? "PASS" : "FAIL") << "\n\n";

  os << "pass/fail grid\n";
  for (const auto& c : summary["checks"]) {
    os << "  " << std::setw(2) << c.value("criterion", 0) << "  " << std::left << std::setw(32)
       << c.value("name", "") << std::right << (c.value("pass", false) ? "PASS" : "FAIL") << "  "
       << c.value("detail", "") << "\n";
  }

  for (const auto& c : summary["checks"]) {
    const json& m = c.value("metrics", json::object());
    if (m.contains("thresholds")) {
      const auto& th = m["thresholds"];
      os << "\nthresholds (criterion " << c.value("criterion", 0) << ")\n";
      os << "  lambda   " << g4(th.value("lambda", 0.0)) << "\n";
      os << "  delta1   " << g4(th.value("delta1", 0.0)) << "\n";
      for (std::size_t i = 0; i < th["N"].size(); ++i) {
        os << "  delta(" << th["N"][i].get<int>() << ") " << g4(th["deltaN"][i].get<double>()) << "\n";
      }
      os << "  delta0   " << g4(th.value("delta0", 0.0)) << "\n";
    }
    if (m.contains("kappa_hat")) {
      os << "\nHoelder fit\n";
      os << "  kappa_hat " << g4(m["kappa_hat"].get<double>()) << "  R^2 " << g4(m["r2"].get<double>())
         << "  decades " << g4(m["decades"].get<double>()) << "\n";
      os << "  M " << g4(m["M"].get<double>()) << "  delta0 " << g4(m["delta0"].get<double>()) << "  c "
         << g4(m["c_fit"].get<double>()) << "  kappa(c) " << g4(m["kappa_from_c"].get<double>()) << "\n";
    }
  }

  const auto print_table = [&](const std::string& file, const std::vector<std::string>& cols) {
    if (!fs::is_regular_file(run_dir / file)) return;
    const Table t = read_csv(run_dir / file);
    os << "\n" << t.name << "\n ";
    for (const auto& c : cols) os << ' ' << std::setw(19) << c;
    os << "\n";
    std::vector<std::vector<double>> data;
    for (const auto& c : cols) data.push_back(t.column(c));
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      os << " ";
      for (const auto& d : data) os << ' ' << std::setw(19) << g4(d[i]);
      os << "\n";
    }
  };
  print_table("carleman_ratios.csv", {"s", "max_C_emp"});
  print_table("energy_shift.csv", {"nodes", "Nt", "C_emp", "identity_rel_error"});
  print_table("continuation_noise_sweep.csv", {"level", "D", "error"});

  const std::string text = os.str();
  write_text(run_dir / "report.txt", text);
  return text;
}

}  // namespace carlab::cli
