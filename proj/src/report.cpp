#include "slnl/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace slnl {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(line);
  while (std::getline(in, item, '\t')) out.push_back(item);
  return out;
}

}  // namespace

bool RunReport::all_checks_pass() const {
  for (const CheckResult& c : checks)
    if (!c.pass) return false;
  return true;
}

std::string write_report(const RunReport& r) {
  std::ostringstream out;
  out << "command = " << r.command << "\n";
  out << "seed = " << r.seed << "\n";
  out << "wall_seconds = " << fmt(r.wall_seconds) << "\n";
  if (!r.config.empty()) {
    out << "[config]\n";
    for (const auto& [k, v] : r.config) out << k << " = " << v << "\n";
  }
  if (!r.final_values.empty()) {
    out << "[final]\n";
    for (const auto& [k, v] : r.final_values) out << k << " = " << v << "\n";
  }
  if (!r.metrics.empty()) {
    out << "[metrics]\n";
    out << "epoch\tlr\ttrain_loss\ttrain_acc\tval_loss\tval_acc\n";
    for (const EpochMetrics& m : r.metrics)
      out << m.epoch << "\t" << fmt(m.lr) << "\t" << fmt(m.train_loss) << "\t"
          << fmt(m.train_acc) << "\t" << fmt(m.val_loss) << "\t" << fmt(m.val_acc) << "\n";
  }
  if (!r.checks.empty()) {
    out << "[checks]\n";
    out << "name\ttolerance\tobserved\tpass\n";
    for (const CheckResult& c : r.checks)
      out << c.name << "\t" << fmt(c.tolerance) << "\t" << fmt(c.observed) << "\t"
          << (c.pass ? 1 : 0) << "\n";
  }
  if (!r.table.empty()) {
    out << "[table]\n";
    out << "label\taccuracy";
    if (!r.table_extra_name.empty()) out << "\t" << r.table_extra_name;
    out << "\n";
    for (const AblationRow& row : r.table) {
      out << row.label << "\t" << fmt(row.accuracy);
      if (!r.table_extra_name.empty()) out << "\t" << fmt(row.extra);
      out << "\n";
    }
  }
  return out.str();
}

void save_report(const std::string& path, const RunReport& report) {
  std::ofstream out(path);
  check(out.good(), "report: cannot open " + path);
  out << write_report(report);
  check(out.good(), "report: write failed for " + path);
}

RunReport parse_report(const std::string& text) {
  RunReport r;
  std::istringstream in(text);
  std::string line;
  std::string section;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      header_seen = false;
      continue;
    }
    if (section.empty() || section == "config" || section == "final") {
      std::size_t eq = line.find('=');
      check(eq != std::string::npos, "report: malformed line: " + line);
      std::string key = line.substr(0, eq);
      std::string value = line.substr(eq + 1);
      while (!key.empty() && key.back() == ' ') key.pop_back();
      while (!value.empty() && value.front() == ' ') value.erase(value.begin());
      if (section.empty()) {
        if (key == "command")
          r.command = value;
        else if (key == "seed")
          r.seed = std::stoull(value);
        else if (key == "wall_seconds")
          r.wall_seconds = std::stod(value);
        else
          fail("report: unknown top-level key " + key);
      } else if (section == "config") {
        r.config[key] = value;
      } else {
        r.final_values[key] = value;
      }
      continue;
    }
    std::vector<std::string> cols = split_tabs(line);
    if (!header_seen) {
      header_seen = true;
      if (section == "table" && cols.size() >= 3) r.table_extra_name = cols[2];
      continue;
    }
    if (section == "metrics") {
      check(cols.size() == 6, "report: metrics row needs 6 columns");
      EpochMetrics m;
      m.epoch = std::stoull(cols[0]);
      m.lr = std::stod(cols[1]);
      m.train_loss = std::stod(cols[2]);
      m.train_acc = std::stod(cols[3]);
      m.val_loss = std::stod(cols[4]);
      m.val_acc = std::stod(cols[5]);
      r.metrics.push_back(m);
    } else if (section == "checks") {
      check(cols.size() == 4, "report: checks row needs 4 columns");
      r.checks.push_back(
          CheckResult{cols[0], std::stod(cols[1]), std::stod(cols[2]), cols[3] == "1"});
    } else if (section == "table") {
      check(cols.size() >= 2, "report: table row needs >= 2 columns");
      AblationRow row;
      row.label = cols[0];
      row.accuracy = std::stod(cols[1]);
      if (cols.size() >= 3) row.extra = std::stod(cols[2]);
      r.table.push_back(row);
    } else {
      fail("report: unknown section " + section);
    }
  }
  return r;
}

RunReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw std::runtime_error("report: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_report(buf.str());
}

}  // namespace slnl
