// SPDX-License-Identifier: Apache-2.0
#include "auglab/results.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "auglab/errors.hpp"

namespace auglab {

const char* kResultsHeader =
    "run_id,scheme,seed,cell_ratio,cell_magnitude,stage,epoch,"
    "train_loss,val_accuracy,pruning_ratio,magnitude_in_effect";

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

void write_results_csv(const std::string& path, const std::vector<RunRecord>& records) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << kResultsHeader << "\n";
  for (const RunRecord& r : records) {
    for (const EpochRow& row : r.rows) {
      os << r.run_id << "," << r.scheme << "," << r.seed << "," << fmt_double(r.cell_ratio)
         << "," << r.cell_magnitude << "," << row.stage << "," << row.epoch << ","
         << fmt_double(row.train_loss) << "," << fmt_double(row.val_accuracy) << ","
         << fmt_double(row.pruning_ratio) << "," << fmt_double(row.magnitude_in_effect) << "\n";
    }
  }
  if (!os) throw IoError("write failed for " + path);
}

std::vector<RunRecord> parse_results_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != kResultsHeader) {
    throw FormatError(path + ": unexpected results header");
  }
  std::vector<RunRecord> records;
  size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 11) {
      throw FormatError(path + ": line " + std::to_string(lineno) + " has " +
                        std::to_string(f.size()) + " fields, expected 11");
    }
    if (records.empty() || records.back().run_id != f[0]) {
      RunRecord r;
      r.run_id = f[0];
      r.scheme = f[1];
      r.seed = std::stoull(f[2]);
      r.cell_ratio = std::stod(f[3]);
      r.cell_magnitude = std::stoi(f[4]);
      records.push_back(std::move(r));
    }
    EpochRow row;
    row.stage = std::stoi(f[5]);
    row.epoch = std::stoi(f[6]);
    row.train_loss = std::stod(f[7]);
    row.val_accuracy = std::stod(f[8]);
    row.pruning_ratio = std::stod(f[9]);
    row.magnitude_in_effect = std::stod(f[10]);
    records.back().rows.push_back(row);
  }
  return records;
}

void write_summary_csv(const std::string& path, const std::vector<RunRecord>& records) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << "run_id,scheme,seed,final_val_accuracy\n";
  for (const RunRecord& r : records) {
    if (r.rows.empty()) continue;
    os << r.run_id << "," << r.scheme << "," << r.seed << ","
       << fmt_double(r.final_accuracy()) << "\n";
  }
}

void write_timings_csv(const std::string& path, const std::vector<RunRecord>& records) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << "run_id,stage,epoch,wall_time\n";
  for (const RunRecord& r : records) {
    for (const EpochRow& row : r.rows) {
      os << r.run_id << "," << row.stage << "," << row.epoch << "," << fmt_double(row.wall_time)
         << "\n";
    }
  }
}

void emit_results(const std::vector<RunRecord>& records, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());

  write_results_csv(out_dir + "/results.csv", records);
  write_summary_csv(out_dir + "/summary.csv", records);
  write_timings_csv(out_dir + "/timings.csv", records);

  // grid cells carry (ratio, magnitude) metadata; shape them for plotting
  std::map<double, std::vector<const RunRecord*>> by_ratio;
  for (const RunRecord& r : records) {
    if (r.cell_ratio >= 0.0 && !r.rows.empty()) by_ratio[r.cell_ratio].push_back(&r);
  }
  if (by_ratio.empty()) return;
  std::filesystem::create_directories(out_dir + "/plotdata", ec);
  if (ec) throw IoError("cannot create plotdata directory: " + ec.message());
  for (const auto& [ratio, cells] : by_ratio) {
    char name[96];
    std::snprintf(name, sizeof(name), "%s/plotdata/magnitude_accuracy_p%g.csv", out_dir.c_str(),
                  ratio);
    std::ofstream os(name, std::ios::trunc);
    if (!os) throw IoError(std::string("cannot open ") + name + " for writing");
    os << "magnitude,seed,val_accuracy\n";
    std::vector<const RunRecord*> sorted = cells;
    std::sort(sorted.begin(), sorted.end(), [](const RunRecord* a, const RunRecord* b) {
      return std::tie(a->cell_magnitude, a->seed) < std::tie(b->cell_magnitude, b->seed);
    });
    for (const RunRecord* r : sorted) {
      os << r->cell_magnitude << "," << r->seed << "," << fmt_double(r->final_accuracy()) << "\n";
    }
  }
}

}  // namespace auglab
