#include "adbatch/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace adbatch {

void write_text_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, target);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string run_record_csv(const RunRecord& record) {
  std::ostringstream out;
  const int d = record.final_design.dim();
  out << "round,k,N,r,realloc,criterion,error_rate,band_volume,contour_uncertainty,"
         "seconds_wall";
  for (int j = 0; j < d; ++j) out << ",x" << (j + 1);
  out << "\n";
  for (const RoundRow& row : record.rows) {
    out << row.round << "," << row.k << "," << row.budget << "," << row.r << ","
        << (row.realloc ? 1 : 0) << "," << format_double(row.criterion) << ","
        << format_double(row.error_rate) << "," << format_double(row.band_volume) << ","
        << format_double(row.contour_uncertainty) << "," << format_double(row.seconds);
    for (int j = 0; j < d; ++j) {
      out << "," << (row.x.size() == d ? format_double(row.x[j]) : "");
    }
    out << "\n";
  }
  return out.str();
}

std::vector<RoundRow> parse_run_csv(const std::string& text, int* dim) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("run csv: empty");
  int d = 0;
  {
    std::istringstream head(line);
    std::string col;
    while (std::getline(head, col, ',')) {
      if (col.size() > 1 && col[0] == 'x') ++d;
    }
  }
  if (dim) *dim = d;
  std::vector<RoundRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    // Trailing empty coordinate cells are dropped by getline; pad them back.
    while (cells.size() < static_cast<std::size_t>(10 + d)) cells.emplace_back();
    if (cells.size() < 10) {
      throw std::runtime_error("run csv: short row");
    }
    RoundRow row;
    row.round = std::stol(cells[0]);
    row.k = std::stol(cells[1]);
    row.budget = std::stol(cells[2]);
    row.r = std::stol(cells[3]);
    row.realloc = cells[4] == "1";
    row.criterion = std::stod(cells[5]);
    row.error_rate = std::stod(cells[6]);
    row.band_volume = std::stod(cells[7]);
    row.contour_uncertainty = std::stod(cells[8]);
    row.seconds = std::stod(cells[9]);
    if (!cells[10].empty()) {
      row.x.resize(d);
      for (int j = 0; j < d; ++j) row.x[j] = std::stod(cells[10 + static_cast<std::size_t>(j)]);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string design_csv(const ReplicatedDesign& design) {
  std::ostringstream out;
  const int d = design.dim();
  for (int j = 0; j < d; ++j) out << "x" << (j + 1) << ",";
  out << "replicates,batch_mean\n";
  for (long i = 0; i < design.k(); ++i) {
    for (int j = 0; j < d; ++j) out << format_double(design.inputs(i, j)) << ",";
    out << design.counts[i] << "," << format_double(design.means[i]) << "\n";
  }
  return out.str();
}

}  // namespace adbatch
