#pragma once

#include <string>
#include <vector>

#include "adbatch/schemes.hpp"

namespace adbatch {

// Atomic text write (temp file + rename).
void write_text_file(const std::string& path, const std::string& content);

std::string format_double(double v);

// Per-round rows; the seconds_wall column is the one non-deterministic field.
std::string run_record_csv(const RunRecord& record);
std::vector<RoundRow> parse_run_csv(const std::string& text, int* dim = nullptr);

// Final replicated design: coordinates, replicate count and batch mean.
std::string design_csv(const ReplicatedDesign& design);

}  // namespace adbatch
