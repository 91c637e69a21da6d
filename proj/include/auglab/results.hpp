// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "auglab/trainspec.hpp"

namespace auglab {

// results.csv holds one row per epoch per run. Wall times are deliberately
// kept out of it (they go to timings.csv) so identical configs reproduce the
// file byte for byte.
extern const char* kResultsHeader;

void write_results_csv(const std::string& path, const std::vector<RunRecord>& records);
std::vector<RunRecord> parse_results_csv(const std::string& path);

void write_summary_csv(const std::string& path, const std::vector<RunRecord>& records);
void write_timings_csv(const std::string& path, const std::vector<RunRecord>& records);

// Writes results.csv, summary.csv, timings.csv and, when grid-cell records
// are present, plotdata/magnitude_accuracy_p<ratio>.csv (magnitude vs final
// validation accuracy per pruning ratio).
void emit_results(const std::vector<RunRecord>& records, const std::string& out_dir);

}  // namespace auglab
