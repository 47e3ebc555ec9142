#pragma once

#include <cstddef>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace mixsig::cli {

/// Entry point of the `mixsig` tool. Returns the process exit code; on
/// failure writes one line `mixsig: error command=<c> kind=<k> message="<m>"`
/// to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct SweepRow {
    double value = 0.0;
    double mean_acc = 0.0;
    double std_acc = 0.0;
    std::size_t runs = 0;
};

struct SweepResult {
    std::string axis;  // noise_sigma | quant_bits | residue_rmse
    std::string column;  // CSV name of the axis column
    std::vector<SweepRow> rows;
    std::map<std::string, std::string> config;
    std::vector<std::string> notes;  // extra '#' lines
    double wall_seconds = 0.0;  // reported on stdout only, so reruns stay byte-identical
};

/// Header comments, a header row, then one row per axis value with
/// accuracies as fractions to 4 decimals.
std::string format_sweep_csv(const SweepResult& result);

/// True when every step satisfies mean[i+1] <= mean[i] + sqrt((s_i^2 + s_{i+1}^2) / 2).
bool non_increasing_within_pooled_std(const std::vector<SweepRow>& rows);

/// key=value lines; '#' starts a comment. Throws std::runtime_error with the
/// line number on malformed input.
std::map<std::string, std::string> parse_config_text(const std::string& text);

/// Comma- or whitespace-separated numbers.
std::vector<double> parse_number_list(const std::string& text);

}  // namespace mixsig::cli
