#pragma once

#include <string>
#include <vector>

#include "fedoras/fedcore.hpp"
#include "fedoras/finetune.hpp"
#include "fedoras/search.hpp"

namespace fedoras {

/// Shortest round-tripping decimal form of a double ("%.17g" trimmed).
std::string fmt_double(double v);

std::string path_to_string(const Path& p);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

std::string round_csv(const std::vector<RoundReport>& rows);
std::string search_csv(const std::vector<SearchTraceRow>& rows);
std::string finetune_csv(int tier, const FinetuneHistory& hist);

/// Model files: <stem>.json manifest (space hash, path, tier, tensor shapes)
/// plus <stem>.bin with the tensors concatenated as little-endian float64.
void save_model(const std::string& stem, const SearchSpace& space, const TierModel& model);
TierModel load_model(const std::string& stem, const SearchSpace& space);

std::uint64_t space_digest(const SearchSpace& space);

}  // namespace fedoras
