#ifndef WBIC_IO_HPP
#define WBIC_IO_HPP

#include <string>

#include "wbic/mcmc.hpp"
#include "wbic/models.hpp"

namespace wbic {

// Shortest round-trip decimal rendering; every double this project serializes
// goes through here so re-rendering parsed output is byte-stable.
std::string format_double(double v);

// CSV with a header row: x0..x{M-1} then y0..y{N-1} for regression records,
// x0..x{d-1} for plain records.
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(const std::string& text);
void write_dataset_csv(const Dataset& data, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

// Truth as JSON: matrices as row-major nested arrays, stds as numbers.
std::string truth_to_json_text(const RrrTruth& truth);
RrrTruth truth_from_json_text(const std::string& text);
void write_truth_json(const RrrTruth& truth, const std::string& path);
RrrTruth read_truth_json(const std::string& path);

enum class ChainDumpFormat { csv, binary };

// Writes <prefix>.csv (draw index, d parameter columns, nll) or <prefix>.bin,
// plus a <prefix>.json sidecar with config, seed, acceptance rate and
// fingerprints.
void write_chain(const Chain& chain, const ChainConfig& config, const std::string& prefix,
                 ChainDumpFormat format);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

std::string hex64(std::uint64_t v);

}  // namespace wbic

#endif
