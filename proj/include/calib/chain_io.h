#pragma once

#include "calib/sampler.h"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace calib
{

/// Chain store: header `chain_id,iteration,<parameters...>,log_posterior,gof,accepted`, one row per
/// recorded state, doubles in shortest round-trip form. read(write(chain)) reproduces every stored
/// double bit for bit; metadata other than chain_id lives in the sidecar.
void write_chain_csv(std::ostream& out, const Chain& chain);
void write_chain_csv(const std::filesystem::path& path, const Chain& chain);

/// Throws ParseError carrying the 1-based line of the first malformed row.
Chain read_chain_csv(std::istream& in, const std::string& source_name = "<stream>");
Chain read_chain_csv(const std::filesystem::path& path);

std::string chain_metadata_to_json(const ChainMetadata& metadata);
ChainMetadata chain_metadata_from_json(std::string_view text, const std::string& source_name = "<string>");

/// `chain_<id>.csv` plus its `chain_<id>.meta.json` sidecar.
std::filesystem::path chain_csv_path(const std::filesystem::path& dir, std::size_t chain_id);
std::filesystem::path chain_metadata_path(const std::filesystem::path& dir, std::size_t chain_id);

void write_chain_set(const std::filesystem::path& dir, const ChainSet& chains);

/// Every chain_<k>.csv in the directory, ordered by k, with sidecars when present. Throws ParseError
/// when the parameter headers differ.
ChainSet read_chain_set(const std::filesystem::path& dir);

/// `iteration,chain_1,...,chain_K` with the GOF of every recorded state.
void write_gof_trace(std::ostream& out, const ChainSet& chains);

/// Writes text to path through a sibling temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

} // namespace calib
