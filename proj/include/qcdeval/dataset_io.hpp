#pragma once

// JSONL / CSV persistence of labeled datasets.
//
// JSONL: one object per line, {"id": str, "nu": int|null, "values": [...]}.
// `values` holds numbers for scalar data or equal-width arrays for
// multivariate data; a null `nu` means no changepoint.
//
// CSV (long format): header "id,t,nu,x0[,x1,...]", one row per frame, rows of
// a sequence contiguous with t = 0, 1, ...; an empty nu means no changepoint.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "qcdeval/simulate.hpp"

namespace qcdeval {

enum class DatasetFormat { Jsonl, Csv };

DatasetFormat parse_dataset_format(std::string_view text);
/// Guesses from the extension (".csv" -> CSV, anything else -> JSONL).
DatasetFormat format_from_path(const std::filesystem::path& path);

struct IngestReport {
  std::size_t n_read = 0;
  std::size_t n_dropped_short = 0;
  std::size_t n_rejected = 0;
  std::vector<std::string> diagnostics;
};

struct IngestResult {
  LabeledDataset dataset;
  IngestReport report;
};

/// Reads a dataset, dropping sequences shorter than `min_length` and
/// rejecting records whose changepoint does not index an observed frame.
/// Malformed records throw ValidationError naming the line.
IngestResult read_dataset(std::istream& in, DatasetFormat format, std::size_t min_length = 2);
IngestResult ingest(const std::filesystem::path& path, DatasetFormat format,
                    std::size_t min_length = 2);

void write_jsonl(std::ostream& out, const LabeledDataset& dataset);
void write_csv(std::ostream& out, const LabeledDataset& dataset);
/// Writes the dataset plus a "<path>.meta.json" sidecar holding its provenance.
void save_dataset(const std::filesystem::path& path, const LabeledDataset& dataset,
                  DatasetFormat format = DatasetFormat::Jsonl);

/// Hex SHA-256 of the canonical JSONL serialization.
std::string fingerprint(const LabeledDataset& dataset);

}  // namespace qcdeval
