#include "qcdeval/dataset_io.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_set>

#include "format.hpp"

namespace qcdeval {

DatasetFormat parse_dataset_format(std::string_view text) {
  if (text == "jsonl" || text == "JSONL") return DatasetFormat::Jsonl;
  if (text == "csv" || text == "CSV") return DatasetFormat::Csv;
  throw ValidationError("unknown dataset format: " + std::string(text));
}

DatasetFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DatasetFormat::Csv : DatasetFormat::Jsonl;
}

namespace {

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
  throw ValidationError("line " + std::to_string(line) + ": " + what);
}

// Shared acceptance logic for a fully parsed record.
void accept_record(IngestResult& res, std::unordered_set<std::string>& ids, std::size_t line,
                   SequenceMeta meta, Series values, std::size_t min_length) {
  ++res.report.n_read;
  if (!ids.insert(meta.id).second) malformed(line, "duplicate id '" + meta.id + "'");
  meta.length = static_cast<Frame>(values.frames());
  if (values.frames() < min_length) {
    ++res.report.n_dropped_short;
    return;
  }
  if (meta.changepoint && *meta.changepoint >= meta.length) {
    ++res.report.n_rejected;
    res.report.diagnostics.push_back("line " + std::to_string(line) + ": sequence '" + meta.id +
                                     "' has nu = " + std::to_string(*meta.changepoint) +
                                     " >= length " + std::to_string(meta.length) + "; rejected");
    return;
  }
  res.dataset.metas.push_back(std::move(meta));
  res.dataset.values.push_back(std::move(values));
}

Series parse_values(const nlohmann::json& v, std::size_t line) {
  if (!v.is_array() || v.empty()) malformed(line, "'values' must be a non-empty array");
  if (v.front().is_array()) {
    const std::size_t dim = v.front().size();
    if (dim == 0) malformed(line, "empty feature vector");
    std::vector<double> flat;
    flat.reserve(dim * v.size());
    for (const auto& frame : v) {
      if (!frame.is_array() || frame.size() != dim) malformed(line, "ragged feature vectors");
      for (const auto& x : frame) {
        if (!x.is_number()) malformed(line, "non-numeric value");
        flat.push_back(x.get<double>());
      }
    }
    return Series(dim, std::move(flat));
  }
  std::vector<double> xs;
  xs.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) malformed(line, "non-numeric value");
    xs.push_back(x.get<double>());
  }
  return Series(std::move(xs));
}

void read_jsonl(std::istream& in, IngestResult& res, std::size_t min_length) {
  std::unordered_set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      malformed(line, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) malformed(line, "record must be a JSON object");
    if (!rec.contains("id") || !rec["id"].is_string()) malformed(line, "missing string 'id'");
    if (!rec.contains("values")) malformed(line, "missing 'values'");
    if (!rec.contains("nu")) malformed(line, "missing 'nu' (use null for no change)");
    SequenceMeta meta;
    meta.id = rec["id"].get<std::string>();
    if (!rec["nu"].is_null()) {
      const auto& nu = rec["nu"];
      if (!nu.is_number_integer() || nu.get<std::int64_t>() < 0) {
        malformed(line, "'nu' must be a non-negative integer or null");
      }
      meta.changepoint = nu.get<Frame>();
    }
    accept_record(res, ids, line, std::move(meta), parse_values(rec["values"], line), min_length);
  }
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty() && item.back() == '\r') item.pop_back();
    out.push_back(item);
  }
  if (!text.empty() && text.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    malformed(line, "not a number: '" + s + "'");
  }
}

Frame parse_frame(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size() || v < 0) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    malformed(line, "not a non-negative integer: '" + s + "'");
  }
}

void read_csv(std::istream& in, IngestResult& res, std::size_t min_length) {
  std::unordered_set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  if (!std::getline(in, text)) return;
  ++line;
  const auto header = split_csv(text);
  if (header.size() < 4 || header[0] != "id" || header[1] != "t" || header[2] != "nu") {
    malformed(line, "expected header 'id,t,nu,x0[,x1,...]'");
  }
  const std::size_t dim = header.size() - 3;

  SequenceMeta meta;
  std::vector<double> flat;
  std::size_t start_line = 0;
  bool open = false;
  auto flush = [&] {
    if (!open) return;
    accept_record(res, ids, start_line, std::move(meta), Series(dim, std::move(flat)), min_length);
    meta = {};
    flat.clear();
    open = false;
  };

  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(text);
    if (cells.size() != header.size()) malformed(line, "wrong number of columns");
    if (cells[0].empty()) malformed(line, "empty id");
    if (!open || cells[0] != meta.id) {
      flush();
      if (ids.count(cells[0])) malformed(line, "rows of '" + cells[0] + "' are not contiguous");
      open = true;
      start_line = line;
      meta.id = cells[0];
      if (!cells[2].empty()) meta.changepoint = parse_frame(cells[2], line);
    } else {
      const MaybeFrame nu = cells[2].empty() ? MaybeFrame{} : MaybeFrame{parse_frame(cells[2], line)};
      if (nu != meta.changepoint) malformed(line, "nu changes within sequence '" + meta.id + "'");
    }
    const Frame t = parse_frame(cells[1], line);
    if (static_cast<std::size_t>(t) != flat.size() / dim) {
      malformed(line, "frame index " + cells[1] + " out of order");
    }
    for (std::size_t d = 0; d < dim; ++d) flat.push_back(parse_double(cells[3 + d], line));
  }
  flush();
}

nlohmann::json record_json(const SequenceMeta& meta, const Series& values) {
  nlohmann::json rec;
  rec["id"] = meta.id;
  rec["nu"] = meta.changepoint ? nlohmann::json(*meta.changepoint) : nlohmann::json(nullptr);
  if (values.dim == 1) {
    rec["values"] = values.data;
  } else {
    auto arr = nlohmann::json::array();
    for (std::size_t t = 0; t < values.frames(); ++t) {
      const auto f = values.frame(t);
      arr.push_back(std::vector<double>(f.begin(), f.end()));
    }
    rec["values"] = std::move(arr);
  }
  return rec;
}

}  // namespace

IngestResult read_dataset(std::istream& in, DatasetFormat format, std::size_t min_length) {
  IngestResult res;
  if (format == DatasetFormat::Jsonl) {
    read_jsonl(in, res, min_length);
  } else {
    read_csv(in, res, min_length);
  }
  return res;
}

IngestResult ingest(const std::filesystem::path& path, DatasetFormat format,
                    std::size_t min_length) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  IngestResult res = read_dataset(in, format, min_length);
  res.dataset.provenance = {{"path", path.string()}};
  return res;
}

void write_jsonl(std::ostream& out, const LabeledDataset& dataset) {
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out << record_json(dataset.metas[i], dataset.values[i]).dump() << '\n';
  }
}

void write_csv(std::ostream& out, const LabeledDataset& dataset) {
  const std::size_t dim = dataset.values.empty() ? 1 : dataset.values.front().dim;
  out << "id,t,nu";
  for (std::size_t d = 0; d < dim; ++d) out << ",x" << d;
  out << '\n';
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& meta = dataset.metas[i];
    const auto& values = dataset.values[i];
    if (values.dim != dim) throw ValidationError("CSV output needs a common feature width");
    const std::string nu = meta.changepoint ? std::to_string(*meta.changepoint) : "";
    for (std::size_t t = 0; t < values.frames(); ++t) {
      out << meta.id << ',' << t << ',' << nu;
      for (double x : values.frame(t)) out << ',' << detail::format_double(x);
      out << '\n';
    }
  }
}

void save_dataset(const std::filesystem::path& path, const LabeledDataset& dataset,
                  DatasetFormat format) {
  {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    if (format == DatasetFormat::Jsonl) {
      write_jsonl(out, dataset);
    } else {
      write_csv(out, dataset);
    }
    if (!out) throw Error("write failed: " + path.string());
  }
  std::ofstream meta(path.string() + ".meta.json");
  if (!meta) throw Error("cannot write " + path.string() + ".meta.json");
  meta << nlohmann::json{{"provenance", dataset.provenance},
                         {"n_sequences", dataset.size()},
                         {"fingerprint", fingerprint(dataset)}}
              .dump(2)
       << '\n';
}

std::string fingerprint(const LabeledDataset& dataset) {
  std::ostringstream canon;
  write_jsonl(canon, dataset);
  const std::string bytes = canon.str();

  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

}  // namespace qcdeval
