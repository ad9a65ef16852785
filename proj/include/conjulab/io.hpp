#ifndef CONJULAB_IO_HPP_
#define CONJULAB_IO_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "conjulab/experiments.hpp"

namespace conjulab::io {

// Shortest round-trip decimal for a 64-bit float; "NA" for NaN, "inf"/"-inf"
// for infinities.
std::string format_double(double v);

// Parse an ExperimentPlan from a flat sectioned key=value config file.
// Unknown keys are hard errors.
experiments::ExperimentPlan parse_config(const std::string& path);
experiments::ExperimentPlan parse_config_text(const std::string& text);

// IDX ingestion: big-endian magic 0x00000803 (images) / 0x00000801 (labels).
// Pixels scaled to [0,1]; labels one-hot in the file's class count.
opt::Dataset load_idx(const std::string& images_path,
                      const std::string& labels_path, Index limit);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// RFC-4180-style CSV: header row, "\n" newlines, NA sentinels, atomic
// temp-file + rename write.
void emit_csv(const Table& table, const std::string& path);

Table trace_table(const std::vector<experiments::TraceRow>& rows);
Table sweep_table(const std::vector<experiments::SweepRow>& rows);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;  // NaN entries break the polyline
};

// Self-contained deterministic SVG line chart (optionally log2-scaled y).
void emit_svg(const std::vector<Series>& series, const std::string& path,
              const std::string& title);

// FNV-1a content hash, hex string.
std::string hash_file(const std::string& path);

struct RunManifest {
  std::string run_id;
  std::string config_snapshot;
  std::vector<std::uint64_t> seeds;
  std::string artifact_version;
  std::vector<std::pair<std::string, std::string>> outputs;  // path, hash
};

void write_manifest(const RunManifest& manifest, const std::string& path);

}  // namespace conjulab::io

#endif  // CONJULAB_IO_HPP_
