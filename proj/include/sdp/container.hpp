#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdp/cpals.hpp"
#include "sdp/schema.hpp"

namespace sdp {

// SDPB container, version 1:
//   magic "SDPB" | u8 version | u32le header length | UTF-8 JSON header |
//   float32le payload (concatenated records, row-major) | u32le CRC32(payload)
// Header keys are written in sorted order so equal content means equal bytes.

enum class ContainerErrorCode {
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kSizeMismatch,
  kChecksumMismatch,
  kHeaderParse,
};

class ContainerError : public IoError {
public:
  ContainerError(ContainerErrorCode code, const std::string& msg)
      : IoError(msg), code_(code) {}
  ContainerErrorCode code() const { return code_; }

private:
  ContainerErrorCode code_;
};

struct PayloadRecord {
  nlohmann::json meta;              // merged into the header's records array
  std::vector<std::int64_t> dims;   // row-major extents
  std::vector<float> values;        // prod(dims) entries

  std::int64_t expected_size() const;
};

struct Container {
  nlohmann::json header;            // top-level fields except "records"
  std::vector<PayloadRecord> records;
};

std::vector<std::uint8_t> serialize_container(const Container& c);
Container deserialize_container(const std::vector<std::uint8_t>& bytes);

void write_container(const std::string& path, const Container& c);
Container read_container(const std::string& path);

// ---- typed views -------------------------------------------------------------

nlohmann::json labels_to_json(const TaskLabels& labels);
TaskLabels labels_from_json(const nlohmann::json& j);

Container container_from_recording(const CsiRecording& rec);
CsiRecording recording_from_container(const Container& c);

struct BlockSet {
  std::vector<DataBlock> blocks;
  WindowConfig window;
  std::vector<std::pair<int, int>> pair_order;
  std::vector<double> subcarrier_freqs_hz;
  std::optional<SessionStats> normalization;
};

Container container_from_blocks(const BlockSet& set);
BlockSet blocks_from_container(const Container& c);

struct DecompositionItem {
  CpDecomposition decomp;
  TaskLabels labels;
  double center_timestamp = 0.0;
  std::string session_id;
  std::string user_id;
  int block_index = 0;
  double amp_mean = 0.0;  // of the decomposed real view
  double amp_std = 0.0;
};

struct DecompositionSet {
  CpConfig cp;
  std::string view = "amplitude";
  std::vector<DecompositionItem> items;
};

Container container_from_decompositions(const DecompositionSet& set);
DecompositionSet decompositions_from_container(const Container& c);

struct DescriptorRow {
  Vector h;
  TaskLabels labels;
  std::string session_id;
  std::string user_id;
  int block_index = 0;
  double center_timestamp = 0.0;
};

struct DescriptorTable {
  int layout_version = 1;
  int rank = 0;
  std::vector<DescriptorRow> rows;

  int dim() const { return rows.empty() ? 0 : static_cast<int>(rows[0].h.size()); }
};

Container container_from_descriptors(const DescriptorTable& table);
DescriptorTable descriptors_from_container(const Container& c);

// One row per block: identity columns, labels, then the h entries.
std::string descriptor_table_csv(const DescriptorTable& table);

}  // namespace sdp
