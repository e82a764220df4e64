#include "sdp/container.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <fstream>

namespace sdp {

namespace {

constexpr char kMagic[4] = {'S', 'D', 'P', 'B'};
constexpr std::uint8_t kVersion = 1;

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

std::uint32_t get_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

static_assert(sizeof(float) == 4, "payload assumes 32-bit IEEE floats");

}  // namespace

std::int64_t PayloadRecord::expected_size() const {
  std::int64_t n = 1;
  for (std::int64_t d : dims) n *= d;
  return n;
}

std::vector<std::uint8_t> serialize_container(const Container& c) {
  nlohmann::json header = c.header;
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : c.records) {
    if (r.expected_size() != static_cast<std::int64_t>(r.values.size()))
      throw IoError("container: record values do not match dims");
    nlohmann::json meta = r.meta;
    meta["dims"] = r.dims;
    records.push_back(meta);
  }
  header["records"] = records;
  const std::string header_str = header.dump();

  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kVersion);
  put_u32le(out, static_cast<std::uint32_t>(header_str.size()));
  out.insert(out.end(), header_str.begin(), header_str.end());

  const std::size_t payload_start = out.size();
  for (const auto& r : c.records) {
    const std::size_t offset = out.size();
    out.resize(offset + r.values.size() * 4);
    std::memcpy(out.data() + offset, r.values.data(), r.values.size() * 4);
  }
  const uLong crc = crc32(0L, out.data() + payload_start,
                          static_cast<uInt>(out.size() - payload_start));
  put_u32le(out, static_cast<std::uint32_t>(crc));
  return out;
}

Container deserialize_container(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4)
    throw ContainerError(ContainerErrorCode::kTruncated, "container: shorter than magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw ContainerError(ContainerErrorCode::kBadMagic, "container: bad magic");
  if (bytes.size() < 9)
    throw ContainerError(ContainerErrorCode::kTruncated, "container: missing fixed header");
  if (bytes[4] != kVersion)
    throw ContainerError(ContainerErrorCode::kVersionMismatch,
                         "container: unsupported version " + std::to_string(bytes[4]));
  const std::uint32_t header_len = get_u32le(bytes.data() + 5);
  if (bytes.size() < 9ull + header_len + 4ull)
    throw ContainerError(ContainerErrorCode::kTruncated, "container: truncated header or payload");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 9, bytes.begin() + 9 + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw ContainerError(ContainerErrorCode::kHeaderParse,
                         std::string("container: header parse failed: ") + e.what());
  }
  if (!header.contains("records") || !header["records"].is_array())
    throw ContainerError(ContainerErrorCode::kHeaderParse, "container: header lacks records");

  Container c;
  std::int64_t expected = 0;
  for (const auto& meta : header["records"]) {
    PayloadRecord r;
    r.meta = meta;
    if (!meta.contains("dims"))
      throw ContainerError(ContainerErrorCode::kHeaderParse, "container: record lacks dims");
    r.dims = meta["dims"].get<std::vector<std::int64_t>>();
    r.meta.erase("dims");
    expected += r.expected_size();
    c.records.push_back(std::move(r));
  }
  const std::int64_t available =
      static_cast<std::int64_t>(bytes.size()) - 9 - header_len - 4;
  if (available != expected * 4)
    throw ContainerError(ContainerErrorCode::kSizeMismatch,
                         "container: header promises " + std::to_string(expected * 4) +
                             " payload bytes, file carries " + std::to_string(available));

  const std::uint8_t* payload = bytes.data() + 9 + header_len;
  const uLong crc = crc32(0L, payload, static_cast<uInt>(available));
  const std::uint32_t stored = get_u32le(bytes.data() + bytes.size() - 4);
  if (static_cast<std::uint32_t>(crc) != stored)
    throw ContainerError(ContainerErrorCode::kChecksumMismatch,
                         "container: payload checksum mismatch");

  std::size_t offset = 0;
  for (auto& r : c.records) {
    const std::size_t n = static_cast<std::size_t>(r.expected_size());
    r.values.resize(n);
    std::memcpy(r.values.data(), payload + offset, n * 4);
    offset += n * 4;
  }
  header.erase("records");
  c.header = std::move(header);
  return c;
}

void write_container(const std::string& path, const Container& c) {
  const auto bytes = serialize_container(c);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path);
}

Container read_container(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return deserialize_container(bytes);
}

// ---- labels --------------------------------------------------------------------

nlohmann::json labels_to_json(const TaskLabels& labels) {
  nlohmann::json j;
  j["presence"] = labels.presence ? nlohmann::json(*labels.presence) : nlohmann::json();
  j["activity"] = labels.activity ? nlohmann::json(*labels.activity) : nlohmann::json();
  j["vitals"] =
      labels.vital_rate_hz ? nlohmann::json(*labels.vital_rate_hz) : nlohmann::json();
  return j;
}

TaskLabels labels_from_json(const nlohmann::json& j) {
  TaskLabels l;
  if (j.contains("presence") && !j["presence"].is_null())
    l.presence = j["presence"].get<bool>();
  if (j.contains("activity") && !j["activity"].is_null())
    l.activity = j["activity"].get<int>();
  if (j.contains("vitals") && !j["vitals"].is_null())
    l.vital_rate_hz = j["vitals"].get<double>();
  return l;
}

// ---- recordings ------------------------------------------------------------------

Container container_from_recording(const CsiRecording& rec) {
  rec.validate();
  const std::int64_t n = static_cast<std::int64_t>(rec.frames.size());
  const std::int64_t a = rec.n_pairs();
  const std::int64_t k = rec.n_subcarriers();

  Container c;
  c.header["kind"] = "recording";
  c.header["schema_version"] = 1;
  c.header["session_id"] = rec.session_id;
  c.header["user_id"] = rec.user_id;
  c.header["amplitudes_in_db"] = rec.amplitudes_in_db;
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : rec.pair_order) pairs.push_back({p.first, p.second});
  c.header["pair_order"] = pairs;
  c.header["subcarrier_ids"] = rec.subcarrier_ids;
  c.header["subcarrier_freqs_hz"] = rec.subcarrier_freqs_hz;
  if (!rec.adapter_name.empty()) {
    c.header["adapter"] = {{"name", rec.adapter_name},
                           {"version", rec.adapter_version},
                           {"source_subcarrier_ids", rec.source_subcarrier_ids}};
  }
  nlohmann::json ts = nlohmann::json::array(), labels = nlohmann::json::array();
  for (const auto& f : rec.frames) {
    ts.push_back(f.timestamp_s);
    labels.push_back(labels_to_json(f.labels));
  }
  c.header["timestamps"] = ts;
  c.header["labels"] = labels;

  PayloadRecord r;
  r.meta["name"] = "frames";
  r.dims = {n, a, k, 2};
  r.values.reserve(static_cast<std::size_t>(n * a * k * 2));
  for (const auto& f : rec.frames)
    for (std::int64_t i = 0; i < a; ++i)
      for (std::int64_t j = 0; j < k; ++j) {
        r.values.push_back(static_cast<float>(f.values(i, j).real()));
        r.values.push_back(static_cast<float>(f.values(i, j).imag()));
      }
  c.records.push_back(std::move(r));
  return c;
}

CsiRecording recording_from_container(const Container& c) {
  if (c.header.value("kind", "") != "recording")
    throw IoError("container kind is not 'recording'");
  if (c.records.size() != 1 || c.records[0].dims.size() != 4)
    throw IoError("recording container must hold one (N,A,K,2) record");
  const auto& r = c.records[0];
  const std::int64_t n = r.dims[0], a = r.dims[1], k = r.dims[2];

  CsiRecording rec;
  rec.session_id = c.header.value("session_id", "");
  rec.user_id = c.header.value("user_id", "");
  rec.amplitudes_in_db = c.header.value("amplitudes_in_db", false);
  for (const auto& p : c.header["pair_order"])
    rec.pair_order.emplace_back(p[0].get<int>(), p[1].get<int>());
  rec.subcarrier_ids = c.header["subcarrier_ids"].get<std::vector<int>>();
  rec.subcarrier_freqs_hz = c.header["subcarrier_freqs_hz"].get<std::vector<double>>();
  if (c.header.contains("adapter")) {
    rec.adapter_name = c.header["adapter"].value("name", "");
    rec.adapter_version = c.header["adapter"].value("version", 0);
    rec.source_subcarrier_ids =
        c.header["adapter"]["source_subcarrier_ids"].get<std::vector<int>>();
  }

  const auto& ts = c.header["timestamps"];
  const auto& labels = c.header["labels"];
  std::size_t idx = 0;
  for (std::int64_t fi = 0; fi < n; ++fi) {
    CsiFrame f;
    f.timestamp_s = ts[static_cast<std::size_t>(fi)].get<double>();
    f.labels = labels_from_json(labels[static_cast<std::size_t>(fi)]);
    f.values.resize(a, k);
    for (std::int64_t i = 0; i < a; ++i)
      for (std::int64_t j = 0; j < k; ++j) {
        const float re = r.values[idx++];
        const float im = r.values[idx++];
        f.values(i, j) = Complex{re, im};
      }
    rec.frames.push_back(std::move(f));
  }
  return rec;
}

// ---- blocks -----------------------------------------------------------------------

Container container_from_blocks(const BlockSet& set) {
  Container c;
  c.header["kind"] = "blocks";
  c.header["schema_version"] = 1;
  c.header["window"] = {{"window", set.window.window},
                        {"stride", set.window.stride},
                        {"pad_last", set.window.pad_last}};
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : set.pair_order) pairs.push_back({p.first, p.second});
  c.header["pair_order"] = pairs;
  c.header["subcarrier_freqs_hz"] = set.subcarrier_freqs_hz;
  if (set.normalization) {
    c.header["normalization"] = {{"mean_db", set.normalization->mean_db},
                                 {"std_db", set.normalization->std_db},
                                 {"epsilon", set.normalization->epsilon}};
  } else {
    c.header["normalization"] = nullptr;
  }

  for (const auto& b : set.blocks) {
    PayloadRecord r;
    r.meta["block_index"] = b.block_index;
    r.meta["center_timestamp"] = b.center_timestamp;
    r.meta["labels"] = labels_to_json(b.labels);
    r.meta["session_id"] = b.session_id;
    r.meta["user_id"] = b.user_id;
    r.meta["valid_frames"] = b.valid_frames;
    std::vector<int> mask(b.mask.size());
    for (std::size_t i = 0; i < b.mask.size(); ++i) mask[i] = b.mask[i] ? 1 : 0;
    r.meta["mask"] = mask;
    const auto& x = b.tensor;
    r.dims = {x.dim(0), x.dim(1), x.dim(2), 2};
    r.values.reserve(static_cast<std::size_t>(x.size() * 2));
    // (A, K, T, 2) row-major: the last axis varies fastest.
    for (Eigen::Index ai = 0; ai < x.dim(0); ++ai)
      for (Eigen::Index ki = 0; ki < x.dim(1); ++ki)
        for (Eigen::Index ti = 0; ti < x.dim(2); ++ti) {
          r.values.push_back(static_cast<float>(x(ai, ki, ti).real()));
          r.values.push_back(static_cast<float>(x(ai, ki, ti).imag()));
        }
    c.records.push_back(std::move(r));
  }
  return c;
}

BlockSet blocks_from_container(const Container& c) {
  if (c.header.value("kind", "") != "blocks")
    throw IoError("container kind is not 'blocks'");
  BlockSet set;
  set.window.window = c.header["window"]["window"].get<int>();
  set.window.stride = c.header["window"]["stride"].get<int>();
  set.window.pad_last = c.header["window"]["pad_last"].get<bool>();
  for (const auto& p : c.header["pair_order"])
    set.pair_order.emplace_back(p[0].get<int>(), p[1].get<int>());
  set.subcarrier_freqs_hz = c.header["subcarrier_freqs_hz"].get<std::vector<double>>();
  if (!c.header["normalization"].is_null()) {
    SessionStats s;
    s.mean_db = c.header["normalization"]["mean_db"].get<double>();
    s.std_db = c.header["normalization"]["std_db"].get<double>();
    s.epsilon = c.header["normalization"]["epsilon"].get<double>();
    set.normalization = s;
  }
  for (const auto& r : c.records) {
    if (r.dims.size() != 4 || r.dims[3] != 2)
      throw IoError("block record must be (A,K,T,2)");
    DataBlock b;
    b.block_index = r.meta.value("block_index", 0);
    b.center_timestamp = r.meta.value("center_timestamp", 0.0);
    b.labels = labels_from_json(r.meta["labels"]);
    b.session_id = r.meta.value("session_id", "");
    b.user_id = r.meta.value("user_id", "");
    b.valid_frames = r.meta.value("valid_frames", 0);
    const auto mask = r.meta["mask"].get<std::vector<int>>();
    b.mask.resize(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) b.mask[i] = mask[i] != 0;
    b.tensor = Tensor3c(r.dims[0], r.dims[1], r.dims[2]);
    std::size_t idx = 0;
    for (Eigen::Index ai = 0; ai < r.dims[0]; ++ai)
      for (Eigen::Index ki = 0; ki < r.dims[1]; ++ki)
        for (Eigen::Index ti = 0; ti < r.dims[2]; ++ti) {
          const float re = r.values[idx++];
          const float im = r.values[idx++];
          b.tensor(ai, ki, ti) = Complex{re, im};
        }
    set.blocks.push_back(std::move(b));
  }
  return set;
}

// ---- decompositions ------------------------------------------------------------------

namespace {

PayloadRecord matrix_record(const Matrix& m, const char* name, int item) {
  PayloadRecord r;
  r.meta["name"] = name;
  r.meta["item"] = item;
  r.dims = {m.rows(), m.cols()};
  r.values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      r.values.push_back(static_cast<float>(m(i, j)));
  return r;
}

Matrix matrix_from_record(const PayloadRecord& r) {
  if (r.dims.size() != 2) throw IoError("expected a matrix record");
  Matrix m(r.dims[0], r.dims[1]);
  std::size_t idx = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.values[idx++];
  return m;
}

}  // namespace

Container container_from_decompositions(const DecompositionSet& set) {
  Container c;
  c.header["kind"] = "decompositions";
  c.header["schema_version"] = 1;
  c.header["view"] = set.view;
  c.header["cp"] = {{"rank", set.cp.rank},
                    {"epsilon", set.cp.epsilon},
                    {"max_sweeps", set.cp.max_sweeps},
                    {"rel_tol", set.cp.rel_tol},
                    {"init", set.cp.init == CpInit::kSeededGaussian ? "gaussian" : "hosvd"},
                    {"seed", set.cp.rng_seed}};
  nlohmann::json items = nlohmann::json::array();
  int idx = 0;
  for (const auto& it : set.items) {
    nlohmann::json ij;
    ij["block_index"] = it.block_index;
    ij["center_timestamp"] = it.center_timestamp;
    ij["labels"] = labels_to_json(it.labels);
    ij["session_id"] = it.session_id;
    ij["user_id"] = it.user_id;
    ij["fit"] = it.decomp.fit;
    ij["sweeps_used"] = it.decomp.sweeps_used;
    ij["amp_mean"] = it.amp_mean;
    ij["amp_std"] = it.amp_std;
    items.push_back(ij);

    c.records.push_back(matrix_record(it.decomp.a, "a", idx));
    c.records.push_back(matrix_record(it.decomp.b, "b", idx));
    c.records.push_back(matrix_record(it.decomp.c, "c", idx));
    PayloadRecord w;
    w.meta["name"] = "weights";
    w.meta["item"] = idx;
    w.dims = {it.decomp.weights.size()};
    for (Eigen::Index i = 0; i < it.decomp.weights.size(); ++i)
      w.values.push_back(static_cast<float>(it.decomp.weights(i)));
    c.records.push_back(std::move(w));
    ++idx;
  }
  c.header["items"] = items;
  return c;
}

DecompositionSet decompositions_from_container(const Container& c) {
  if (c.header.value("kind", "") != "decompositions")
    throw IoError("container kind is not 'decompositions'");
  DecompositionSet set;
  set.view = c.header.value("view", "amplitude");
  set.cp.rank = c.header["cp"]["rank"].get<int>();
  set.cp.epsilon = c.header["cp"]["epsilon"].get<double>();
  set.cp.max_sweeps = c.header["cp"]["max_sweeps"].get<int>();
  set.cp.rel_tol = c.header["cp"]["rel_tol"].get<double>();
  set.cp.init = c.header["cp"]["init"].get<std::string>() == "hosvd"
                    ? CpInit::kHosvd
                    : CpInit::kSeededGaussian;
  set.cp.rng_seed = c.header["cp"]["seed"].get<std::uint64_t>();

  const auto& items = c.header["items"];
  if (c.records.size() != items.size() * 4)
    throw IoError("decompositions container: record count mismatch");
  for (std::size_t i = 0; i < items.size(); ++i) {
    DecompositionItem it;
    const auto& ij = items[i];
    it.block_index = ij.value("block_index", 0);
    it.center_timestamp = ij.value("center_timestamp", 0.0);
    it.labels = labels_from_json(ij["labels"]);
    it.session_id = ij.value("session_id", "");
    it.user_id = ij.value("user_id", "");
    it.amp_mean = ij.value("amp_mean", 0.0);
    it.amp_std = ij.value("amp_std", 0.0);
    it.decomp.a = matrix_from_record(c.records[4 * i]);
    it.decomp.b = matrix_from_record(c.records[4 * i + 1]);
    it.decomp.c = matrix_from_record(c.records[4 * i + 2]);
    const auto& w = c.records[4 * i + 3];
    it.decomp.weights = Vector(w.dims[0]);
    for (Eigen::Index j = 0; j < it.decomp.weights.size(); ++j)
      it.decomp.weights(j) = w.values[static_cast<std::size_t>(j)];
    it.decomp.fit = ij.value("fit", 0.0);
    it.decomp.sweeps_used = ij.value("sweeps_used", 0);
    set.items.push_back(std::move(it));
  }
  return set;
}

// ---- descriptors ----------------------------------------------------------------------

Container container_from_descriptors(const DescriptorTable& table) {
  Container c;
  c.header["kind"] = "descriptors";
  c.header["schema_version"] = 1;
  c.header["layout_version"] = table.layout_version;
  c.header["rank"] = table.rank;
  c.header["dim"] = table.dim();
  nlohmann::json items = nlohmann::json::array();
  PayloadRecord r;
  r.meta["name"] = "h";
  r.dims = {static_cast<std::int64_t>(table.rows.size()), table.dim()};
  for (const auto& row : table.rows) {
    nlohmann::json ij;
    ij["block_index"] = row.block_index;
    ij["center_timestamp"] = row.center_timestamp;
    ij["labels"] = labels_to_json(row.labels);
    ij["session_id"] = row.session_id;
    ij["user_id"] = row.user_id;
    items.push_back(ij);
    for (Eigen::Index i = 0; i < row.h.size(); ++i)
      r.values.push_back(static_cast<float>(row.h(i)));
  }
  c.header["items"] = items;
  c.records.push_back(std::move(r));
  return c;
}

DescriptorTable descriptors_from_container(const Container& c) {
  if (c.header.value("kind", "") != "descriptors")
    throw IoError("container kind is not 'descriptors'");
  DescriptorTable table;
  table.layout_version = c.header.value("layout_version", 1);
  table.rank = c.header.value("rank", 0);
  if (c.records.size() != 1 || c.records[0].dims.size() != 2)
    throw IoError("descriptors container must hold one (n, D) record");
  const auto& r = c.records[0];
  const std::int64_t n = r.dims[0], d = r.dims[1];
  const auto& items = c.header["items"];
  if (static_cast<std::int64_t>(items.size()) != n)
    throw IoError("descriptors container: item count mismatch");
  for (std::int64_t i = 0; i < n; ++i) {
    DescriptorRow row;
    const auto& ij = items[static_cast<std::size_t>(i)];
    row.block_index = ij.value("block_index", 0);
    row.center_timestamp = ij.value("center_timestamp", 0.0);
    row.labels = labels_from_json(ij["labels"]);
    row.session_id = ij.value("session_id", "");
    row.user_id = ij.value("user_id", "");
    row.h = Vector(d);
    for (std::int64_t j = 0; j < d; ++j)
      row.h(j) = r.values[static_cast<std::size_t>(i * d + j)];
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string descriptor_table_csv(const DescriptorTable& table) {
  std::string out = "block_index,session_id,user_id,center_timestamp,presence,activity,vitals";
  for (int i = 0; i < table.dim(); ++i) out += ",h" + std::to_string(i);
  out += "\n";
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& row : table.rows) {
    out += std::to_string(row.block_index) + "," + row.session_id + "," + row.user_id +
           "," + num(row.center_timestamp);
    out += ",";
    if (row.labels.presence) out += *row.labels.presence ? "1" : "0";
    out += ",";
    if (row.labels.activity) out += std::to_string(*row.labels.activity);
    out += ",";
    if (row.labels.vital_rate_hz) out += num(*row.labels.vital_rate_hz);
    for (Eigen::Index i = 0; i < row.h.size(); ++i) out += "," + num(row.h(i));
    out += "\n";
  }
  return out;
}

}  // namespace sdp
