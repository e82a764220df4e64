#include "sdp/schema.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace sdp {

void AdapterDescriptor::validate() const {
  if (antenna_pair_order.empty())
    throw ConfigError("adapter: antenna_pair_order must be nonempty");
  std::set<std::pair<int, int>> seen(antenna_pair_order.begin(), antenna_pair_order.end());
  if (seen.size() != antenna_pair_order.size())
    throw ConfigError("adapter: duplicate antenna pair");
  if (subcarrier_index_map.empty())
    throw ConfigError("adapter: subcarrier_index_map must be nonempty");
  std::set<int> ids(subcarrier_index_map.begin(), subcarrier_index_map.end());
  if (ids.size() != subcarrier_index_map.size())
    throw ConfigError("adapter: duplicate subcarrier map entry");
}

AdapterDescriptor AdapterDescriptor::identity_for(const CsiRecording& rec) {
  AdapterDescriptor a;
  a.name = "identity";
  a.antenna_pair_order = rec.pair_order;
  a.subcarrier_index_map = rec.subcarrier_ids;
  a.already_db = rec.amplitudes_in_db;
  return a;
}

CsiRecording ingest(const CsiRecording& raw, const AdapterDescriptor& adapter) {
  adapter.validate();
  raw.validate();

  // Resolve canonical rows/columns against the source ordering tables.
  std::vector<int> row_of;
  row_of.reserve(adapter.antenna_pair_order.size());
  for (const auto& pr : adapter.antenna_pair_order) {
    auto it = std::find(raw.pair_order.begin(), raw.pair_order.end(), pr);
    if (it == raw.pair_order.end())
      throw ConfigError("ingest: adapter names pair (" + std::to_string(pr.first) + "," +
                        std::to_string(pr.second) + ") absent from the recording");
    row_of.push_back(static_cast<int>(it - raw.pair_order.begin()));
  }
  std::vector<int> col_of;
  col_of.reserve(adapter.subcarrier_index_map.size());
  for (int id : adapter.subcarrier_index_map) {
    auto it = std::find(raw.subcarrier_ids.begin(), raw.subcarrier_ids.end(), id);
    if (it == raw.subcarrier_ids.end())
      throw ConfigError("ingest: adapter names subcarrier id " + std::to_string(id) +
                        " absent from the recording");
    col_of.push_back(static_cast<int>(it - raw.subcarrier_ids.begin()));
  }

  CsiRecording out;
  out.session_id = raw.session_id;
  out.user_id = raw.user_id;
  out.amplitudes_in_db = adapter.already_db;
  out.adapter_name = adapter.name;
  out.adapter_version = adapter.version;
  // Canonical output: pairs keep their physical (rx, tx) labels, subcarrier
  // positions are relabeled 0..K-1 with the source ids kept as metadata.
  out.pair_order = adapter.antenna_pair_order;
  out.source_subcarrier_ids = adapter.subcarrier_index_map;
  for (int k = 0; k < static_cast<int>(col_of.size()); ++k)
    out.subcarrier_ids.push_back(k);
  out.subcarrier_freqs_hz.reserve(col_of.size());
  for (int c : col_of)
    out.subcarrier_freqs_hz.push_back(
        raw.subcarrier_freqs_hz.empty() ? 0.0
                                        : raw.subcarrier_freqs_hz[static_cast<std::size_t>(c)]);

  const int A = static_cast<int>(row_of.size());
  const int K = static_cast<int>(col_of.size());
  out.frames.reserve(raw.frames.size());
  for (const auto& f : raw.frames) {
    CsiFrame g;
    g.timestamp_s = f.timestamp_s;
    g.labels = f.labels;
    g.values.resize(A, K);
    for (int a = 0; a < A; ++a)
      for (int k = 0; k < K; ++k)
        g.values(a, k) = f.values(row_of[static_cast<std::size_t>(a)],
                                  col_of[static_cast<std::size_t>(k)]);
    out.frames.push_back(std::move(g));
  }
  return out;
}

void WindowConfig::validate() const {
  if (window < 1) throw ConfigError("window: W must be >= 1");
  if (stride < 1) throw ConfigError("window: S must be >= 1");
}

std::vector<DataBlock> window(const CsiRecording& rec, const WindowConfig& cfg) {
  cfg.validate();
  rec.validate();
  const int N = static_cast<int>(rec.frames.size());
  if (N < 1) throw ConfigError("window: recording has no frames");
  const int A = rec.n_pairs();
  const int K = rec.n_subcarriers();
  const int W = cfg.window;
  const int S = cfg.stride;

  // Full windows at 0, S, 2S, ... With pad_last, frames past the last full
  // window get one extra block at the last stride-aligned start that still
  // touches the covered prefix, so no frame is skipped whenever S <= W.
  std::vector<int> starts;
  int full_end = 0;
  int last_full = -1;
  for (int s = 0; s + W <= N; s += S) {
    starts.push_back(s);
    last_full = s;
    full_end = s + W;
  }
  if (cfg.pad_last && full_end < N) {
    const int pad_start = (full_end / S) * S;
    if (pad_start > last_full) starts.push_back(pad_start);
  }

  std::vector<DataBlock> blocks;
  blocks.reserve(starts.size());
  int index = 0;
  for (int start : starts) {
    const int valid = std::min(W, N - start);
    DataBlock b;
    b.tensor = Tensor3c(A, K, W);
    b.mask.assign(static_cast<std::size_t>(W), false);
    b.session_id = rec.session_id;
    b.user_id = rec.user_id;
    b.block_index = index++;
    b.valid_frames = valid;
    for (int t = 0; t < valid; ++t) {
      b.mask[static_cast<std::size_t>(t)] = true;
      const auto& f = rec.frames[static_cast<std::size_t>(start + t)];
      for (int a = 0; a < A; ++a)
        for (int k = 0; k < K; ++k) b.tensor(a, k, t) = f.values(a, k);
    }
    // Padded frames stay exact zero; the mask is authoritative. The label
    // index floor(W/2) is clamped onto the valid range of a padded block.
    const int center = std::min(W / 2, valid - 1);
    b.center_timestamp = rec.frames[static_cast<std::size_t>(start + center)].timestamp_s;
    b.labels = rec.frames[static_cast<std::size_t>(start + center)].labels;
    blocks.push_back(std::move(b));
  }
  return blocks;
}

ParameterizedBlock parameterize(const DataBlock& block, Parameterization mode) {
  const auto& x = block.tensor;
  ParameterizedBlock out;
  out.mode = mode;
  out.ch0 = Tensor3d(x.dim(0), x.dim(1), x.dim(2));
  out.ch1 = Tensor3d(x.dim(0), x.dim(1), x.dim(2));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const Complex v = x.data()[i];
    if (mode == Parameterization::kRealImag) {
      out.ch0.data()[i] = v.real();
      out.ch1.data()[i] = v.imag();
    } else {
      out.ch0.data()[i] = std::abs(v);
      out.ch1.data()[i] = std::arg(v);
    }
  }
  return out;
}

Tensor3d phase_diff(const DataBlock& block) {
  const auto& x = block.tensor;
  const Eigen::Index A = x.dim(0), K = x.dim(1), T = x.dim(2);
  if (K < 2) throw ConfigError("phase_diff: needs K >= 2 subcarriers");
  Tensor3d out(A, K - 1, T);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index k = 0; k + 1 < K; ++k)
      for (Eigen::Index a = 0; a < A; ++a) {
        const Complex z = x(a, k + 1, t) * std::conj(x(a, k, t));
        out(a, k, t) = std::atan2(z.imag(), z.real());
      }
  return out;
}

Tensor3d raw_phase(const DataBlock& block) {
  const auto& x = block.tensor;
  Tensor3d out(x.dim(0), x.dim(1), x.dim(2));
  for (Eigen::Index i = 0; i < x.size(); ++i) out.data()[i] = std::arg(x.data()[i]);
  return out;
}

namespace {
inline double to_db(double amp) { return 20.0 * std::log10(amp + kAmpEpsilon); }
}  // namespace

SessionStats compute_session_stats(const std::vector<DataBlock>& blocks) {
  if (blocks.empty()) throw ConfigError("session stats: empty session");
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (const auto& b : blocks) {
    const auto& x = b.tensor;
    for (Eigen::Index t = 0; t < x.dim(2); ++t) {
      if (!b.mask[static_cast<std::size_t>(t)]) continue;
      for (Eigen::Index k = 0; k < x.dim(1); ++k)
        for (Eigen::Index a = 0; a < x.dim(0); ++a) {
          const double v = to_db(std::abs(x(a, k, t)));
          sum += v;
          sum_sq += v * v;
          ++n;
        }
    }
  }
  if (n == 0) throw ConfigError("session stats: no valid frames in session");
  SessionStats s;
  s.mean_db = sum / static_cast<double>(n);
  const double var = std::max(0.0, sum_sq / static_cast<double>(n) - s.mean_db * s.mean_db);
  s.std_db = std::sqrt(var);
  s.epsilon = kStdEpsilon;
  return s;
}

void normalize(ParameterizedBlock& view, const SessionStats& stats) {
  if (view.mode != Parameterization::kAmpPhase)
    throw ConfigError("normalize: amplitude normalization applies to the amp-phase view");
  const double denom = std::max(stats.std_db, stats.epsilon);
  for (Eigen::Index i = 0; i < view.ch0.size(); ++i)
    view.ch0.data()[i] = (to_db(view.ch0.data()[i]) - stats.mean_db) / denom;
}

Tensor3d normalized_amplitude(const DataBlock& block, const SessionStats& stats) {
  const auto& x = block.tensor;
  Tensor3d out(x.dim(0), x.dim(1), x.dim(2));
  const double denom = std::max(stats.std_db, stats.epsilon);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    out.data()[i] = (to_db(std::abs(x.data()[i])) - stats.mean_db) / denom;
  return out;
}

Tensor3d real_imag_folded(const DataBlock& block) {
  const auto& x = block.tensor;
  Tensor3d out(x.dim(0), x.dim(1), 2 * x.dim(2));
  for (Eigen::Index t = 0; t < x.dim(2); ++t)
    for (Eigen::Index k = 0; k < x.dim(1); ++k)
      for (Eigen::Index a = 0; a < x.dim(0); ++a) {
        out(a, k, 2 * t) = x(a, k, t).real();
        out(a, k, 2 * t + 1) = x(a, k, t).imag();
      }
  return out;
}

}  // namespace sdp
