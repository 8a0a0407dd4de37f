// Copyright 2026 The fednl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Neuromorphic samples as binary T x P x H x W frame tensors: event
// integration, synthetic moving-bar datasets, client partitioning and the
// FNLD container format.

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fednl/common.hpp"

namespace fednl::data {

enum class Polarity : std::uint8_t { Off = 0, On = 1 };

inline constexpr int kChannels = 2;
inline constexpr int kOnChannel = 0;
inline constexpr int kOffChannel = 1;

inline constexpr int channel_of(Polarity p) {
  return p == Polarity::On ? kOnChannel : kOffChannel;
}

struct Event {
  std::int64_t timestamp_us = 0;
  int x = 0;
  int y = 0;
  Polarity polarity = Polarity::On;
};

struct EventStream {
  std::vector<Event> events;
  int height = 0;
  int width = 0;
  std::int64_t duration_us = 0;

  /// Throws std::invalid_argument if timestamps decrease, fall outside
  /// [0, duration] or coordinates leave the sensor.
  void validate() const {
    if (height <= 0 || width <= 0)
      throw std::invalid_argument("event stream: sensor size must be positive");
    if (duration_us < 0)
      throw std::invalid_argument("event stream: negative duration");
    std::int64_t last = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
      const Event& e = events[i];
      if (e.timestamp_us < last)
        throw std::invalid_argument("event stream: timestamps decrease at event " +
                                    std::to_string(i));
      if (e.timestamp_us > duration_us)
        throw std::invalid_argument("event stream: event " + std::to_string(i) +
                                    " after stream duration");
      if (e.x < 0 || e.x >= width || e.y < 0 || e.y >= height)
        throw std::invalid_argument("event stream: event " + std::to_string(i) +
                                    " outside sensor");
      last = e.timestamp_us;
    }
  }
};

/// Dimensions of a frame tensor. P is always 2.
struct FrameShape {
  int frames = 0;
  int channels = kChannels;
  int height = 0;
  int width = 0;

  std::size_t cells() const {
    return static_cast<std::size_t>(frames) * channels * height * width;
  }
  std::size_t frame_cells() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  friend bool operator==(const FrameShape&, const FrameShape&) = default;
};

/// Binary occupancy over (frame, channel, row, col), row-major in that order.
class FrameTensor {
 public:
  FrameTensor() = default;
  FrameTensor(int frames, int height, int width)
      : shape_{frames, kChannels, height, width}, cells_(shape_.cells(), 0) {
    if (frames < 1 || height < 1 || width < 1)
      throw DimensionError("frame tensor dimensions must be positive");
  }
  explicit FrameTensor(FrameShape shape)
      : FrameTensor(shape.frames, shape.height, shape.width) {}

  const FrameShape& shape() const noexcept { return shape_; }
  int frames() const noexcept { return shape_.frames; }
  int height() const noexcept { return shape_.height; }
  int width() const noexcept { return shape_.width; }

  std::size_t index(int t, int p, int y, int x) const {
    return ((static_cast<std::size_t>(t) * kChannels + p) * shape_.height + y) *
               shape_.width +
           x;
  }
  bool at(int t, int p, int y, int x) const { return cells_[index(t, p, y, x)] != 0; }
  void set(int t, int p, int y, int x, bool value) {
    cells_[index(t, p, y, x)] = value ? 1 : 0;
  }

  /// Cells of frame t flattened as (channel, row, col).
  std::span<const std::uint8_t> frame(int t) const {
    return {cells_.data() + static_cast<std::size_t>(t) * shape_.frame_cells(),
            shape_.frame_cells()};
  }
  std::span<const std::uint8_t> cells() const noexcept { return cells_; }
  std::span<std::uint8_t> cells() noexcept { return cells_; }

  std::size_t count_ones() const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), 1));
  }

  friend bool operator==(const FrameTensor&, const FrameTensor&) = default;

 private:
  FrameShape shape_{0, kChannels, 0, 0};
  std::vector<std::uint8_t> cells_;
};

struct Sample {
  FrameTensor frames;
  int label = 0;
  friend bool operator==(const Sample&, const Sample&) = default;
};

struct LabeledDataset {
  std::vector<Sample> samples;
  int num_classes = 0;

  FrameShape shape() const {
    return samples.empty() ? FrameShape{} : samples.front().frames.shape();
  }

  void validate() const {
    if (num_classes < 1) throw std::invalid_argument("dataset: class count must be >= 1");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].frames.shape() != samples.front().frames.shape())
        throw DimensionError("dataset: sample " + std::to_string(i) +
                             " has a different frame shape");
      if (samples[i].label < 0 || samples[i].label >= num_classes)
        throw std::invalid_argument("dataset: sample " + std::to_string(i) +
                                    " label out of range");
    }
  }

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

// ---------------------------------------------------------------------------
// Event integration

/// Splits [0, duration] into `frames` equal bins; a cell is 1 iff at least
/// one event of that polarity hit that pixel inside the bin. An event at
/// exactly `duration` lands in the last bin.
inline FrameTensor integrate_events(const EventStream& stream, int frames) {
  if (frames < 1) throw std::invalid_argument("integrate_events: frame count must be >= 1");
  stream.validate();
  if (!stream.events.empty() && stream.duration_us == 0)
    throw std::invalid_argument("integrate_events: zero-duration stream with events");
  FrameTensor out(frames, stream.height, stream.width);
  for (const Event& e : stream.events) {
    auto bin = static_cast<int>((e.timestamp_us * frames) / stream.duration_us);
    bin = std::min(bin, frames - 1);
    out.set(bin, channel_of(e.polarity), e.y, e.x, true);
  }
  return out;
}

/// Parses the text event format:
///   # height=H width=W duration=D
///   timestamp_us,x,y,polarity      (polarity 1 = ON, 0 = OFF)
inline EventStream parse_event_stream(std::istream& in) {
  EventStream stream;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (have_header) continue;
      std::istringstream hs(line.substr(1));
      std::string token;
      int found = 0;
      while (hs >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        try {
          if (key == "height") stream.height = std::stoi(value), ++found;
          else if (key == "width") stream.width = std::stoi(value), ++found;
          else if (key == "duration") stream.duration_us = std::stoll(value), ++found;
        } catch (const std::exception&) {
          throw FormatError("events: bad header value '" + token + "'");
        }
      }
      if (found != 3) throw FormatError("events: header must set height, width and duration");
      have_header = true;
      continue;
    }
    if (!have_header) throw FormatError("events: data before header line");
    Event e;
    long long ts = 0;
    int pol = 0;
    char c1 = 0, c2 = 0, c3 = 0;
    std::istringstream ls(line);
    if (!(ls >> ts >> c1 >> e.x >> c2 >> e.y >> c3 >> pol) || c1 != ',' || c2 != ',' ||
        c3 != ',' || (pol != 0 && pol != 1))
      throw FormatError("events: malformed line " + std::to_string(line_no));
    e.timestamp_us = ts;
    e.polarity = pol == 1 ? Polarity::On : Polarity::Off;
    stream.events.push_back(e);
  }
  if (!have_header) throw FormatError("events: missing header line");
  try {
    stream.validate();
  } catch (const std::invalid_argument& err) {
    throw FormatError(err.what());
  }
  return stream;
}

inline EventStream read_event_stream(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("events: cannot open " + path);
  return parse_event_stream(in);
}

// ---------------------------------------------------------------------------
// Synthetic moving-bar data

struct SyntheticSpec {
  int classes = 4;
  int samples_per_class = 250;
  int frames = 12;
  int height = 16;
  int width = 16;
  double noise_rate = 0.02;
  std::uint64_t seed = 1;
};

/// Eight bar motions: {right, left, down, up} x {speed 1, speed 2}. A bar of
/// thickness `speed` sweeps cyclically through the central region of the
/// frame, leaving a margin of about a fifth of the frame on every side.
inline constexpr int kSyntheticPatterns = 8;

struct BarMotion {
  bool vertical_bar = true;  // bar spans rows, moves along columns
  int direction = +1;
  int speed = 1;
};

inline BarMotion bar_motion(int pattern) {
  static constexpr std::array<BarMotion, 4> kBase{{
      {true, +1, 1}, {true, -1, 1}, {false, +1, 1}, {false, -1, 1}}};
  BarMotion m = kBase[static_cast<std::size_t>(pattern % 4)];
  m.speed = pattern < 4 ? 1 : 2;
  return m;
}

inline int synthetic_margin(int height, int width) {
  return std::max(1, std::min(height, width) / 5);
}

/// Renders pattern `pattern` with phase offset `phase` and no noise.
inline FrameTensor render_bar_pattern(int pattern, int phase, int frames, int height,
                                      int width) {
  FrameTensor out(frames, height, width);
  const int margin = synthetic_margin(height, width);
  const BarMotion m = bar_motion(pattern);
  const int extent_along = (m.vertical_bar ? width : height) - 2 * margin;
  const int extent_across = (m.vertical_bar ? height : width) - 2 * margin;
  auto occupied = [&](int t, int along) {
    // position of the bar's first line at frame t, cyclic in the region
    int pos = phase + m.direction * m.speed * t;
    pos = ((pos % extent_along) + extent_along) % extent_along;
    const int rel = ((along - pos) % extent_along + extent_along) % extent_along;
    return rel < m.speed;
  };
  for (int t = 0; t < frames; ++t) {
    for (int a = 0; a < extent_along; ++a) {
      const bool now = occupied(t, a);
      const bool before = occupied(t - 1, a);
      if (now == before) continue;
      const int channel = now ? kOnChannel : kOffChannel;
      for (int c = 0; c < extent_across; ++c) {
        const int y = m.vertical_bar ? margin + c : margin + a;
        const int x = m.vertical_bar ? margin + a : margin + c;
        out.set(t, channel, y, x, true);
      }
    }
  }
  return out;
}

/// Phase of the j-th sample of a class.
inline int synthetic_phase(int pattern, int sample_in_class, int height, int width) {
  const BarMotion m = bar_motion(pattern);
  const int extent = (m.vertical_bar ? width : height) - 2 * synthetic_margin(height, width);
  return sample_in_class % extent;
}

/// Samples are ordered class-major; noise for sample j of class c comes from
/// its own seed stream so generation order does not matter.
inline LabeledDataset generate_synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw std::invalid_argument("synthetic: need at least 2 classes");
  if (spec.classes > kSyntheticPatterns)
    throw std::invalid_argument("synthetic: at most " + std::to_string(kSyntheticPatterns) +
                                " distinct patterns available");
  if (spec.height < 8 || spec.width < 8)
    throw std::invalid_argument("synthetic: height and width must be >= 8");
  if (spec.frames < 1 || spec.samples_per_class < 1)
    throw std::invalid_argument("synthetic: frames and samples_per_class must be >= 1");
  if (!(spec.noise_rate >= 0.0 && spec.noise_rate <= 1.0))
    throw std::invalid_argument("synthetic: noise_rate must be in [0, 1]");

  LabeledDataset ds;
  ds.num_classes = spec.classes;
  ds.samples.reserve(static_cast<std::size_t>(spec.classes) * spec.samples_per_class);
  for (int c = 0; c < spec.classes; ++c) {
    for (int j = 0; j < spec.samples_per_class; ++j) {
      FrameTensor x = render_bar_pattern(
          c, synthetic_phase(c, j, spec.height, spec.width), spec.frames, spec.height,
          spec.width);
      if (spec.noise_rate > 0.0) {
        std::mt19937_64 rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(c),
                                                    static_cast<std::uint64_t>(j)}));
        std::bernoulli_distribution noise(spec.noise_rate);
        for (auto& cell : x.cells())
          if (noise(rng)) cell = 1;
      }
      ds.samples.push_back({std::move(x), c});
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Partitioning

enum class PartitionScheme { Iid, Dirichlet };

struct PartitionPlan {
  std::vector<int> assignment;  // sample index -> client index
  int n_clients = 0;
  PartitionScheme scheme = PartitionScheme::Iid;
  double alpha = 0.0;
  std::uint64_t seed = 0;

  /// Sample indices per client, ascending.
  std::vector<std::vector<std::size_t>> shards() const {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(n_clients));
    for (std::size_t i = 0; i < assignment.size(); ++i)
      out[static_cast<std::size_t>(assignment[i])].push_back(i);
    return out;
  }

  std::vector<int> empty_clients() const {
    std::vector<int> counts(static_cast<std::size_t>(n_clients), 0);
    for (int c : assignment) ++counts[static_cast<std::size_t>(c)];
    std::vector<int> out;
    for (int c = 0; c < n_clients; ++c)
      if (counts[static_cast<std::size_t>(c)] == 0) out.push_back(c);
    return out;
  }

  friend bool operator==(const PartitionPlan&, const PartitionPlan&) = default;
};

/// Seeded shuffle, then round-robin deal; shard sizes differ by at most one.
inline PartitionPlan partition_iid(const LabeledDataset& ds, int n_clients,
                                   std::uint64_t seed) {
  if (n_clients < 1) throw std::invalid_argument("partition_iid: n_clients must be >= 1");
  if (static_cast<std::size_t>(n_clients) > ds.samples.size())
    throw std::invalid_argument("partition_iid: more clients than samples");
  std::vector<std::size_t> order(ds.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  PartitionPlan plan{std::vector<int>(ds.samples.size(), 0), n_clients,
                     PartitionScheme::Iid, 0.0, seed};
  for (std::size_t k = 0; k < order.size(); ++k)
    plan.assignment[order[k]] = static_cast<int>(k % static_cast<std::size_t>(n_clients));
  return plan;
}

/// Converts fractions to integer counts summing to `total`: floor each share,
/// then hand the remainder to the largest fractional parts (ties to the lower
/// index).
inline std::vector<std::size_t> largest_remainder(std::span<const double> fractions,
                                                  std::size_t total) {
  std::vector<std::size_t> counts(fractions.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double exact = fractions[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(exact);
    assigned += counts[i];
    rema.emplace_back(exact - static_cast<double>(counts[i]), i);
  }
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned)
    ++counts[rema[k % rema.size()].second];
  // floating error can over-assign by one in pathological cases
  for (std::size_t k = rema.size(); assigned > total && k-- > 0;)
    if (counts[rema[k].second] > 0) --counts[rema[k].second], --assigned;
  return counts;
}

/// Per class, a Dirichlet(alpha * 1_n) draw sets each client's share of that
/// class. Clients may end up empty; see PartitionPlan::empty_clients().
inline PartitionPlan partition_dirichlet(const LabeledDataset& ds, int n_clients, double alpha,
                                         std::uint64_t seed) {
  if (n_clients < 1) throw std::invalid_argument("partition_dirichlet: n_clients must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("partition_dirichlet: alpha must be > 0");
  PartitionPlan plan{std::vector<int>(ds.samples.size(), 0), n_clients,
                     PartitionScheme::Dirichlet, alpha, seed};
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> share(static_cast<std::size_t>(n_clients));
  for (int c = 0; c < ds.num_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
      if (ds.samples[i].label == c) members.push_back(i);
    double sum = 0.0;
    for (auto& s : share) sum += (s = gamma(rng));
    if (sum > 0.0) {
      for (auto& s : share) s /= sum;
    } else {
      // every draw underflowed (tiny alpha): the whole class goes to one client
      std::fill(share.begin(), share.end(), 0.0);
      share[std::uniform_int_distribution<std::size_t>(0, share.size() - 1)(rng)] = 1.0;
    }
    std::shuffle(members.begin(), members.end(), rng);
    const auto counts = largest_remainder(share, members.size());
    std::size_t next = 0;
    for (int client = 0; client < n_clients; ++client)
      for (std::size_t k = 0; k < counts[static_cast<std::size_t>(client)]; ++k)
        plan.assignment[members[next++]] = client;
  }
  return plan;
}

/// Stratified hold-out: in each class, a seeded `test_fraction` of samples
/// (rounded down) goes to the test set. Both outputs keep the input order.
inline std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& ds,
                                                                  double test_fraction,
                                                                  std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("stratified_split: test_fraction must be in [0, 1)");
  std::vector<bool> is_test(ds.samples.size(), false);
  std::mt19937_64 rng(seed);
  for (int c = 0; c < ds.num_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
      if (ds.samples[i].label == c) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_test =
        static_cast<std::size_t>(test_fraction * static_cast<double>(members.size()) + 1e-9);
    for (std::size_t k = 0; k < n_test; ++k) is_test[members[k]] = true;
  }
  LabeledDataset train{{}, ds.num_classes}, test{{}, ds.num_classes};
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    (is_test[i] ? test : train).samples.push_back(ds.samples[i]);
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// FNLD container

inline constexpr std::array<char, 4> kDatasetMagic{'F', 'N', 'L', 'D'};
inline constexpr std::uint16_t kDatasetVersion = 1;

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}
  std::string_view take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw FormatError(what_ + ": truncated payload");
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint16_t u16() {
    auto b = take(2);
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[0]) |
                                      (static_cast<unsigned char>(b[1]) << 8));
  }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int k = 3; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(b[k]);
    return v;
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(b[k]);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

inline std::string slurp(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(what + ": cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::string& path, const std::string& bytes, const std::string& what) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(what + ": cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(what + ": write failed for " + path);
}

}  // namespace detail

/// magic "FNLD" | version u16 | T,P,H,W,C u16 | count u32 | per sample:
/// label u16 + ceil(T*P*H*W/8) bytes of cells, MSB-first. Little-endian.
inline std::string encode_dataset(const LabeledDataset& ds) {
  ds.validate();
  const FrameShape shape = ds.samples.empty() ? FrameShape{1, kChannels, 1, 1} : ds.shape();
  std::string out(kDatasetMagic.begin(), kDatasetMagic.end());
  detail::put_u16(out, kDatasetVersion);
  for (int v : {shape.frames, shape.channels, shape.height, shape.width, ds.num_classes}) {
    if (v < 0 || v > 0xffff) throw DimensionError("dataset: dimension exceeds u16");
    detail::put_u16(out, static_cast<std::uint16_t>(v));
  }
  detail::put_u32(out, static_cast<std::uint32_t>(ds.samples.size()));
  const std::size_t nbytes = (shape.cells() + 7) / 8;
  for (const Sample& s : ds.samples) {
    detail::put_u16(out, static_cast<std::uint16_t>(s.label));
    std::string packed(nbytes, '\0');
    const auto cells = s.frames.cells();
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (cells[i]) packed[i / 8] = static_cast<char>(packed[i / 8] | (0x80 >> (i % 8)));
    out += packed;
  }
  return out;
}

inline LabeledDataset decode_dataset(std::string_view bytes) {
  detail::ByteReader in(bytes, "dataset");
  const auto magic = in.take(4);
  if (!std::equal(magic.begin(), magic.end(), kDatasetMagic.begin()))
    throw FormatError("dataset: bad magic");
  const auto version = in.u16();
  if (version != kDatasetVersion)
    throw FormatError("dataset: unsupported version " + std::to_string(version));
  const int frames = in.u16(), channels = in.u16(), height = in.u16(), width = in.u16();
  const int classes = in.u16();
  if (channels != kChannels) throw FormatError("dataset: channel count must be 2");
  if (frames < 1 || height < 1 || width < 1 || classes < 1)
    throw FormatError("dataset: zero dimension in header");
  const std::uint32_t count = in.u32();
  LabeledDataset ds{{}, classes};
  const FrameShape shape{frames, kChannels, height, width};
  const std::size_t nbytes = (shape.cells() + 7) / 8;
  ds.samples.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const int label = in.u16();
    if (label >= classes) throw FormatError("dataset: label out of range in sample " +
                                            std::to_string(k));
    const auto packed = in.take(nbytes);
    FrameTensor x(shape);
    auto cells = x.cells();
    for (std::size_t i = 0; i < cells.size(); ++i)
      cells[i] = (static_cast<unsigned char>(packed[i / 8]) >> (7 - i % 8)) & 1;
    ds.samples.push_back({std::move(x), label});
  }
  if (!in.done()) throw FormatError("dataset: trailing bytes after last sample");
  return ds;
}

inline void write_dataset(const LabeledDataset& ds, const std::string& path) {
  detail::spit(path, encode_dataset(ds), "dataset");
}

inline LabeledDataset read_dataset(const std::string& path) {
  return decode_dataset(detail::slurp(path, "dataset"));
}

}  // namespace fednl::data
