// Copyright 2026 The cascade-oam Authors
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

#ifndef CASCADE_EVENT_STREAM_HPP
#define CASCADE_EVENT_STREAM_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/errors.hpp"

namespace cascade {

enum class Channel : std::uint8_t { kHeraldA = 0, kHeraldB = 1, kSignal = 2, kIdler = 3 };

inline constexpr std::size_t kChannelCount = 4;
inline constexpr std::array<Channel, kChannelCount> kAllChannels = {
    Channel::kHeraldA, Channel::kHeraldB, Channel::kSignal, Channel::kIdler};

inline std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::kHeraldA: return "herald_a";
    case Channel::kHeraldB: return "herald_b";
    case Channel::kSignal: return "signal";
    case Channel::kIdler: return "idler";
  }
  return "?";
}

inline Channel channel_from_name(std::string_view name) {
  for (Channel c : kAllChannels) {
    if (channel_name(c) == name) return c;
  }
  throw FormatError(FormatError::Kind::kValidation, "unknown channel name '" + std::string(name) + "'");
}

/// Simulation-only provenance of a detection.
enum class Origin : std::uint8_t { kGenuine = 0, kDark = 1 };

/// Time-ordered detections on one channel, integer picoseconds.
///
/// origins and pair_index are optional ground-truth annotations; when
/// present they have one entry per timestamp. pair_index refers into
/// GroundTruth::emitted (-1 when the record is not a down-converted photon).
struct EventStream {
  Channel channel = Channel::kSignal;
  std::vector<std::uint64_t> timestamps;
  std::vector<Origin> origins;
  std::vector<std::int32_t> pair_index;

  std::size_t size() const { return timestamps.size(); }
  bool empty() const { return timestamps.empty(); }

  /// Drops ground-truth annotations (what a real time tagger would give).
  EventStream stripped() const {
    EventStream s;
    s.channel = channel;
    s.timestamps = timestamps;
    return s;
  }
};

/// One stream per channel over a common run duration.
struct StreamBundle {
  std::uint64_t duration_ps = 0;
  std::array<EventStream, kChannelCount> streams;

  StreamBundle() {
    for (std::size_t i = 0; i < kChannelCount; ++i) streams[i].channel = kAllChannels[i];
  }
  EventStream& operator[](Channel c) { return streams[static_cast<std::size_t>(c)]; }
  const EventStream& operator[](Channel c) const { return streams[static_cast<std::size_t>(c)]; }
};

inline bool is_sorted(const EventStream& s) {
  return std::is_sorted(s.timestamps.begin(), s.timestamps.end());
}

inline void validate(const EventStream& s, std::uint64_t duration_ps) {
  if (!is_sorted(s)) {
    throw FormatError(FormatError::Kind::kValidation,
                      "stream '" + std::string(channel_name(s.channel)) + "' is not time-ordered");
  }
  if (!s.empty() && s.timestamps.back() > duration_ps) {
    throw FormatError(FormatError::Kind::kValidation,
                      "stream '" + std::string(channel_name(s.channel)) +
                          "' has timestamps beyond the run duration");
  }
  if (!s.origins.empty() && s.origins.size() != s.size()) {
    throw FormatError(FormatError::Kind::kValidation, "origin annotations do not match stream size");
  }
  if (!s.pair_index.empty() && s.pair_index.size() != s.size()) {
    throw FormatError(FormatError::Kind::kValidation, "pair annotations do not match stream size");
  }
}

inline void validate(const StreamBundle& b) {
  for (std::size_t i = 0; i < kChannelCount; ++i) {
    if (b.streams[i].channel != kAllChannels[i]) {
      throw FormatError(FormatError::Kind::kValidation, "bundle channel slots out of order");
    }
    validate(b.streams[i], b.duration_ps);
  }
}

/// Time-ordered union of two streams (annotations dropped).
inline EventStream merge_streams(const EventStream& a, const EventStream& b, Channel as) {
  EventStream out;
  out.channel = as;
  out.timestamps.resize(a.size() + b.size());
  std::merge(a.timestamps.begin(), a.timestamps.end(), b.timestamps.begin(), b.timestamps.end(),
             out.timestamps.begin());
  return out;
}

}  // namespace cascade

#endif  // CASCADE_EVENT_STREAM_HPP
