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

// Tag file: binary container for detector timestamps.
//
// All integers little-endian.
//
//   offset  size  field
//   0       8     magic "CASCTAGS"
//   8       4     u32 format version (1)
//   12      4     u32 time unit in picoseconds (always 1)
//   16      8     u64 run duration [ps]
//   24      8     u64 record count N
//   32      2     u16 channel count C
//   34      ...   C channel entries: u8 id, u8 name length L, L bytes ASCII name
//   ...     9*N   records: u8 channel id, u64 timestamp [ps]
//
// Records are globally non-decreasing in time; equal timestamps are ordered
// by channel id. The file ends right after the last record.
//
// CSV form ("channel,time_ps") carries the same header as comment lines:
//
//   # cascade-tags version=1
//   # duration_ps=<u64>
//   # channel <id> <name>        (one line per channel)
//   channel,time_ps
//   <id>,<timestamp>

#ifndef CASCADE_TAGSTREAM_HPP
#define CASCADE_TAGSTREAM_HPP

#include <array>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cascade/errors.hpp"
#include "cascade/event_stream.hpp"

namespace cascade {

inline constexpr char kTagMagic[8] = {'C', 'A', 'S', 'C', 'T', 'A', 'G', 'S'};
inline constexpr std::uint32_t kTagVersion = 1;
inline constexpr std::size_t kTagFixedHeaderSize = 34;
inline constexpr std::size_t kTagRecordSize = 9;

struct TagChannel {
  std::uint8_t id = 0;
  std::string name;
  friend bool operator==(const TagChannel&, const TagChannel&) = default;
};

struct TagRecord {
  std::uint8_t channel = 0;
  std::uint64_t timestamp = 0;
  friend bool operator==(const TagRecord&, const TagRecord&) = default;
};

struct TagFile {
  std::uint64_t duration_ps = 0;
  std::vector<TagChannel> channels;
  std::vector<TagRecord> records;
  friend bool operator==(const TagFile&, const TagFile&) = default;
};

/// Default channel table: ids follow the Channel enumeration.
inline std::vector<TagChannel> standard_channel_table() {
  std::vector<TagChannel> t;
  for (Channel c : kAllChannels) t.push_back({static_cast<std::uint8_t>(c), std::string(channel_name(c))});
  return t;
}

/// Size of a file with the standard channel table and no records.
inline std::size_t standard_header_size() {
  std::size_t n = kTagFixedHeaderSize;
  for (const auto& c : standard_channel_table()) n += 2 + c.name.size();
  return n;
}

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(char* dst, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) dst[i] = static_cast<char>((v >> (8 * i)) & 0xff);
}
inline std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline void check_channel_table(const std::vector<TagChannel>& channels) {
  if (channels.size() > 256) {
    throw FormatError(FormatError::Kind::kValidation, "more than 256 channels");
  }
  std::array<bool, 256> seen{};
  for (const auto& c : channels) {
    if (seen[c.id]) {
      throw FormatError(FormatError::Kind::kValidation,
                        "duplicate channel id " + std::to_string(c.id));
    }
    seen[c.id] = true;
    if (c.name.empty() || c.name.size() > 255) {
      throw FormatError(FormatError::Kind::kValidation, "channel name length out of range");
    }
  }
}

}  // namespace detail

/// Checks every invariant a writer must uphold.
inline void validate(const TagFile& f) {
  detail::check_channel_table(f.channels);
  std::array<bool, 256> known{};
  for (const auto& c : f.channels) known[c.id] = true;
  for (std::size_t i = 0; i < f.records.size(); ++i) {
    const auto& r = f.records[i];
    if (!known[r.channel]) {
      throw FormatError(FormatError::Kind::kValidation,
                        "record " + std::to_string(i) + " uses unknown channel id " +
                            std::to_string(r.channel),
                        i);
    }
    if (r.timestamp > f.duration_ps) {
      throw FormatError(FormatError::Kind::kValidation,
                        "record " + std::to_string(i) + " lies beyond the run duration", i);
    }
    if (i > 0) {
      const auto& p = f.records[i - 1];
      if (r.timestamp < p.timestamp || (r.timestamp == p.timestamp && r.channel < p.channel)) {
        throw FormatError(FormatError::Kind::kValidation,
                          "record " + std::to_string(i) + " is out of order", i);
      }
    }
  }
}

/// Writes the binary layout; returns the number of bytes written. The input
/// is validated before anything is written.
inline std::uint64_t write_tags(const TagFile& f, std::ostream& os) {
  validate(f);
  std::string head(kTagMagic, kTagMagic + 8);
  detail::put_u32(head, kTagVersion);
  detail::put_u32(head, 1);
  head.resize(head.size() + 16);
  detail::put_u64(head.data() + 16, f.duration_ps);
  detail::put_u64(head.data() + 24, f.records.size());
  detail::put_u16(head, static_cast<std::uint16_t>(f.channels.size()));
  for (const auto& c : f.channels) {
    head.push_back(static_cast<char>(c.id));
    head.push_back(static_cast<char>(c.name.size()));
    head += c.name;
  }
  os.write(head.data(), static_cast<std::streamsize>(head.size()));
  std::uint64_t written = head.size();

  constexpr std::size_t kChunk = 4096;
  std::vector<char> buf(kChunk * kTagRecordSize);
  std::size_t i = 0;
  while (i < f.records.size()) {
    const std::size_t n = std::min(kChunk, f.records.size() - i);
    for (std::size_t k = 0; k < n; ++k) {
      char* dst = buf.data() + k * kTagRecordSize;
      dst[0] = static_cast<char>(f.records[i + k].channel);
      detail::put_u64(dst + 1, f.records[i + k].timestamp);
    }
    os.write(buf.data(), static_cast<std::streamsize>(n * kTagRecordSize));
    written += n * kTagRecordSize;
    i += n;
  }
  if (!os) throw IoError("failed writing tag stream");
  return written;
}

/// Parses the binary layout. Errors:
///  - kUnsupportedVersion: version field is not 1;
///  - kTruncated: input ends early; offset() is the byte offset where the
///    first incomplete element starts (end of the last valid record);
///  - kCorrupt: bad magic, unknown channel id, out-of-order timestamps
///    (offset() = record index), or trailing bytes.
inline TagFile parse_tags(std::istream& is) {
  using K = FormatError::Kind;
  std::uint64_t pos = 0;
  auto read_exact = [&](void* dst, std::size_t n, const char* what) {
    is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) {
      throw FormatError(K::kTruncated,
                        std::string("truncated ") + what + " at byte " + std::to_string(pos), pos);
    }
    pos += n;
  };

  unsigned char fixed[kTagFixedHeaderSize];
  read_exact(fixed, kTagFixedHeaderSize, "header");
  if (std::memcmp(fixed, kTagMagic, 8) != 0) throw FormatError(K::kCorrupt, "bad magic", 0);
  const auto version = static_cast<std::uint32_t>(detail::get_le(fixed + 8, 4));
  if (version != kTagVersion) {
    throw FormatError(K::kUnsupportedVersion,
                      "unsupported tag format version " + std::to_string(version), 8);
  }
  const auto unit = detail::get_le(fixed + 12, 4);
  if (unit != 1) throw FormatError(K::kCorrupt, "unsupported time unit " + std::to_string(unit), 12);

  TagFile f;
  f.duration_ps = detail::get_le(fixed + 16, 8);
  const std::uint64_t count = detail::get_le(fixed + 24, 8);
  const auto nchan = static_cast<std::size_t>(detail::get_le(fixed + 32, 2));
  std::array<bool, 256> known{};
  for (std::size_t c = 0; c < nchan; ++c) {
    unsigned char idlen[2];
    read_exact(idlen, 2, "channel table");
    TagChannel ch;
    ch.id = idlen[0];
    ch.name.resize(idlen[1]);
    read_exact(ch.name.data(), idlen[1], "channel table");
    if (known[ch.id]) {
      throw FormatError(K::kCorrupt, "duplicate channel id " + std::to_string(ch.id), pos);
    }
    known[ch.id] = true;
    f.channels.push_back(std::move(ch));
  }

  f.records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  constexpr std::size_t kChunk = 4096;
  std::vector<unsigned char> buf(kChunk * kTagRecordSize);
  std::uint64_t done = 0;
  std::uint64_t last = 0;
  std::uint8_t last_ch = 0;
  while (done < count) {
    const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(kChunk, count - done));
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * kTagRecordSize));
    const std::size_t got = static_cast<std::size_t>(is.gcount());
    const std::size_t whole = got / kTagRecordSize;
    for (std::size_t k = 0; k < whole; ++k) {
      const unsigned char* rec = buf.data() + k * kTagRecordSize;
      TagRecord r{rec[0], detail::get_le(rec + 1, 8)};
      const std::uint64_t index = done + k;
      if (!known[r.channel]) {
        throw FormatError(K::kCorrupt,
                          "record " + std::to_string(index) + " uses unknown channel id " +
                              std::to_string(r.channel),
                          index);
      }
      if (index > 0 && (r.timestamp < last || (r.timestamp == last && r.channel < last_ch))) {
        throw FormatError(K::kCorrupt,
                          "record " + std::to_string(index) + " breaks time ordering", index);
      }
      if (r.timestamp > f.duration_ps) {
        throw FormatError(K::kCorrupt,
                          "record " + std::to_string(index) + " lies beyond the run duration",
                          index);
      }
      last = r.timestamp;
      last_ch = r.channel;
      f.records.push_back(r);
    }
    if (whole < n) {
      const std::uint64_t offset = pos + (done + whole) * kTagRecordSize;
      throw FormatError(K::kTruncated,
                        "truncated record " + std::to_string(done + whole) +
                            "; last valid record ends at byte " + std::to_string(offset),
                        offset);
    }
    done += n;
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError(K::kCorrupt, "trailing bytes after the declared records",
                      pos + count * kTagRecordSize);
  }
  return f;
}

/// Stable merge of per-channel streams into a tag file (ties by channel id).
inline TagFile to_tag_file(const StreamBundle& bundle) {
  validate(bundle);
  TagFile f;
  f.duration_ps = bundle.duration_ps;
  f.channels = standard_channel_table();
  std::size_t total = 0;
  for (const auto& s : bundle.streams) total += s.size();
  f.records.reserve(total);
  std::array<std::size_t, kChannelCount> pos{};
  // k-way merge over four channels; channel order resolves ties.
  while (f.records.size() < total) {
    std::size_t best = kChannelCount;
    for (std::size_t c = 0; c < kChannelCount; ++c) {
      const auto& ts = bundle.streams[c].timestamps;
      if (pos[c] == ts.size()) continue;
      if (best == kChannelCount || ts[pos[c]] < bundle.streams[best].timestamps[pos[best]]) best = c;
    }
    f.records.push_back({static_cast<std::uint8_t>(best), bundle.streams[best].timestamps[pos[best]]});
    ++pos[best];
  }
  return f;
}

/// Splits a tag file back into per-channel streams; channels are matched by name.
inline StreamBundle to_bundle(const TagFile& f) {
  StreamBundle b;
  b.duration_ps = f.duration_ps;
  std::array<int, 256> slot;
  slot.fill(-1);
  for (const auto& c : f.channels) slot[c.id] = static_cast<int>(channel_from_name(c.name));
  for (const auto& r : f.records) {
    if (slot[r.channel] < 0) {
      throw FormatError(FormatError::Kind::kCorrupt, "unknown channel id " + std::to_string(r.channel));
    }
    b.streams[static_cast<std::size_t>(slot[r.channel])].timestamps.push_back(r.timestamp);
  }
  return b;
}

inline std::uint64_t write_tags(const StreamBundle& bundle, std::ostream& os) {
  return write_tags(to_tag_file(bundle), os);
}

inline void write_tags_csv(const TagFile& f, std::ostream& os) {
  validate(f);
  os << "# cascade-tags version=" << kTagVersion << '\n';
  os << "# duration_ps=" << f.duration_ps << '\n';
  for (const auto& c : f.channels) os << "# channel " << int(c.id) << ' ' << c.name << '\n';
  os << "channel,time_ps\n";
  for (const auto& r : f.records) os << int(r.channel) << ',' << r.timestamp << '\n';
}

inline TagFile parse_tags_csv(std::istream& is) {
  using K = FormatError::Kind;
  TagFile f;
  std::string line;
  bool header_seen = false;
  bool version_seen = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line.substr(1));
      std::string key;
      ls >> key;
      if (key.rfind("cascade-tags", 0) == 0) {
        std::string v;
        ls >> v;
        if (v != "version=1") throw FormatError(K::kUnsupportedVersion, "unsupported CSV version " + v);
        version_seen = true;
      } else if (key.rfind("duration_ps=", 0) == 0) {
        f.duration_ps = std::stoull(key.substr(12));
      } else if (key == "channel") {
        int id = -1;
        std::string name;
        ls >> id >> name;
        if (id < 0 || id > 255 || name.empty()) throw FormatError(K::kCorrupt, "bad channel line", lineno);
        f.channels.push_back({static_cast<std::uint8_t>(id), name});
      }
      continue;
    }
    if (!header_seen) {
      if (line != "channel,time_ps") throw FormatError(K::kCorrupt, "missing CSV header", lineno);
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError(K::kCorrupt, "malformed record line", lineno);
    try {
      const unsigned long id = std::stoul(line.substr(0, comma));
      if (id > 255) throw FormatError(K::kCorrupt, "channel id out of range", lineno);
      f.records.push_back({static_cast<std::uint8_t>(id), std::stoull(line.substr(comma + 1))});
    } catch (const std::logic_error&) {
      throw FormatError(K::kCorrupt, "malformed record line", lineno);
    }
  }
  if (!version_seen) throw FormatError(K::kCorrupt, "missing cascade-tags version line");
  try {
    validate(f);
  } catch (const FormatError& e) {
    throw FormatError(K::kCorrupt, e.what(), e.offset());
  }
  return f;
}

}  // namespace cascade

#endif  // CASCADE_TAGSTREAM_HPP
