// Copyright 2026 The pdcmetro Authors
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

// Sixteen-channel timetag streams: parsing, pulse-windowed coincidence
// counting and a synthetic generator driven by the probability model.
//
// Wire formats
//   csv     "channel,time_ps" per line, unsigned decimal; '#' comments; an
//           optional "channel,time_ps" header line.
//   binary  9-byte records: channel (1 byte) then time in ps (8 bytes,
//           unsigned little-endian). No header.

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "pdcmetro/engine.hpp"

namespace pdcm {

inline constexpr int kChannels = 16;
inline constexpr std::size_t kPatternCount = std::size_t{1} << kChannels;

struct TimetagRecord {
    std::uint8_t channel = 0;
    std::uint64_t time_ps = 0;

    bool operator==(const TimetagRecord &) const = default;
};

enum class TimetagFormat { csv, binary };

/// Streaming reader. Out-of-order records are tolerated while they fit in a
/// bounded reorder buffer; anything older than the last emitted record is a
/// parse error.
class TimetagReader {
   public:
    TimetagReader(std::istream &in, TimetagFormat format, std::size_t reorder_capacity = 256);

    /// False at end of stream.
    bool next(TimetagRecord &out);

    /// Records read from the input so far.
    std::uint64_t records_read() const { return read_; }

   private:
    bool fill();
    bool read_raw(TimetagRecord &out);
    bool read_csv(TimetagRecord &out);
    bool read_binary(TimetagRecord &out);

    struct Later {
        bool operator()(const std::pair<TimetagRecord, std::uint64_t> &a,
                        const std::pair<TimetagRecord, std::uint64_t> &b) const {
            return a.first.time_ps != b.first.time_ps ? a.first.time_ps > b.first.time_ps : a.second > b.second;
        }
    };

    std::istream &in_;
    TimetagFormat format_;
    std::size_t capacity_;
    std::vector<char> buf_;
    std::size_t pos_ = 0;
    std::size_t len_ = 0;
    bool eof_ = false;
    std::uint64_t line_ = 0;
    std::uint64_t read_ = 0;
    std::uint64_t bytes_consumed_ = 0;
    std::optional<std::uint64_t> last_emitted_;
    std::priority_queue<std::pair<TimetagRecord, std::uint64_t>, std::vector<std::pair<TimetagRecord, std::uint64_t>>,
                        Later>
        pending_;
};

std::vector<TimetagRecord> parse_timetags(std::istream &in, TimetagFormat format, std::size_t reorder_capacity = 256);

void write_timetags(std::ostream &out, std::span<const TimetagRecord> records, TimetagFormat format);

enum class Mode : std::uint8_t { ah = 0, av = 1, bh = 2, bv = 3 };

const char *to_string(Mode m);

/// Channel to mode assignment; four channels per mode.
class ChannelMap {
   public:
    /// Channels 0-3 a_h, 4-7 a_v, 8-11 b_h, 12-15 b_v.
    ChannelMap();
    explicit ChannelMap(const std::array<Mode, kChannels> &modes);

    /// "channel=mode" lines with modes a_h, a_v, b_h, b_v; '#' comments.
    static ChannelMap parse(std::istream &in);

    Mode mode(int channel) const { return modes_[static_cast<std::size_t>(channel)]; }
    /// Bit mask of the channels belonging to `m`.
    std::uint16_t mask(Mode m) const { return masks_[static_cast<std::size_t>(m)]; }
    std::array<int, 4> channels(Mode m) const;

    DetectionPattern reduce(std::uint16_t pattern) const;

   private:
    std::array<Mode, kChannels> modes_;
    std::array<std::uint16_t, 4> masks_{};
};

struct CountOptions {
    std::uint64_t window_ps = 2500;
    /// Pulse clock period; unset anchors each window at its first click.
    std::optional<std::uint64_t> period_ps = 12500;
    /// Window centre relative to the pulse clock; defaults to half a period.
    std::optional<std::uint64_t> offset_ps;
    /// Total pulses in the run, counting trailing empty ones. Defaults to the
    /// last pulse that held a record.
    std::optional<std::uint64_t> pulses;
};

struct CoincidenceCounts {
    /// Windows per 16-bit channel mask; entry 0 holds empty windows.
    std::vector<std::uint64_t> patterns = std::vector<std::uint64_t>(kPatternCount, 0);
    /// Windows per reduced (a_h, a_v, b_h, b_v) click pattern, indexed by
    /// reduced_index().
    std::array<std::uint64_t, 625> reduced{};
    std::uint64_t windows = 0;
    std::uint64_t window_ps = 0;
    std::optional<std::uint64_t> period_ps;
    /// Records that fell inside a window, duplicates included.
    std::uint64_t accepted_records = 0;
    /// Repeat clicks on a channel already fired in the same window.
    std::uint64_t duplicate_clicks = 0;
    /// Records between windows.
    std::uint64_t rejected_records = 0;

    static std::size_t reduced_index(const DetectionPattern &r) {
        return static_cast<std::size_t>(((r.ah * 5 + r.av) * 5 + r.bh) * 5 + r.bv);
    }
    std::uint64_t count(const DetectionPattern &r) const { return reduced[reduced_index(r)]; }
    /// Clicks across all windows after duplicate collapse.
    std::uint64_t total_clicks() const;
    /// Windows with exactly n clicks.
    std::uint64_t windows_with_clicks(int n) const;
};

/// Single-pass counter with memory bounded by the pattern table.
class CoincidenceCounter {
   public:
    CoincidenceCounter(ChannelMap map, CountOptions options);

    /// Records must arrive time-ordered.
    void add(const TimetagRecord &rec);
    CoincidenceCounts finish();

   private:
    void flush();

    ChannelMap map_;
    CountOptions options_;
    std::uint64_t offset_ = 0;
    CoincidenceCounts counts_;
    bool open_ = false;
    std::uint64_t window_key_ = 0;  // pulse index, or window start without a clock
    std::uint16_t mask_ = 0;
    std::uint64_t nonempty_ = 0;
    std::optional<std::uint64_t> last_pulse_;
    std::uint64_t last_time_ = 0;
};

CoincidenceCounts count_coincidences(std::span<const TimetagRecord> records, const ChannelMap &map,
                                     const CountOptions &options = {});
CoincidenceCounts count_coincidences(TimetagReader &reader, const ChannelMap &map, const CountOptions &options = {});

struct GeneratorOptions {
    std::uint64_t pulses = 1;
    std::uint64_t period_ps = 12500;
    double jitter_ps = 100.0;
    std::uint64_t seed = 0;
};

/// Per pulse: draw a pattern from the full P_r, place each mode's clicks on
/// distinct channels of that mode, stamp them at the pulse centre plus
/// Gaussian jitter (clamped inside the period). Output is time-ordered.
std::vector<TimetagRecord> generate_synthetic_timetags(const ProbabilityModel &model, const RotationSpec &rot,
                                                       const GeneratorOptions &options,
                                                       const ChannelMap &map = ChannelMap());

}  // namespace pdcm
