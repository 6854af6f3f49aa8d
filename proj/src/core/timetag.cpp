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

#include "pdcmetro/timetag.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>

#include "pdcmetro/error.hpp"

namespace pdcm {

namespace {

constexpr std::size_t kChunk = std::size_t{1} << 16;
constexpr std::size_t kBinaryRecord = 9;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
bool parse_unsigned(std::string_view s, T &out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

// --- reader ---------------------------------------------------------------

TimetagReader::TimetagReader(std::istream &in, TimetagFormat format, std::size_t reorder_capacity)
    : in_(in), format_(format), capacity_(reorder_capacity), buf_(kChunk) {}

bool TimetagReader::fill() {
    if (eof_) return false;
    if (pos_ > 0) {
        std::memmove(buf_.data(), buf_.data() + pos_, len_ - pos_);
        len_ -= pos_;
        pos_ = 0;
    }
    if (len_ == buf_.size()) return false;
    in_.read(buf_.data() + len_, static_cast<std::streamsize>(buf_.size() - len_));
    const auto got = static_cast<std::size_t>(in_.gcount());
    len_ += got;
    if (got == 0 || !in_) eof_ = true;
    if (in_.bad()) throw Error(Errc::io, "read error on timetag stream");
    return got > 0;
}

bool TimetagReader::read_binary(TimetagRecord &out) {
    if (len_ - pos_ < kBinaryRecord) fill();
    const std::size_t have = len_ - pos_;
    if (have == 0) return false;
    if (have < kBinaryRecord) {
        throw Error(Errc::parse, "record " + std::to_string(read_) + " (byte offset " +
                                     std::to_string(bytes_consumed_) + "): truncated, " + std::to_string(have) +
                                     " of 9 bytes");
    }
    const auto *p = reinterpret_cast<const unsigned char *>(buf_.data() + pos_);
    if (p[0] >= kChannels) {
        throw Error(Errc::parse, "record " + std::to_string(read_) + " (byte offset " +
                                     std::to_string(bytes_consumed_) + "): channel " + std::to_string(p[0]) +
                                     " out of range 0-15");
    }
    std::uint64_t t = 0;
    for (int b = 7; b >= 0; --b) t = (t << 8) | p[1 + b];
    out.channel = p[0];
    out.time_ps = t;
    pos_ += kBinaryRecord;
    bytes_consumed_ += kBinaryRecord;
    return true;
}

bool TimetagReader::read_csv(TimetagRecord &out) {
    for (;;) {
        const char *begin = buf_.data() + pos_;
        const char *nl = static_cast<const char *>(std::memchr(begin, '\n', len_ - pos_));
        if (!nl && !eof_) {
            if (pos_ == 0 && len_ == buf_.size()) {
                throw Error(Errc::parse, "line " + std::to_string(line_ + 1) + ": line too long");
            }
            fill();
            continue;
        }
        if (!nl && pos_ == len_) return false;
        const std::size_t n = nl ? static_cast<std::size_t>(nl - begin) : len_ - pos_;
        const std::string_view line = trim(std::string_view(begin, n));
        pos_ += nl ? n + 1 : n;
        ++line_;
        if (line.empty() || line.front() == '#') continue;
        if (read_ == 0 && line == "channel,time_ps") continue;
        const auto comma = line.find(',');
        unsigned channel = 0;
        std::uint64_t t = 0;
        if (comma == std::string_view::npos || !parse_unsigned(trim(line.substr(0, comma)), channel) ||
            !parse_unsigned(trim(line.substr(comma + 1)), t)) {
            throw Error(Errc::parse, "line " + std::to_string(line_) + ": expected 'channel,time_ps', got '" +
                                         std::string(line) + "'");
        }
        if (channel >= kChannels) {
            throw Error(Errc::parse,
                        "line " + std::to_string(line_) + ": channel " + std::to_string(channel) + " out of range 0-15");
        }
        out.channel = static_cast<std::uint8_t>(channel);
        out.time_ps = t;
        return true;
    }
}

bool TimetagReader::read_raw(TimetagRecord &out) {
    const bool ok = format_ == TimetagFormat::csv ? read_csv(out) : read_binary(out);
    if (ok) ++read_;
    return ok;
}

bool TimetagReader::next(TimetagRecord &out) {
    TimetagRecord rec;
    while (pending_.size() <= capacity_ && read_raw(rec)) {
        pending_.emplace(rec, format_ == TimetagFormat::csv ? line_ : read_ - 1);
    }
    if (pending_.empty()) return false;
    const auto [top, where] = pending_.top();
    pending_.pop();
    if (last_emitted_ && top.time_ps < *last_emitted_) {
        throw Error(Errc::parse, std::string(format_ == TimetagFormat::csv ? "line " : "record ") +
                                     std::to_string(where) + ": time " + std::to_string(top.time_ps) +
                                     " ps is out of order beyond the reorder buffer of " +
                                     std::to_string(capacity_) + " records");
    }
    last_emitted_ = top.time_ps;
    out = top;
    return true;
}

std::vector<TimetagRecord> parse_timetags(std::istream &in, TimetagFormat format, std::size_t reorder_capacity) {
    TimetagReader reader(in, format, reorder_capacity);
    std::vector<TimetagRecord> out;
    TimetagRecord rec;
    while (reader.next(rec)) out.push_back(rec);
    return out;
}

void write_timetags(std::ostream &out, std::span<const TimetagRecord> records, TimetagFormat format) {
    if (format == TimetagFormat::csv) {
        out << "channel,time_ps\n";
        char line[48];
        for (const auto &r : records) {
            char *p = std::to_chars(line, line + sizeof line, static_cast<unsigned>(r.channel)).ptr;
            *p++ = ',';
            p = std::to_chars(p, line + sizeof line, r.time_ps).ptr;
            *p++ = '\n';
            out.write(line, p - line);
        }
        return;
    }
    std::vector<char> buf;
    buf.reserve(records.size() * kBinaryRecord);
    for (const auto &r : records) {
        buf.push_back(static_cast<char>(r.channel));
        for (int b = 0; b < 8; ++b) buf.push_back(static_cast<char>((r.time_ps >> (8 * b)) & 0xff));
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

// --- channel map ----------------------------------------------------------

const char *to_string(Mode m) {
    switch (m) {
        case Mode::ah:
            return "a_h";
        case Mode::av:
            return "a_v";
        case Mode::bh:
            return "b_h";
        case Mode::bv:
            return "b_v";
    }
    return "?";
}

ChannelMap::ChannelMap() {
    std::array<Mode, kChannels> modes{};
    for (int c = 0; c < kChannels; ++c) modes[static_cast<std::size_t>(c)] = static_cast<Mode>(c / 4);
    *this = ChannelMap(modes);
}

ChannelMap::ChannelMap(const std::array<Mode, kChannels> &modes) : modes_(modes) {
    for (int c = 0; c < kChannels; ++c) {
        masks_[static_cast<std::size_t>(modes[static_cast<std::size_t>(c)])] |= static_cast<std::uint16_t>(1u << c);
    }
    for (int m = 0; m < 4; ++m) {
        if (std::popcount(masks_[static_cast<std::size_t>(m)]) != 4) {
            throw Error(Errc::parse, std::string("channel map must give mode ") + to_string(static_cast<Mode>(m)) +
                                         " exactly 4 channels");
        }
    }
}

ChannelMap ChannelMap::parse(std::istream &in) {
    std::array<Mode, kChannels> modes{};
    std::array<bool, kChannels> seen{};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        unsigned channel = 0;
        if (eq == std::string_view::npos || !parse_unsigned(trim(line.substr(0, eq)), channel) ||
            channel >= kChannels) {
            throw Error(Errc::parse, "map line " + std::to_string(line_no) + ": expected 'channel=mode' with channel 0-15");
        }
        const std::string_view name = trim(line.substr(eq + 1));
        Mode m;
        if (name == "a_h") {
            m = Mode::ah;
        } else if (name == "a_v") {
            m = Mode::av;
        } else if (name == "b_h") {
            m = Mode::bh;
        } else if (name == "b_v") {
            m = Mode::bv;
        } else {
            throw Error(Errc::parse, "map line " + std::to_string(line_no) + ": unknown mode '" + std::string(name) +
                                         "' (a_h, a_v, b_h, b_v)");
        }
        if (seen[channel]) {
            throw Error(Errc::parse, "map line " + std::to_string(line_no) + ": channel " + std::to_string(channel) +
                                         " assigned twice");
        }
        seen[channel] = true;
        modes[channel] = m;
    }
    for (int c = 0; c < kChannels; ++c) {
        if (!seen[static_cast<std::size_t>(c)]) {
            throw Error(Errc::parse, "channel map leaves channel " + std::to_string(c) + " unassigned");
        }
    }
    return ChannelMap(modes);
}

std::array<int, 4> ChannelMap::channels(Mode m) const {
    std::array<int, 4> out{};
    std::size_t k = 0;
    for (int c = 0; c < kChannels; ++c) {
        if (modes_[static_cast<std::size_t>(c)] == m) out[k++] = c;
    }
    return out;
}

DetectionPattern ChannelMap::reduce(std::uint16_t pattern) const {
    return DetectionPattern{std::popcount(static_cast<std::uint16_t>(pattern & masks_[0])),
                            std::popcount(static_cast<std::uint16_t>(pattern & masks_[1])),
                            std::popcount(static_cast<std::uint16_t>(pattern & masks_[2])),
                            std::popcount(static_cast<std::uint16_t>(pattern & masks_[3]))};
}

// --- counting -------------------------------------------------------------

std::uint64_t CoincidenceCounts::total_clicks() const {
    std::uint64_t total = 0;
    for (std::size_t m = 1; m < patterns.size(); ++m) {
        total += patterns[m] * static_cast<std::uint64_t>(std::popcount(static_cast<std::uint16_t>(m)));
    }
    return total;
}

std::uint64_t CoincidenceCounts::windows_with_clicks(int n) const {
    std::uint64_t total = 0;
    for (std::size_t m = 0; m < patterns.size(); ++m) {
        if (std::popcount(static_cast<std::uint16_t>(m)) == n) total += patterns[m];
    }
    return total;
}

CoincidenceCounter::CoincidenceCounter(ChannelMap map, CountOptions options)
    : map_(std::move(map)), options_(options) {
    if (options_.window_ps == 0) throw Error(Errc::domain, "coincidence window must be positive");
    if (options_.period_ps) {
        const std::uint64_t period = *options_.period_ps;
        if (period == 0) throw Error(Errc::domain, "pulse period must be positive");
        if (options_.window_ps > period) throw Error(Errc::domain, "coincidence window exceeds the pulse period");
        offset_ = options_.offset_ps.value_or(period / 2);
        if (offset_ >= period) throw Error(Errc::domain, "window offset must be below the pulse period");
    } else if (options_.pulses) {
        throw Error(Errc::domain, "a pulse count needs a pulse period");
    }
    counts_.window_ps = options_.window_ps;
    counts_.period_ps = options_.period_ps;
}

void CoincidenceCounter::flush() {
    ++counts_.patterns[mask_];
    ++counts_.reduced[CoincidenceCounts::reduced_index(map_.reduce(mask_))];
    ++nonempty_;
    open_ = false;
    mask_ = 0;
}

void CoincidenceCounter::add(const TimetagRecord &rec) {
    if (rec.channel >= kChannels) throw Error(Errc::domain, "channel out of range 0-15");
    if (rec.time_ps < last_time_) throw Error(Errc::domain, "records must arrive in time order");
    last_time_ = rec.time_ps;
    const std::uint64_t w = options_.window_ps;
    std::uint64_t key = 0;
    if (options_.period_ps) {
        // Window k covers [kP + o - w/2, kP + o - w/2 + w).
        const std::uint64_t period = *options_.period_ps;
        const std::uint64_t shifted = rec.time_ps + period + w / 2 - offset_;
        if (shifted % period >= w || shifted / period == 0) {
            ++counts_.rejected_records;
            return;
        }
        key = shifted / period - 1;
        if (open_ && key != window_key_) flush();
        last_pulse_ = key;
    } else {
        if (open_ && rec.time_ps >= window_key_ + w) flush();
        key = rec.time_ps;
    }
    if (!open_) {
        open_ = true;
        window_key_ = key;
    }
    ++counts_.accepted_records;
    const auto bit = static_cast<std::uint16_t>(1u << rec.channel);
    if (mask_ & bit) {
        ++counts_.duplicate_clicks;
    } else {
        mask_ |= bit;
    }
}

CoincidenceCounts CoincidenceCounter::finish() {
    if (open_) flush();
    if (options_.period_ps) {
        const std::uint64_t seen = last_pulse_ ? *last_pulse_ + 1 : 0;
        const std::uint64_t pulses = options_.pulses.value_or(seen);
        if (pulses < seen) {
            throw Error(Errc::domain, "pulse count " + std::to_string(pulses) + " is below the " +
                                          std::to_string(seen) + " pulses present in the stream");
        }
        counts_.windows = pulses;
        counts_.patterns[0] += pulses - nonempty_;
        counts_.reduced[0] += pulses - nonempty_;
    } else {
        counts_.windows = nonempty_;
    }
    return std::move(counts_);
}

CoincidenceCounts count_coincidences(std::span<const TimetagRecord> records, const ChannelMap &map,
                                     const CountOptions &options) {
    CoincidenceCounter counter(map, options);
    for (const auto &r : records) counter.add(r);
    return counter.finish();
}

CoincidenceCounts count_coincidences(TimetagReader &reader, const ChannelMap &map, const CountOptions &options) {
    CoincidenceCounter counter(map, options);
    TimetagRecord rec;
    while (reader.next(rec)) counter.add(rec);
    return counter.finish();
}

// --- generator ------------------------------------------------------------

std::vector<TimetagRecord> generate_synthetic_timetags(const ProbabilityModel &model, const RotationSpec &rot,
                                                       const GeneratorOptions &options, const ChannelMap &map) {
    if (options.pulses < 1) throw Error(Errc::domain, "generator needs at least one pulse");
    if (options.period_ps < 2) throw Error(Errc::domain, "pulse period too short");
    if (!(options.jitter_ps >= 0.0)) throw Error(Errc::domain, "jitter must be non-negative");
    if (model.max_clicks_a() > 4 || model.max_clicks_b() > 4) {
        throw Error(Errc::domain, "synthetic streams need at most 4 clicks per mode (d <= 4)");
    }
    const PatternDistribution dist = model.distribution(rot);
    std::vector<double> weights(dist.probabilities.size());
    std::transform(dist.probabilities.begin(), dist.probabilities.end(), weights.begin(),
                   [](double p) { return std::max(p, 0.0); });
    std::discrete_distribution<std::size_t> draw(weights.begin(), weights.end());
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> jitter(0.0, 1.0);

    const std::array<std::array<int, 4>, 4> channels = {map.channels(Mode::ah), map.channels(Mode::av),
                                                        map.channels(Mode::bh), map.channels(Mode::bv)};
    const double half = static_cast<double>(options.period_ps / 2);
    const double limit = half - 1.0;

    std::vector<TimetagRecord> out;
    std::vector<TimetagRecord> pulse;
    for (std::uint64_t k = 0; k < options.pulses; ++k) {
        const DetectionPattern &r = dist.patterns[draw(rng)];
        const std::array<int, 4> clicks = {r.ah, r.av, r.bh, r.bv};
        if (r.path_a() + r.path_b() == 0) continue;
        pulse.clear();
        const std::uint64_t centre = k * options.period_ps + options.period_ps / 2;
        for (std::size_t m = 0; m < 4; ++m) {
            std::array<int, 4> pool = channels[m];
            for (int j = 0; j < clicks[m]; ++j) {
                // Partial Fisher-Yates: distinct channels within the mode.
                std::uniform_int_distribution<int> pick(j, 3);
                std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(pick(rng))]);
                double dt = options.jitter_ps > 0.0 ? options.jitter_ps * jitter(rng) : 0.0;
                dt = std::clamp(dt, -limit, limit);
                const auto t = static_cast<std::uint64_t>(static_cast<std::int64_t>(centre) + std::llround(dt));
                pulse.push_back({static_cast<std::uint8_t>(pool[static_cast<std::size_t>(j)]), t});
            }
        }
        std::sort(pulse.begin(), pulse.end(), [](const TimetagRecord &a, const TimetagRecord &b) {
            return a.time_ps != b.time_ps ? a.time_ps < b.time_ps : a.channel < b.channel;
        });
        out.insert(out.end(), pulse.begin(), pulse.end());
    }
    return out;
}

}  // namespace pdcm
