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

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "pdcmetro/timetag.hpp"
#include "support/check.hpp"
#include "support/gen.hpp"

using namespace pdcm;

namespace {

std::string parse_error(const std::string &bytes, TimetagFormat format, std::size_t reorder = 256) {
    std::istringstream in(bytes);
    try {
        parse_timetags(in, format, reorder);
    } catch (const Error &e) {
        return e.what();
    }
    return "";
}

std::vector<TimetagRecord> random_records(gen::Gen &g, std::size_t n) {
    std::vector<TimetagRecord> out(n);
    std::uint64_t t = g.integer(0, 1000);
    for (auto &r : out) {
        t += static_cast<std::uint64_t>(g.integer(0, 50000));
        r.channel = static_cast<std::uint8_t>(g.integer(0, 15));
        r.time_ps = t;
    }
    return out;
}

std::string serialize(const std::vector<TimetagRecord> &records, TimetagFormat format) {
    std::ostringstream out;
    write_timetags(out, records, format);
    return out.str();
}

const ProbabilityModel &model() {
    static const ProbabilityModel m({0.061}, {4, 0.23, 0.12});
    return m;
}

}  // namespace

TEST_CASE("empty streams") {
    for (auto format : {TimetagFormat::csv, TimetagFormat::binary}) {
        std::istringstream in("");
        CHECK(parse_timetags(in, format).empty());
    }
    std::istringstream comments("# nothing\nchannel,time_ps\n\n");
    CHECK(parse_timetags(comments, TimetagFormat::csv).empty());
    const CoincidenceCounts c = count_coincidences(std::vector<TimetagRecord>{}, ChannelMap());
    CHECK(c.windows == 0);
    CHECK(c.total_clicks() == 0);
}

TEST_CASE("round trips of 1e5 generated records") {
    GeneratorOptions opts;
    opts.pulses = 100000;
    opts.seed = 5;
    const auto records = generate_synthetic_timetags(ProbabilityModel({0.6}, {4, 0.9, 0.9}), {1.0, 0.0}, opts);
    REQUIRE(records.size() >= 100000);
    for (auto format : {TimetagFormat::csv, TimetagFormat::binary}) {
        std::istringstream in(serialize(records, format));
        CHECK(parse_timetags(in, format) == records);
    }
    CHECK(serialize(records, TimetagFormat::binary).size() == 9 * records.size());
}

TEST_CASE("property: serialization round trips") {
    gen::for_all(30, 81, [](gen::Gen &g) {
        const auto records = random_records(g, static_cast<std::size_t>(g.integer(0, 300)));
        for (auto format : {TimetagFormat::csv, TimetagFormat::binary}) {
            std::istringstream in(serialize(records, format));
            CHECK(parse_timetags(in, format) == records);
        }
    });
}

TEST_CASE("binary layout") {
    const std::vector<TimetagRecord> one{{7, 0x0102030405060708ull}};
    const std::string bytes = serialize(one, TimetagFormat::binary);
    REQUIRE(bytes.size() == 9);
    CHECK(bytes[0] == 7);
    CHECK(bytes[1] == 0x08);
    CHECK(bytes[8] == 0x01);
    CHECK(serialize(one, TimetagFormat::csv).find("7,72623859790382856") != std::string::npos);
}

TEST_CASE("corrupted records are located") {
    std::vector<TimetagRecord> records;
    for (std::uint64_t i = 0; i < 10; ++i) records.push_back({static_cast<std::uint8_t>(i), 1000 * i});
    std::string bytes = serialize(records, TimetagFormat::binary);
    bytes[9 * 6] = static_cast<char>(40);
    const std::string binary = parse_error(bytes, TimetagFormat::binary);
    CHECK(binary.find("record 6") != std::string::npos);
    CHECK(binary.find("byte offset 54") != std::string::npos);

    const std::string truncated = parse_error(serialize(records, TimetagFormat::binary).substr(0, 9 * 4 + 5),
                                              TimetagFormat::binary);
    CHECK(truncated.find("record 4") != std::string::npos);
    CHECK(truncated.find("truncated") != std::string::npos);

    CHECK(parse_error("1,100\n2,200\n3,x\n", TimetagFormat::csv).find("line 3") != std::string::npos);
    CHECK(parse_error("1,100\n16,200\n", TimetagFormat::csv).find("line 2") != std::string::npos);
    CHECK(parse_error("1,100\n2\n", TimetagFormat::csv).find("line 2") != std::string::npos);
    CHECK(parse_error("1,-5\n", TimetagFormat::csv) != "");
    std::istringstream bad("1,100\n2;200\n");
    CHECK(check::error_of([&] { parse_timetags(bad, TimetagFormat::csv); }) == Errc::parse);
}

TEST_CASE("reorder buffer") {
    CHECK(parse_error("0,300\n1,100\n2,200\n3,400\n", TimetagFormat::csv, 4) == "");
    std::istringstream in("0,300\n1,100\n2,200\n3,400\n");
    const auto sorted = parse_timetags(in, TimetagFormat::csv, 4);
    REQUIRE(sorted.size() == 4);
    CHECK(std::is_sorted(sorted.begin(), sorted.end(),
                         [](const auto &a, const auto &b) { return a.time_ps < b.time_ps; }));
    CHECK(sorted[0] == TimetagRecord{1, 100});

    std::string late;
    for (int i = 1; i <= 10; ++i) late += "0," + std::to_string(1000 * i) + "\n";
    late += "5,10\n";
    const std::string message = parse_error(late, TimetagFormat::csv, 4);
    CHECK(message.find("line 11") != std::string::npos);
    CHECK(message.find("out of order") != std::string::npos);
    CHECK(parse_error(late, TimetagFormat::csv, 16) == "");
}

TEST_CASE("property: bounded shuffles are restored") {
    gen::for_all(20, 82, [](gen::Gen &g) {
        auto records = random_records(g, 200);
        for (std::size_t i = 0; i < records.size(); ++i) records[i].channel = static_cast<std::uint8_t>(i % 16);
        auto shuffled = records;
        for (std::size_t i = 0; i + 8 <= shuffled.size(); i += 8)
            std::shuffle(shuffled.begin() + static_cast<long>(i), shuffled.begin() + static_cast<long>(i) + 8,
                         g.engine());
        std::istringstream in(serialize(shuffled, TimetagFormat::binary));
        const auto back = parse_timetags(in, TimetagFormat::binary, 16);
        REQUIRE(back.size() == records.size());
        for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i].time_ps == records[i].time_ps);
    });
}

TEST_CASE("a two-channel coincidence") {
    const std::vector<TimetagRecord> recs{{0, 6000}, {5, 6400}};
    const CoincidenceCounts c = count_coincidences(recs, ChannelMap());
    CHECK(c.patterns[(1u << 0) | (1u << 5)] == 1);
    CHECK(c.windows == 1);
    CHECK(c.count({1, 1, 0, 0}) == 1);
    CHECK(c.windows_with_clicks(2) == 1);
    CHECK(c.rejected_records == 0);
}

TEST_CASE("a window narrower than the jitter splits the pair") {
    const std::vector<TimetagRecord> recs{{0, 6000}, {5, 6400}};
    CountOptions narrow;
    narrow.period_ps = std::nullopt;
    narrow.window_ps = 200;
    const CoincidenceCounts split = count_coincidences(recs, ChannelMap(), narrow);
    CHECK(split.windows == 2);
    CHECK(split.patterns[1u << 0] == 1);
    CHECK(split.patterns[1u << 5] == 1);
    CHECK(split.windows_with_clicks(1) == 2);

    CountOptions clocked;
    clocked.window_ps = 300;
    const CoincidenceCounts gated =
        count_coincidences(std::vector<TimetagRecord>{{0, 6200}, {5, 6400}}, ChannelMap(), clocked);
    CHECK(gated.patterns[1u << 0] == 1);
    CHECK(gated.rejected_records == 1);
}

TEST_CASE("repeat clicks on one channel collapse") {
    const std::vector<TimetagRecord> recs{{3, 6000}, {3, 6100}, {3, 6200}, {12, 6300}};
    const CoincidenceCounts c = count_coincidences(recs, ChannelMap());
    CHECK(c.patterns[(1u << 3) | (1u << 12)] == 1);
    CHECK(c.duplicate_clicks == 2);
    CHECK(c.accepted_records == 4);
    CHECK(c.total_clicks() == 2);
    CHECK(c.count({1, 0, 0, 1}) == 1);
}

TEST_CASE("pulse clock accounting") {
    const std::vector<TimetagRecord> recs{{0, 6250}, {4, 12500 * 3 + 6250}};
    CountOptions opts;
    const CoincidenceCounts c = count_coincidences(recs, ChannelMap(), opts);
    CHECK(c.windows == 4);
    CHECK(c.patterns[0] == 2);
    CHECK(c.count({0, 0, 0, 0}) == 2);
    opts.pulses = 10;
    CHECK(count_coincidences(recs, ChannelMap(), opts).patterns[0] == 8);
    opts.pulses = 2;
    CHECK(check::error_of([&] { count_coincidences(recs, ChannelMap(), opts); }) == Errc::domain);
}

TEST_CASE("property: conservation and reduction") {
    gen::for_all(20, 83, [](gen::Gen &g) {
        auto records = random_records(g, static_cast<std::size_t>(g.integer(1, 2000)));
        CountOptions opts;
        opts.window_ps = static_cast<std::uint64_t>(g.integer(100, 12500));
        if (g.coin()) opts.period_ps = std::nullopt;
        const CoincidenceCounts c = count_coincidences(records, ChannelMap(), opts);
        CHECK(c.accepted_records + c.rejected_records == records.size());
        CHECK(c.total_clicks() == c.accepted_records - c.duplicate_clicks);
        std::uint64_t windows = 0;
        for (int n = 0; n <= 16; ++n) windows += c.windows_with_clicks(n);
        CHECK(windows == c.windows);

        std::array<std::uint64_t, 625> reduced{};
        std::uint64_t by_popcount = 0;
        for (std::size_t mask = 0; mask < kPatternCount; ++mask) {
            if (!c.patterns[mask]) continue;
            const DetectionPattern r = ChannelMap().reduce(static_cast<std::uint16_t>(mask));
            CHECK(r.ah + r.av + r.bh + r.bv == std::popcount(mask));
            reduced[CoincidenceCounts::reduced_index(r)] += c.patterns[mask];
            if (std::popcount(mask) == 2) by_popcount += c.patterns[mask];
        }
        CHECK(reduced == c.reduced);
        CHECK(by_popcount == c.windows_with_clicks(2));
    });
}

TEST_CASE("channel maps") {
    const ChannelMap def;
    CHECK(def.mask(Mode::ah) == 0x000f);
    CHECK(def.mask(Mode::bv) == 0xf000);
    CHECK(def.reduce(0x0011) == DetectionPattern{1, 1, 0, 0});

    std::istringstream swapped(
        "# interleaved\n"
        "0=a_h\n1=a_v\n2=b_h\n3=b_v\n4=a_h\n5=a_v\n6=b_h\n7=b_v\n"
        "8=a_h\n9=a_v\n10=b_h\n11=b_v\n12=a_h\n13=a_v\n14=b_h\n15=b_v\n");
    const ChannelMap m = ChannelMap::parse(swapped);
    CHECK(m.mask(Mode::ah) == 0x1111);
    CHECK(m.channels(Mode::bv) == std::array<int, 4>{3, 7, 11, 15});
    CHECK(m.reduce(0x0003) == DetectionPattern{1, 1, 0, 0});

    auto parse = [](const std::string &text) {
        std::istringstream in(text);
        return check::error_of([&] { ChannelMap::parse(in); });
    };
    std::string twice;
    for (int c = 0; c < 16; ++c) twice += std::to_string(c) + "=" + (c < 4 ? "a_h" : c < 8 ? "a_v" : c < 12 ? "b_h" : "b_v") + "\n";
    CHECK_FALSE(parse(twice).has_value());
    CHECK(parse(twice + "3=a_v\n") == Errc::parse);
    CHECK(parse("0=a_h\n") == Errc::parse);
    CHECK(parse(twice.substr(0, twice.size() - 6) + "15=c_h\n") == Errc::parse);
    CHECK(parse("16=a_h\n") == Errc::parse);
    std::string five = twice;
    five.replace(five.find("4=a_v"), 5, "4=a_h");
    CHECK(parse(five) == Errc::parse);
}

TEST_CASE("counter options") {
    CountOptions o;
    o.window_ps = 0;
    CHECK(check::error_of([&] { CoincidenceCounter(ChannelMap(), o); }) == Errc::domain);
    o.window_ps = 20000;
    CHECK(check::error_of([&] { CoincidenceCounter(ChannelMap(), o); }) == Errc::domain);
    o = {};
    o.period_ps = std::nullopt;
    o.pulses = 4;
    CHECK(check::error_of([&] { CoincidenceCounter(ChannelMap(), o); }) == Errc::domain);
    CoincidenceCounter counter(ChannelMap(), {});
    counter.add({0, 500});
    CHECK(check::error_of([&] { counter.add({0, 100}); }) == Errc::domain);
}

TEST_CASE("clockless windows open at the first click") {
    CountOptions opts;
    opts.period_ps = std::nullopt;
    opts.window_ps = 1000;
    const std::vector<TimetagRecord> recs{{0, 100}, {4, 1099}, {8, 1100}, {12, 1500}, {1, 9000}};
    const CoincidenceCounts c = count_coincidences(recs, ChannelMap(), opts);
    CHECK(c.windows == 3);
    CHECK(c.patterns[0x0011] == 1);
    CHECK(c.patterns[0x1100] == 1);
    CHECK(c.patterns[0x0002] == 1);
    CHECK(c.patterns[0] == 0);
}

TEST_CASE("generator") {
    GeneratorOptions opts;
    opts.pulses = 1000;
    CHECK(generate_synthetic_timetags(ProbabilityModel({0.0}, {4, 0.5, 0.5}), {1.0, 0.0}, opts).empty());

    opts.pulses = 20000;
    opts.seed = 9;
    const auto a = generate_synthetic_timetags(model(), {1.0, 0.0}, opts);
    const auto b = generate_synthetic_timetags(model(), {1.0, 0.0}, opts);
    CHECK(serialize(a, TimetagFormat::binary) == serialize(b, TimetagFormat::binary));
    opts.seed = 10;
    CHECK(generate_synthetic_timetags(model(), {1.0, 0.0}, opts) != a);

    CHECK(std::is_sorted(a.begin(), a.end(), [](const auto &x, const auto &y) { return x.time_ps < y.time_ps; }));
    for (const auto &r : a) {
        const std::uint64_t pulse = r.time_ps / 12500;
        CHECK(pulse < 20000);
    }
    opts.pulses = 0;
    CHECK(check::error_of([&] { generate_synthetic_timetags(model(), {1.0, 0.0}, opts); }) == Errc::domain);
    opts.pulses = 10;
    CHECK(check::error_of([&] { generate_synthetic_timetags(ProbabilityModel({0.061}, {8, 0.5, 0.5}), {1.0, 0.0}, opts); }) ==
          Errc::domain);
}

TEST_CASE("counted frequencies follow the model") {
    const ProbabilityModel &m = model();
    GeneratorOptions opts;
    opts.pulses = 200000;
    opts.seed = 4;
    const auto records = generate_synthetic_timetags(m, {1.0, 0.0}, opts);
    CountOptions count;
    count.pulses = opts.pulses;
    const CoincidenceCounts c = count_coincidences(records, ChannelMap(), count);
    CHECK(c.windows == opts.pulses);
    CHECK(c.duplicate_clicks == 0);
    CHECK(c.rejected_records == 0);
    CHECK(c.total_clicks() == records.size());

    const PatternDistribution dist = m.distribution({1.0, 0.0});
    const double n = static_cast<double>(opts.pulses);
    double pooled_p = 0.0;
    std::uint64_t pooled_k = 0;
    for (std::size_t i = 0; i < dist.patterns.size(); ++i) {
        const double p = dist.probabilities[i];
        const auto k = c.count(dist.patterns[i]);
        if (n * p < 10.0) {
            pooled_p += p;
            pooled_k += k;
            continue;
        }
        INFO(to_string(dist.patterns[i]));
        CHECK(std::abs(static_cast<double>(k) - n * p) < 4.0 * std::sqrt(n * p * (1 - p)));
    }
    CHECK(std::abs(static_cast<double>(pooled_k) - n * pooled_p) < 4.0 * std::sqrt(n * pooled_p) + 1.0);
}

TEST_CASE("reader and span counting agree") {
    GeneratorOptions opts;
    opts.pulses = 20000;
    opts.jitter_ps = 2000;
    opts.seed = 11;
    const auto records = generate_synthetic_timetags(model(), {2.0, 0.3}, opts);
    std::istringstream in(serialize(records, TimetagFormat::binary));
    TimetagReader reader(in, TimetagFormat::binary);
    const CoincidenceCounts streamed = count_coincidences(reader, ChannelMap());
    const CoincidenceCounts direct = count_coincidences(records, ChannelMap());
    CHECK(reader.records_read() == records.size());
    CHECK(streamed.patterns == direct.patterns);
    CHECK(streamed.rejected_records == direct.rejected_records);
    CHECK(direct.rejected_records > 0);
}
