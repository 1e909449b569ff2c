#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "llmpred/csv.hpp"
#include "llmpred/errors.hpp"
#include "llmpred/series.hpp"

using namespace llmpred;

namespace {

Series make_series(std::vector<double> values, int id = 0) {
    Series s;
    s.values = std::move(values);
    s.channel_id = id;
    return s;
}

// Writes content to a unique temp file and returns its path.
std::string write_temp(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path.string();
}

} // namespace

TEST_CASE("max_normalize divides by the max absolute value") {
    auto [normed, state] = max_normalize(make_series({2.0, -4.0}));
    CHECK(state.scale == 4.0);
    CHECK(normed.values[0] == 0.5);
    CHECK(normed.values[1] == -1.0);

    auto [single, single_state] = max_normalize(make_series({0.5}));
    CHECK(single_state.scale == 0.5);
    CHECK(single.values[0] == 1.0);
}

TEST_CASE("max_normalize rejects degenerate and malformed input") {
    CHECK_THROWS_AS(max_normalize(make_series({0.0, 0.0})), Error);
    try {
        max_normalize(make_series({0.0, 0.0}));
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::degenerate_series);
    }
    CHECK_THROWS_AS(max_normalize(make_series({})), Error);
    CHECK_THROWS_AS(max_normalize(make_series({1.0, std::nan("")})), Error);
}

TEST_CASE("normalize/denormalize round trip on random series") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(-100.0, 100.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> values(64);
        for (double& v : values) v = dist(rng);
        const Series s = make_series(values, 3);

        auto [normed, state] = max_normalize(s);
        double max_abs = 0.0;
        for (double v : normed.values) max_abs = std::max(max_abs, std::fabs(v));
        CHECK(max_abs == doctest::Approx(1.0).epsilon(1e-15));
        for (double v : normed.values) CHECK(std::fabs(v) <= 1.0);

        const Series back = denormalize(normed, state);
        CHECK(back.channel_id == 3);
        for (std::size_t i = 0; i < values.size(); ++i) {
            CHECK(std::fabs(back.values[i] - values[i]) < 1e-12 * state.scale);
        }
    }
}

TEST_CASE("denormalize with scale 1 is the identity") {
    const Series s = make_series({0.25, -0.75, 1.0});
    const Series out = denormalize(s, NormState{1.0});
    CHECK(out.values == s.values);
}

TEST_CASE("split_windows enumerates offsets and omits overruns") {
    ChannelSet set;
    std::vector<double> values(10);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<double>(i);
    set.channels.push_back(make_series(values, 0));

    // L=10, H=3, stride=3: offsets 0 and 3 fit; offset 6 would need 6..11.
    const auto windows = split_windows(set, 3, 3);
    REQUIRE(windows.size() == 2);
    CHECK(windows[0].offset == 0);
    CHECK(windows[1].offset == 3);
    CHECK(windows[0].history.channels[0].values == std::vector<double>{0.0, 1.0, 2.0});
    CHECK(windows[0].target.channels[0].values == std::vector<double>{3.0, 4.0, 5.0});
    CHECK(windows[1].history.channels[0].values == std::vector<double>{3.0, 4.0, 5.0});
    CHECK(windows[1].target.channels[0].values == std::vector<double>{6.0, 7.0, 8.0});
}

TEST_CASE("split_windows boundary: L = 2H gives exactly one window") {
    ChannelSet set;
    set.channels.push_back(make_series(std::vector<double>(6, 1.0)));
    for (std::size_t stride : {1u, 2u, 3u, 10u}) {
        CHECK(split_windows(set, 3, stride).size() == 1);
    }
}

TEST_CASE("split_windows rejects too-short datasets") {
    ChannelSet set;
    set.channels.push_back(make_series({1.0, 2.0, 3.0, 4.0, 5.0}));
    CHECK_THROWS_AS(split_windows(set, 3, 3), Error);
    try {
        split_windows(set, 3, 3);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::series_too_short);
    }
}

TEST_CASE("split_windows with stride H tiles targets without overlap") {
    ChannelSet set;
    std::vector<double> values(100);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<double>(i);
    set.channels.push_back(make_series(values));

    const std::size_t H = 8;
    const auto windows = split_windows(set, H, H);
    double expected = static_cast<double>(H); // first target sample
    for (const Window& w : windows) {
        CHECK(w.history.length() == H);
        CHECK(w.target.length() == H);
        for (double v : w.target.channels[0].values) {
            CHECK(v == expected);
            expected += 1.0;
        }
    }
}

TEST_CASE("load_csv_dataset reads features and skips the timestamp") {
    const std::string path = write_temp(
        "llmpred_basic.csv", "date,f0,f1\n2020-01-01,1.5,-2.0\n2020-01-02,2.5,0.25\n2020-01-03,3.5,7\n");
    const ChannelSet set = load_csv_dataset(path);
    REQUIRE(set.channel_count() == 2);
    CHECK(set.length() == 3);
    CHECK(set.channels[0].channel_id == 0);
    CHECK(set.channels[1].channel_id == 1);
    CHECK(set.channels[0].values == std::vector<double>{1.5, 2.5, 3.5});
    CHECK(set.channels[1].values == std::vector<double>{-2.0, 0.25, 7.0});
    std::remove(path.c_str());
}

TEST_CASE("load_csv_dataset reports the failing cell") {
    const std::string path =
        write_temp("llmpred_bad.csv", "date,f0\nr0,1.0\nr1,2.0\nr2,abc\n");
    try {
        load_csv_dataset(path);
        FAIL("expected ParseError");
    } catch (const CsvParseError& e) {
        CHECK(e.code() == ErrorCode::parse_error);
        CHECK(e.row() == 2);
        CHECK(e.col() == 1);
    }
    std::remove(path.c_str());
}

TEST_CASE("load_csv_dataset channel selection remaps ids") {
    const std::string path =
        write_temp("llmpred_select.csv", "date,f0,f1\nr0,1,10\nr1,2,20\n");
    const ChannelSet set = load_csv_dataset(path, std::vector<int>{1});
    REQUIRE(set.channel_count() == 1);
    CHECK(set.channels[0].channel_id == 0);
    CHECK(set.channels[0].values == std::vector<double>{10.0, 20.0});
    std::remove(path.c_str());
}

TEST_CASE("load_csv_dataset error cases") {
    CHECK_THROWS_AS(load_csv_dataset("/nonexistent/nowhere.csv"), Error);
    try {
        load_csv_dataset("/nonexistent/nowhere.csv");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::missing_file);
    }

    const std::string empty = write_temp("llmpred_empty.csv", "date,f0\n");
    try {
        load_csv_dataset(empty);
        FAIL("expected EmptyDataset");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::empty_dataset);
    }
    std::remove(empty.c_str());

    const std::string no_features = write_temp("llmpred_nofeat.csv", "date\n1\n2\n");
    CHECK_THROWS_AS(load_csv_dataset(no_features), Error);
    std::remove(no_features.c_str());
}
