#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "llmpred/codec.hpp"
#include "llmpred/errors.hpp"

using namespace llmpred;

namespace {

Series make_series(std::vector<double> values, int id = 0) {
    Series s;
    s.values = std::move(values);
    s.channel_id = id;
    return s;
}

} // namespace

TEST_CASE("make_offset places channel i in band [i, i+1]") {
    for (int i = 0; i < 8; ++i) {
        const ChannelOffset off = make_offset(i);
        CHECK(off.channel_index == i);
        CHECK(off.c == i + 0.5);
        CHECK(off.decimals == 2);
    }
    CHECK(make_offset(0, 1).decimals == 1);
    CHECK_THROWS_AS(make_offset(0, 3), Error);
    CHECK_THROWS_AS(make_offset(-1, 2), Error);
}

TEST_CASE("encode_value maps the endpoints and rounds half-away-from-zero") {
    CHECK(encode_value(-1.0, make_offset(0)) == "0.00");
    CHECK(encode_value(1.0, make_offset(1)) == "2.00");
    // 0.5*0.134 + 2.5 = 2.567 -> 2.57
    CHECK(encode_value(0.134, make_offset(2)) == "2.57");
    CHECK(encode_value(0.0, make_offset(0)) == "0.50");
    // Half-way case: 0.5*0.01 + 0.5 = 0.505 rounds away from zero to 0.51.
    CHECK(encode_value(0.01, make_offset(0)) == "0.51");
    CHECK(encode_value(0.5, make_offset(0)) == "0.75");
}

TEST_CASE("encode_value rejects values outside the normalized range") {
    CHECK_THROWS_AS(encode_value(1.1, make_offset(0)), Error);
    CHECK_THROWS_AS(encode_value(-1.1, make_offset(0)), Error);
    try {
        encode_value(1.1, make_offset(0));
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::out_of_range);
    }
    // The 1e-9 slack admits accumulated rounding from upstream arithmetic.
    CHECK_NOTHROW(encode_value(1.0 + 1e-10, make_offset(0)));
}

TEST_CASE("decode_value inverts the linear map") {
    CHECK(decode_value("0.00", make_offset(0)) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(decode_value("2.57", make_offset(2)) == doctest::Approx(0.14).epsilon(1e-12));
    CHECK(decode_value("1.00", make_offset(0)) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("decode_value flags values from the wrong band") {
    CHECK_THROWS_AS(decode_value("7.90", make_offset(0)), Error);
    try {
        decode_value("7.90", make_offset(0));
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::band_violation);
    }
    // Within half a band outside [c-0.5, c+0.5] is tolerated, clamped.
    const double v = decode_value("1.20", make_offset(0));
    CHECK(v <= 1.0 + 0.01 + 1e-12);
    CHECK_THROWS_AS(decode_value("abc", make_offset(0)), Error);
    try {
        decode_value("abc", make_offset(0));
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::not_a_number);
    }
}

TEST_CASE("round trip error is bounded by the quantization step") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int decimals : {1, 2}) {
        const double bound = std::pow(10.0, -decimals) / 0.5;
        for (int trial = 0; trial < 2000; ++trial) {
            const double x = dist(rng);
            const int channel = trial % 7;
            const ChannelOffset off = make_offset(channel, decimals);
            const std::string text = encode_value(x, off);
            // Band containment of the rendered value.
            const double rendered = std::stod(text);
            CHECK(rendered >= channel);
            CHECK(rendered <= channel + 1);
            CHECK(std::fabs(decode_value(text, off) - x) <= bound + 1e-12);
        }
    }
}

TEST_CASE("build_prompt lays out rows of comma-separated channels") {
    ChannelSet history;
    history.channels.push_back(make_series({-0.32, -0.38}, 0));
    history.channels.push_back(make_series({0.08, 0.0}, 1));
    history.channels.push_back(make_series({0.34, 0.20}, 2));
    const auto offsets = make_offsets(3);

    const PromptBundle prompt = build_prompt(history, offsets, PromptLayout::multivariate);
    CHECK(prompt.body == "0.34, 1.54, 2.67\n0.31, 1.50, 2.60\n");
    CHECK(prompt.expected_rows == 2);
    CHECK(prompt.expected_cols == 3);
    CHECK(prompt.layout == PromptLayout::multivariate);
    CHECK(prompt.instruction ==
          "Consider the distribution. Predict the next few lines. INTEGER component of the "
          "value SHOULD be SAME as the train data. ONLY provide numerical values.");
    CHECK(prompt.full_text() == prompt.instruction + "\n" + prompt.body);
}

TEST_CASE("univariate layout emits one value per line") {
    ChannelSet history;
    history.channels.push_back(make_series({-1.0, 0.0, 1.0}, 0));
    const PromptBundle prompt =
        build_prompt(history, make_offsets(1), PromptLayout::univariate);
    CHECK(prompt.body == "0.00\n0.50\n1.00\n");
    CHECK(prompt.expected_cols == 1);
    CHECK(prompt.body.find(',') == std::string::npos);
}

TEST_CASE("build_prompt validates offsets and layout") {
    ChannelSet history;
    history.channels.push_back(make_series({0.0}, 0));
    history.channels.push_back(make_series({0.0}, 1));
    CHECK_THROWS_AS(build_prompt(history, make_offsets(3), PromptLayout::multivariate), Error);
    try {
        build_prompt(history, make_offsets(3), PromptLayout::multivariate);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::offset_mismatch);
    }
    // Univariate layout only fits a single channel.
    CHECK_THROWS_AS(build_prompt(history, make_offsets(2), PromptLayout::univariate), Error);
}

TEST_CASE("parse_output accepts well-formed rows") {
    const auto offsets = make_offsets(3);
    const ParseReport rep =
        parse_output("0.34, 1.54, 2.67\n0.31, 1.50, 2.60\n", 3, offsets, 10);
    CHECK(rep.valid_rows == 2);
    CHECK(rep.dropped_rows == 0);
    REQUIRE(rep.values.size() == 2);
    CHECK(rep.values[0][0] == doctest::Approx(-0.32).epsilon(1e-12));
    CHECK(rep.values[0][1] == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(rep.values[0][2] == doctest::Approx(0.34).epsilon(1e-12));
}

TEST_CASE("parse_output drops rows with trailing-dot partial values") {
    const ParseReport rep = parse_output("0.34, 1.54, 2.\n", 3, make_offsets(3), 10);
    CHECK(rep.valid_rows == 0);
    CHECK(rep.dropped_rows == 1);
    REQUIRE(rep.dropped_reasons.size() == 1);
    CHECK(rep.dropped_reasons[0].first == 0);
    CHECK(rep.dropped_reasons[0].second == DropReason::incomplete_value);
}

TEST_CASE("parse_output drops non-numeric rows but keeps the rest") {
    const ParseReport rep =
        parse_output("noise noise\n0.40, 1.60, 2.50\n", 3, make_offsets(3), 10);
    CHECK(rep.valid_rows == 1);
    CHECK(rep.dropped_rows == 1);
    CHECK(rep.dropped_reasons[0].second == DropReason::non_numeric);
}

TEST_CASE("parse_output classifies arity and band errors") {
    const ParseReport arity = parse_output("0.40, 1.60\n", 3, make_offsets(3), 10);
    CHECK(arity.dropped_reasons[0].second == DropReason::wrong_arity);

    const ParseReport band = parse_output("5.40, 1.60, 2.50\n", 3, make_offsets(3), 10);
    CHECK(band.dropped_reasons[0].second == DropReason::out_of_band);

    const ParseReport missing = parse_output("0.40, , 2.50\n", 3, make_offsets(3), 10);
    CHECK(missing.dropped_reasons[0].second == DropReason::incomplete_value);
}

TEST_CASE("parse_output skips blank lines and stops at max_rows") {
    const ParseReport rep =
        parse_output("0.40\n\n0.41\n\n0.42\n0.43\n", 1, make_offsets(1), 3);
    CHECK(rep.valid_rows == 3);
    CHECK(rep.dropped_rows == 0);
    REQUIRE(rep.values.size() == 3);
    CHECK(rep.values[2][0] == doctest::Approx(-0.16).epsilon(1e-12));

    CHECK(parse_output("", 3, make_offsets(3), 10).valid_rows == 0);
    CHECK(parse_output("", 3, make_offsets(3), 10).dropped_rows == 0);
}

TEST_CASE("parse_output survives fuzzing and keeps the accounting identity") {
    std::mt19937_64 rng(43);
    std::uniform_int_distribution<int> len_dist(0, 120);
    // Mix of digits, separators, and arbitrary bytes so some rows parse.
    const std::string alphabet = "0123456789.,- \nabcXYZ%\t+e";
    std::uniform_int_distribution<std::size_t> char_dist(0, alphabet.size() - 1);
    const auto offsets = make_offsets(3);

    for (int trial = 0; trial < 2000; ++trial) {
        std::string text;
        const int len = len_dist(rng);
        for (int i = 0; i < len; ++i) text += alphabet[char_dist(rng)];

        const ParseReport rep = parse_output(text, 3, offsets, 1000000);

        std::size_t non_empty = 0;
        std::string line;
        for (std::size_t i = 0; i <= text.size(); ++i) {
            if (i == text.size() || text[i] == '\n') {
                bool blank = true;
                for (char ch : line) {
                    if (ch != ' ' && ch != '\t' && ch != '\r') blank = false;
                }
                if (!blank) ++non_empty;
                line.clear();
            } else {
                line += text[i];
            }
        }
        CHECK(rep.valid_rows + rep.dropped_rows == non_empty);
        CHECK(rep.valid_rows == rep.values.size());
        for (const auto& row : rep.values) {
            REQUIRE(row.size() == 3);
            for (double v : row) CHECK(std::isfinite(v));
        }
    }
}

TEST_CASE("prompt body parses back to the history up to quantization") {
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t C = 1 + trial % 4;
        const std::size_t H = 16;
        ChannelSet history;
        for (std::size_t ch = 0; ch < C; ++ch) {
            std::vector<double> values(H);
            for (double& v : values) v = dist(rng);
            history.channels.push_back(make_series(std::move(values), static_cast<int>(ch)));
        }
        const auto offsets = make_offsets(C);
        const PromptBundle prompt = build_prompt(
            history, offsets, C == 1 ? PromptLayout::univariate : PromptLayout::multivariate);
        const ParseReport rep = parse_output(prompt.body, C, offsets, H);
        REQUIRE(rep.valid_rows == H);
        CHECK(rep.dropped_rows == 0);
        for (std::size_t t = 0; t < H; ++t) {
            for (std::size_t ch = 0; ch < C; ++ch) {
                CHECK(std::fabs(rep.values[t][ch] - history.channels[ch].values[t]) <= 0.02);
            }
        }
    }
}
