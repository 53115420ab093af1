#include <doctest.h>

#include <random>
#include <vector>

#include "ruperlb/protocol.hpp"

using namespace ruperlb;

namespace {

std::vector<std::byte> bytes(std::initializer_list<int> values) {
    std::vector<std::byte> out;
    for (int v : values) {
        out.push_back(static_cast<std::byte>(v));
    }
    return out;
}

} // namespace

TEST_SUITE("protocol") {

TEST_CASE("request golden bytes") {
    const Message m{Instruction::Report, 3, 1.5, 1000};
    const auto expected = bytes({0x16, 0, 0, 0,                               // length 22
                                 0x01, 0x01,                                  // version, report
                                 0x03, 0, 0, 0,                               // origin
                                 0, 0, 0, 0, 0, 0, 0xF8, 0x3F,                // 1.5
                                 0xE8, 0x03, 0, 0, 0, 0, 0, 0});              // 1000
    CHECK(wire::encode(m) == expected);
    CHECK(std::get<Message>(wire::decode(expected)) == m);
}

TEST_CASE("response and report request golden bytes") {
    const auto resp = bytes({0x0B, 0, 0, 0, 0x01, 0x81, 0xF4, 0x01, 0, 0, 0, 0, 0, 0, 0x01});
    CHECK(wire::encode(Response{500, true}) == resp);
    CHECK(std::get<Response>(wire::decode(resp)) == Response{500, true});

    const auto req = bytes({0x02, 0, 0, 0, 0x01, 0x82});
    CHECK(wire::encode(ReportRequest{}) == req);
    CHECK(std::holds_alternative<ReportRequest>(wire::decode(req)));
}

TEST_CASE("every instruction round-trips") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 500; ++i) {
        Message m;
        m.instruction = static_cast<Instruction>(i % 3);
        m.origin = static_cast<Rank>(rng());
        m.timestamp = std::uniform_real_distribution<double>(-1e9, 1e9)(rng);
        m.predicted_done = static_cast<Iterations>(rng() >> 1);
        const Frame f = m;
        CHECK(std::get<Message>(wire::decode(wire::encode(f))) == m);

        const Response r{static_cast<Iterations>(rng() >> 1), (rng() & 1) != 0};
        CHECK(std::get<Response>(wire::decode(wire::encode(Frame{r}))) == r);
    }
}

TEST_CASE("negative counts cannot be encoded") {
    CHECK_THROWS_AS(wire::encode(Message{Instruction::Report, 0, 0.0, -1}), InvalidArgument);
    CHECK_THROWS_AS(wire::encode(Response{-1, false}), InvalidArgument);
}

TEST_CASE("malformed frames are rejected") {
    const auto good = wire::encode(Message{Instruction::Start, 1, 2.0, 0});

    SUBCASE("version mismatch") {
        auto f = good;
        f[4] = std::byte{2};
        CHECK_THROWS_WITH_AS(wire::decode(f), "protocol version mismatch: expected 1, got 2",
                             ProtocolError);
    }
    SUBCASE("unknown kind") {
        auto f = good;
        f[5] = std::byte{7};
        CHECK_THROWS_AS(wire::decode(f), ProtocolError);
    }
    SUBCASE("truncated") {
        auto f = good;
        f.pop_back();
        CHECK_THROWS_AS(wire::decode(f), ProtocolError);
        CHECK_THROWS_AS(wire::decode(bytes({0x16, 0})), ProtocolError);
    }
    SUBCASE("trailing bytes") {
        auto f = good;
        f.push_back(std::byte{0});
        CHECK_THROWS_AS(wire::decode(f), ProtocolError);
    }
    SUBCASE("impossible length prefix") {
        const auto f = bytes({0xFF, 0xFF, 0xFF, 0x7F});
        CHECK_THROWS_AS(wire::decode_length(std::span<const std::byte, 4>(f.data(), 4)),
                        ProtocolError);
    }
    SUBCASE("response body under a request length") {
        auto f = wire::encode(Response{1, false});
        f[0] = std::byte{0x16};
        CHECK_THROWS_AS(wire::decode(f), ProtocolError);
    }
    SUBCASE("invalid finished flag") {
        auto f = wire::encode(Response{1, false});
        f.back() = std::byte{2};
        CHECK_THROWS_AS(wire::decode(f), ProtocolError);
    }
    SUBCASE("iteration count above the signed range") {
        auto f = good;
        f.back() = std::byte{0x80};
        CHECK_THROWS_AS(wire::decode(f), ProtocolError);
    }
}

}
