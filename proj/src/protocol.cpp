#include "ruperlb/protocol.hpp"

#include <bit>
#include <string>

namespace ruperlb {

const char* to_string(Instruction instruction) {
    switch (instruction) {
    case Instruction::Start: return "start";
    case Instruction::Report: return "report";
    case Instruction::FinishRequest: return "finish_request";
    }
    return "unknown";
}

namespace wire {
namespace {

class Writer {
public:
    explicit Writer(std::uint32_t body) { put_u32(body); }

    void put_u8(std::uint8_t v) { out_.push_back(static_cast<std::byte>(v)); }

    void put_u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            put_u8(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    void put_u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            put_u8(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }

    std::vector<std::byte> take() { return std::move(out_); }

private:
    std::vector<std::byte> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::byte> in) : in_(in) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(in_[pos_++]);
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
        }
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
        }
        return v;
    }

    double f64() { return std::bit_cast<double>(u64()); }

    void expect_end() const {
        if (pos_ != in_.size()) {
            throw ProtocolError("trailing bytes in frame");
        }
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > in_.size()) {
            throw ProtocolError("truncated frame");
        }
    }

    std::span<const std::byte> in_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<std::byte> encode(const Message& message) {
    if (message.predicted_done < 0) {
        throw InvalidArgument("predicted iterations must be non-negative");
    }
    Writer w(kRequestBody);
    w.put_u8(kVersion);
    w.put_u8(static_cast<std::uint8_t>(message.instruction));
    w.put_u32(message.origin);
    w.put_f64(message.timestamp);
    w.put_u64(static_cast<std::uint64_t>(message.predicted_done));
    return w.take();
}

std::vector<std::byte> encode(const Response& response) {
    if (response.new_assignment < 0) {
        throw InvalidArgument("assignment must be non-negative");
    }
    Writer w(kResponseBody);
    w.put_u8(kVersion);
    w.put_u8(kResponseKind);
    w.put_u64(static_cast<std::uint64_t>(response.new_assignment));
    w.put_u8(response.coord_finished ? 1 : 0);
    return w.take();
}

std::vector<std::byte> encode(const ReportRequest&) {
    Writer w(kReportRequestBody);
    w.put_u8(kVersion);
    w.put_u8(kReportRequestKind);
    return w.take();
}

std::vector<std::byte> encode(const Frame& frame) {
    return std::visit([](const auto& f) { return encode(f); }, frame);
}

std::uint32_t decode_length(std::span<const std::byte, kLengthPrefix> prefix) {
    Reader r(prefix);
    const std::uint32_t length = r.u32();
    if (length != kRequestBody && length != kResponseBody && length != kReportRequestBody) {
        throw ProtocolError("invalid frame length " + std::to_string(length));
    }
    return length;
}

Frame decode_body(std::span<const std::byte> body) {
    Reader r(body);
    const std::uint8_t version = r.u8();
    if (version != kVersion) {
        throw ProtocolError("protocol version mismatch: expected " + std::to_string(kVersion) +
                            ", got " + std::to_string(version));
    }
    const std::uint8_t kind = r.u8();
    if (kind <= static_cast<std::uint8_t>(Instruction::FinishRequest)) {
        Message m;
        m.instruction = static_cast<Instruction>(kind);
        m.origin = r.u32();
        m.timestamp = r.f64();
        const std::uint64_t iterations = r.u64();
        if (iterations > static_cast<std::uint64_t>(INT64_MAX)) {
            throw ProtocolError("iteration count out of range");
        }
        m.predicted_done = static_cast<Iterations>(iterations);
        r.expect_end();
        return m;
    }
    if (kind == kResponseKind) {
        Response resp;
        const std::uint64_t assignment = r.u64();
        if (assignment > static_cast<std::uint64_t>(INT64_MAX)) {
            throw ProtocolError("assignment out of range");
        }
        resp.new_assignment = static_cast<Iterations>(assignment);
        const std::uint8_t finished = r.u8();
        if (finished > 1) {
            throw ProtocolError("invalid finished flag");
        }
        resp.coord_finished = finished == 1;
        r.expect_end();
        return resp;
    }
    if (kind == kReportRequestKind) {
        r.expect_end();
        return ReportRequest{};
    }
    throw ProtocolError("unknown frame kind " + std::to_string(kind));
}

Frame decode(std::span<const std::byte> frame) {
    if (frame.size() < kLengthPrefix) {
        throw ProtocolError("truncated frame");
    }
    const auto length = decode_length(frame.first<kLengthPrefix>());
    const auto body = frame.subspan(kLengthPrefix);
    if (body.size() != length) {
        throw ProtocolError("frame length does not match its prefix");
    }
    return decode_body(body);
}

} // namespace wire
} // namespace ruperlb
