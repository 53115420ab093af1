#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "ruperlb/types.hpp"

namespace ruperlb {

enum class Instruction : std::uint8_t {
    Start = 0,
    Report = 1,
    FinishRequest = 2,
};

const char* to_string(Instruction instruction);

/// Petition from a process to the coordinator.
struct Message {
    Instruction instruction = Instruction::Start;
    Rank origin = 0;
    Seconds timestamp = 0.0;       ///< sender's clock
    Iterations predicted_done = 0; ///< meaningful for Report and FinishRequest

    friend bool operator==(const Message&, const Message&) = default;
};

/// Coordinator reply: the process budget and whether balancing is over.
struct Response {
    Iterations new_assignment = 0;
    bool coord_finished = false;

    friend bool operator==(const Response&, const Response&) = default;
};

/// Coordinator asks a process for a report. Carries no payload.
struct ReportRequest {
    friend bool operator==(const ReportRequest&, const ReportRequest&) = default;
};

using Frame = std::variant<Message, Response, ReportRequest>;

namespace wire {

// Little-endian framing: u32 length of what follows, then u8 version and u8
// kind. Requests carry u32 origin | f64 timestamp | u64 iterations; responses
// carry u64 assignment | u8 finished; report requests carry nothing.
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::uint8_t kResponseKind = 129;
inline constexpr std::uint8_t kReportRequestKind = 130;
inline constexpr std::size_t kLengthPrefix = 4;
inline constexpr std::uint32_t kRequestBody = 1 + 1 + 4 + 8 + 8;
inline constexpr std::uint32_t kResponseBody = 1 + 1 + 8 + 1;
inline constexpr std::uint32_t kReportRequestBody = 1 + 1;
inline constexpr std::uint32_t kMaxBody = kRequestBody;

std::vector<std::byte> encode(const Message& message);
std::vector<std::byte> encode(const Response& response);
std::vector<std::byte> encode(const ReportRequest& request);
std::vector<std::byte> encode(const Frame& frame);

/// Length announced by a 4-byte prefix. Throws ProtocolError when it is not a
/// size any frame can have.
std::uint32_t decode_length(std::span<const std::byte, kLengthPrefix> prefix);

/// Decodes a frame body (everything after the length prefix).
Frame decode_body(std::span<const std::byte> body);

/// Decodes a complete frame including its length prefix.
Frame decode(std::span<const std::byte> frame);

} // namespace wire
} // namespace ruperlb
