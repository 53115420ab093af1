#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ruperlb {

/// Time in seconds. Every clock in the library is monotonic and measured in
/// seconds from an arbitrary epoch.
using Seconds = double;

/// Count of application iterations (histories, samples, ...).
using Iterations = std::int64_t;

/// Process index in the coordinator protocol. Rank 0 is the coordinator.
using Rank = std::uint32_t;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A timestamp earlier than state already registered was supplied.
class ClockRegression : public Error {
public:
    using Error::Error;
};

/// A base worker reported fewer completed iterations than already registered.
class ProgressRegression : public Error {
public:
    using Error::Error;
};

/// Invalid argument or parameter set.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed frame, unexpected message or broken peer.
class ProtocolError : public Error {
public:
    using Error::Error;
};

} // namespace ruperlb
