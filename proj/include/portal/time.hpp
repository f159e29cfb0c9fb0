#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <mutex>
#include <string>
#include <string_view>

namespace portal {

// Microseconds since the Unix epoch, UTC.
struct Timestamp {
    std::int64_t micros = 0;

    auto operator<=>(const Timestamp&) const = default;

    Timestamp plus(std::chrono::microseconds d) const { return {micros + d.count()}; }
    double seconds_since(Timestamp earlier) const {
        return static_cast<double>(micros - earlier.micros) / 1e6;
    }
};

// "2026-10-18T09:30:00.000000Z"; always six fractional digits so the
// text form round-trips exactly.
std::string to_iso8601(Timestamp ts);
Timestamp parse_iso8601(std::string_view text);  // throws std::invalid_argument

class Clock {
public:
    virtual ~Clock() = default;
    virtual Timestamp now() = 0;
};

class SystemClock final : public Clock {
public:
    Timestamp now() override;
};

// Deterministic clock for tests and desk runs: every call to now()
// returns the current value, then advances by `step`.
class ManualClock final : public Clock {
public:
    explicit ManualClock(Timestamp start = {1'760'000'000'000'000},
                         std::chrono::microseconds step = std::chrono::milliseconds(1))
        : current_(start), step_(step) {}

    Timestamp now() override;
    void advance(std::chrono::microseconds d);
    Timestamp peek() const;

private:
    mutable std::mutex mutex_;
    Timestamp current_;
    std::chrono::microseconds step_;
};

}  // namespace portal
