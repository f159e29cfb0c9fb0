#include "portal/time.hpp"

#include <cstdio>
#include <ctime>
#include <stdexcept>

namespace portal {

namespace {

constexpr std::int64_t kMicrosPerSecond = 1'000'000;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace

std::string to_iso8601(Timestamp ts) {
    const std::int64_t secs = floor_div(ts.micros, kMicrosPerSecond);
    const std::int64_t frac = ts.micros - secs * kMicrosPerSecond;
    std::time_t t = static_cast<std::time_t>(secs);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%06lldZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                  static_cast<long long>(frac));
    return buf;
}

Timestamp parse_iso8601(std::string_view text) {
    std::tm tm{};
    int year = 0, mon = 0, day = 0, hour = 0, min = 0, sec = 0;
    char frac[16] = {0};
    const std::string s(text);
    if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%6[0-9]Z", &year, &mon, &day, &hour, &min,
                    &sec, frac) != 7 ||
        s.size() != 27) {
        throw std::invalid_argument("bad timestamp: " + s);
    }
    tm.tm_year = year - 1900;
    tm.tm_mon = mon - 1;
    tm.tm_mday = day;
    tm.tm_hour = hour;
    tm.tm_min = min;
    tm.tm_sec = sec;
    const std::time_t secs = timegm(&tm);
    return {static_cast<std::int64_t>(secs) * kMicrosPerSecond + std::stoll(frac)};
}

Timestamp SystemClock::now() {
    const auto d = std::chrono::system_clock::now().time_since_epoch();
    return {std::chrono::duration_cast<std::chrono::microseconds>(d).count()};
}

Timestamp ManualClock::now() {
    std::lock_guard lock(mutex_);
    const Timestamp out = current_;
    current_ = current_.plus(step_);
    return out;
}

void ManualClock::advance(std::chrono::microseconds d) {
    std::lock_guard lock(mutex_);
    current_ = current_.plus(d);
}

Timestamp ManualClock::peek() const {
    std::lock_guard lock(mutex_);
    return current_;
}

}  // namespace portal
