#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <string>

#include <boost/uuid/random_generator.hpp>

namespace portal {

// Source of UUIDv4 identifiers for objects, sessions and memories.
class IdSource {
public:
    virtual ~IdSource() = default;
    virtual std::string next() = 0;
};

class RandomIdSource final : public IdSource {
public:
    std::string next() override;

private:
    std::mutex mutex_;
    boost::uuids::random_generator gen_;
};

// Reproducible id stream; desk runs and tests use it so that two runs
// with the same seed write byte-identical logs.
class SeededIdSource final : public IdSource {
public:
    explicit SeededIdSource(std::uint64_t seed) : engine_(seed), gen_(&engine_) {}
    std::string next() override;

private:
    std::mutex mutex_;
    std::mt19937_64 engine_;
    boost::uuids::basic_random_generator<std::mt19937_64> gen_;
};

}  // namespace portal
