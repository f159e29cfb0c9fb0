#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "portal/app.hpp"
#include "portal/engine.hpp"

namespace httplib {
class Server;
}

namespace portal {

enum class Channel { Participant, Operator };
std::string_view to_string(Channel c);
std::optional<Channel> channel_from_string(std::string_view s);

struct ApiEvent {
    std::uint64_t seq = 0;
    ApiEventKind kind = ApiEventKind::PhaseChanged;
    nlohmann::json payload;
    Timestamp ts;

    nlohmann::json to_json() const;
    std::string to_sse() const;  // "id: ...\nevent: ...\ndata: ...\n\n"
};

// One connected client's view of a channel. The buffer is bounded; a
// client that falls behind is closed rather than allowed to stall the
// publisher.
class Subscription {
public:
    Subscription(Channel channel, std::size_t capacity) : channel_(channel), capacity_(capacity) {}

    // Blocks up to `timeout` for the next batch; empty on timeout or close.
    std::vector<ApiEvent> wait(std::chrono::milliseconds timeout);
    bool closed() const;
    bool overflowed() const;
    Channel channel() const { return channel_; }

private:
    friend class EventHub;
    bool offer(const ApiEvent& ev);  // false when the buffer overflowed
    void close();

    Channel channel_;
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<ApiEvent> buffer_;
    bool closed_ = false;
    bool overflowed_ = false;
};

// Fans engine events out to subscribers. Each channel numbers its own
// events from 1 with no gaps and keeps a bounded history so clients can
// resume after a reconnect.
class EventHub {
public:
    explicit EventHub(std::size_t history = 4096, std::size_t client_buffer = 1024);

    void publish(const EngineEvent& ev);

    // Replays retained events with seq > `after` before live ones.
    std::shared_ptr<Subscription> subscribe(Channel channel, std::optional<std::uint64_t> after = std::nullopt);
    void unsubscribe(const std::shared_ptr<Subscription>& sub);
    std::size_t subscriber_count() const;

    std::uint64_t last_seq(Channel channel) const;
    std::vector<ApiEvent> history(Channel channel) const;
    void close_all();

private:
    struct Lane {
        std::uint64_t seq = 0;
        std::deque<ApiEvent> history;
        std::vector<std::shared_ptr<Subscription>> subs;
    };
    Lane& lane(Channel c) { return c == Channel::Operator ? operator_ : participant_; }
    const Lane& lane(Channel c) const { return c == Channel::Operator ? operator_ : participant_; }
    void deliver(Lane& lane, EngineEvent const& ev);

    std::size_t history_cap_;
    std::size_t client_buffer_;
    mutable std::mutex mutex_;
    Lane participant_;
    Lane operator_;
    bool closed_ = false;
};

// JSON views shared by the HTTP layer and tests.
nlohmann::json entry_view(const TranscriptEntry& e, std::size_t index);
nlohmann::json profile_view(const ObjectProfile& p);
nlohmann::json memory_view(const MemoryRecord& r, std::optional<double> score = std::nullopt);
nlohmann::json light_view(const LightPattern& p);
nlohmann::json state_view(const EngineSnapshot& s, Channel channel, std::uint64_t last_seq);
nlohmann::json result_view(const CommandResult& r);

class GatewayError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// HTTP + server-sent-events face of a running portal.
class Gateway {
public:
    explicit Gateway(PortalApp& app, std::shared_ptr<EventHub> hub = nullptr);
    ~Gateway();
    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    // Binds and starts serving on a background thread. Port 0 picks a
    // free port. Throws GatewayError when the port cannot be bound.
    void start(const std::string& host, int port);
    void stop();
    int port() const { return port_; }
    EventHub& hub() { return *hub_; }

private:
    void routes();

    PortalApp& app_;
    std::shared_ptr<EventHub> hub_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int listener_id_ = 0;
    int port_ = 0;
};

}  // namespace portal
