#include "portal/gateway.hpp"

#include <sys/socket.h>

#include <algorithm>
#include <charconv>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace portal {

using nlohmann::json;

std::string_view to_string(Channel c) { return c == Channel::Operator ? "operator" : "participant"; }

std::optional<Channel> channel_from_string(std::string_view s) {
    if (s == "participant") return Channel::Participant;
    if (s == "operator") return Channel::Operator;
    return std::nullopt;
}

json ApiEvent::to_json() const {
    return {{"seq", seq}, {"kind", portal::to_string(kind)}, {"ts", to_iso8601(ts)}, {"payload", payload}};
}

std::string ApiEvent::to_sse() const {
    // json::dump escapes newlines, so the data field is always one line.
    return "id: " + std::to_string(seq) + "\nevent: " + std::string(portal::to_string(kind)) +
           "\ndata: " + to_json().dump() + "\n\n";
}

// ---- subscriptions ----

std::vector<ApiEvent> Subscription::wait(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, timeout, [&] { return closed_ || !buffer_.empty(); });
    std::vector<ApiEvent> out(std::make_move_iterator(buffer_.begin()), std::make_move_iterator(buffer_.end()));
    buffer_.clear();
    return out;
}

bool Subscription::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

bool Subscription::overflowed() const {
    std::lock_guard lock(mutex_);
    return overflowed_;
}

bool Subscription::offer(const ApiEvent& ev) {
    {
        std::lock_guard lock(mutex_);
        if (closed_) return false;
        if (buffer_.size() >= capacity_) {
            overflowed_ = true;
            closed_ = true;
        } else {
            buffer_.push_back(ev);
        }
    }
    cv_.notify_all();
    return !overflowed();
}

void Subscription::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    cv_.notify_all();
}

// ---- hub ----

EventHub::EventHub(std::size_t history, std::size_t client_buffer)
    : history_cap_(std::max<std::size_t>(history, 1)), client_buffer_(std::max<std::size_t>(client_buffer, 1)) {}

void EventHub::deliver(Lane& l, const EngineEvent& ev) {
    ApiEvent api{++l.seq, ev.kind, ev.payload, ev.ts};
    l.history.push_back(api);
    if (l.history.size() > history_cap_) l.history.pop_front();
    std::erase_if(l.subs, [&](const std::shared_ptr<Subscription>& s) {
        if (s->offer(api)) return false;
        if (s->overflowed()) spdlog::warn("gateway: dropping slow {} client", to_string(s->channel()));
        return true;
    });
}

void EventHub::publish(const EngineEvent& ev) {
    std::lock_guard lock(mutex_);
    if (!ev.operator_only) deliver(participant_, ev);
    deliver(operator_, ev);
}

std::shared_ptr<Subscription> EventHub::subscribe(Channel channel, std::optional<std::uint64_t> after) {
    std::lock_guard lock(mutex_);
    Lane& l = lane(channel);
    // The replay must fit in the buffer; grow it for this client if needed.
    auto sub = std::make_shared<Subscription>(channel, client_buffer_ + (after ? l.history.size() : 0));
    if (closed_) {
        sub->close();
        return sub;
    }
    if (after)
        for (const auto& ev : l.history)
            if (ev.seq > *after) sub->offer(ev);
    l.subs.push_back(sub);
    return sub;
}

void EventHub::unsubscribe(const std::shared_ptr<Subscription>& sub) {
    std::lock_guard lock(mutex_);
    for (Lane* l : {&participant_, &operator_}) std::erase(l->subs, sub);
    sub->close();
}

std::size_t EventHub::subscriber_count() const {
    std::lock_guard lock(mutex_);
    return participant_.subs.size() + operator_.subs.size();
}

std::uint64_t EventHub::last_seq(Channel channel) const {
    std::lock_guard lock(mutex_);
    return lane(channel).seq;
}

std::vector<ApiEvent> EventHub::history(Channel channel) const {
    std::lock_guard lock(mutex_);
    const Lane& l = lane(channel);
    return {l.history.begin(), l.history.end()};
}

void EventHub::close_all() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    for (Lane* l : {&participant_, &operator_}) {
        for (auto& s : l->subs) s->close();
        l->subs.clear();
    }
}

// ---- views ----

json entry_view(const TranscriptEntry& e, std::size_t index) {
    return {{"index", index},
            {"speaker", to_string(e.speaker)},
            {"kind", to_string(e.kind)},
            {"text", e.text},
            {"ts", to_iso8601(e.ts)}};
}

json profile_view(const ObjectProfile& p) {
    return {{"object_id", p.object_id},
            {"description", p.description},
            {"persona",
             {{"name", p.persona.name},
              {"traits", p.persona.traits},
              {"speaking_style", p.persona.speaking_style},
              {"backstory", p.persona.backstory},
              {"voice_id", p.persona.voice_id},
              {"mood_seed", p.persona.mood_seed}}},
            {"created_at", to_iso8601(p.created_at)},
            {"last_seen_at", to_iso8601(p.last_seen_at)},
            {"image_refs", p.image_refs}};
}

json memory_view(const MemoryRecord& r, std::optional<double> score) {
    json j = {{"memory_id", r.memory_id},
              {"session_id", r.session_id},
              {"speaker", to_string(r.speaker)},
              {"text", r.text},
              {"created_at", to_iso8601(r.created_at)}};
    if (score) j["score"] = *score;
    return j;
}

json light_view(const LightPattern& p) {
    return {{"mode", to_string(p.mode)}, {"b_min", p.b_min}, {"b_max", p.b_max}, {"period_s", p.period_s}};
}

json state_view(const EngineSnapshot& s, Channel channel, std::uint64_t last_seq) {
    json j = {{"phase", to_string(s.phase)},
              {"light", light_view(s.light)},
              {"channel", to_string(channel)},
              {"last_seq", last_seq},
              {"last_session_id", s.last_session_id ? json(*s.last_session_id) : json(nullptr)},
              {"session", nullptr}};
    if (!s.session) return j;
    const SessionView& v = *s.session;
    json transcript = json::array();
    for (std::size_t i = 0; i < v.transcript.size(); ++i) transcript.push_back(entry_view(v.transcript[i], i));
    json session = {{"session_id", v.session_id},
                    {"started_at", to_iso8601(v.started_at)},
                    {"was_new", v.was_new},
                    {"object", v.object ? profile_view(*v.object) : json(nullptr)},
                    {"transcript", transcript}};
    if (channel == Channel::Operator) {
        json inner = json::array();
        for (std::size_t i = 0; i < v.inner_thoughts.size(); ++i) {
            const auto& t = v.inner_thoughts[i];
            inner.push_back({{"turn", i},
                             {"ts", to_iso8601(t.ts)},
                             {"inner_thoughts", t.inner_thoughts},
                             {"engagement_intent", t.engagement_intent},
                             {"speak", t.speak}});
        }
        session["inner_thoughts"] = inner;
    }
    j["session"] = session;
    return j;
}

json result_view(const CommandResult& r) {
    json appended = json::array();
    for (const auto& e : r.appended)
        appended.push_back({{"speaker", to_string(e.speaker)},
                            {"kind", to_string(e.kind)},
                            {"text", e.text},
                            {"ts", to_iso8601(e.ts)}});
    return {{"phase", to_string(r.phase)},
            {"session_id", r.session_id ? json(*r.session_id) : json(nullptr)},
            {"object_id", r.object_id ? json(*r.object_id) : json(nullptr)},
            {"was_new", r.was_new},
            {"reply", r.reply ? json(*r.reply) : json(nullptr)},
            {"silent", r.silent},
            {"appended", appended}};
}

// ---- HTTP ----

namespace {

constexpr std::size_t kMaxBody = 1 << 20;
constexpr std::size_t kMaxMemoryLimit = 200;

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

std::string request_token(const httplib::Request& req) {
    const std::string header = req.get_header_value("Authorization");
    if (header.starts_with("Bearer ")) return header.substr(7);
    return req.get_param_value("token");
}

std::optional<std::uint64_t> parse_u64(const std::string& s) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

void send_result(httplib::Response& res, const CommandResult& r) {
    using Code = CommandResult::Code;
    switch (r.code) {
        case Code::Ok:
            send_json(res, 200, result_view(r));
            return;
        case Code::NoSession:
            send_error(res, 409, "no_active_session", r.error);
            return;
        case Code::SessionActive:
            send_error(res, 409, "session_active", r.error);
            return;
        case Code::BadRequest:
            send_error(res, 400, "bad_request", r.error);
            return;
        case Code::Failed: {
            json body = result_view(r);
            body["error"] = {{"code", "failed"}, {"message", r.error}};
            send_json(res, 502, body);
            return;
        }
    }
}

// Parses a JSON object body; an empty body reads as {}.
std::optional<json> body_object(const httplib::Request& req, httplib::Response& res) {
    if (req.body.empty()) return json::object();
    json j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        send_error(res, 400, "malformed_json", "request body must be a JSON object");
        return std::nullopt;
    }
    return j;
}

}  // namespace

Gateway::Gateway(PortalApp& app, std::shared_ptr<EventHub> hub)
    : app_(app), hub_(hub ? std::move(hub) : std::make_shared<EventHub>()) {
    std::weak_ptr<EventHub> weak = hub_;
    listener_id_ = app_.engine().add_listener([weak](const EngineEvent& ev) {
        if (auto h = weak.lock()) h->publish(ev);
    });

    // Light samples arrive at the sampler rate; forward a decimated stream.
    const auto interval = std::chrono::microseconds(static_cast<std::int64_t>(1e6 / app_.config().light_event_hz));
    auto last = std::make_shared<std::optional<Timestamp>>();
    LightController* light = &app_.light();
    app_.light().add_sink(std::make_shared<CallbackLightSink>([weak, interval, last, light](Timestamp ts, double b) {
        if (*last && ts < last->value().plus(interval)) return;
        *last = ts;
        if (auto h = weak.lock())
            h->publish(EngineEvent{ApiEventKind::LightSample,
                                   {{"brightness", b}, {"mode", to_string(light->pattern().mode)}},
                                   ts,
                                   false});
    }));
}

Gateway::~Gateway() {
    stop();
    app_.engine().remove_listener(listener_id_);
}

void Gateway::start(const std::string& host, int port) {
    if (server_) throw GatewayError("gateway already started");
    server_ = std::make_unique<httplib::Server>();
    // Exclusive bind: a second daemon on the same port must fail loudly.
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    server_->new_task_queue = [] { return new httplib::ThreadPool(64); };
    server_->set_payload_max_length(kMaxBody);
    routes();

    if (port == 0)
        port_ = server_->bind_to_any_port(host);
    else
        port_ = server_->bind_to_port(host, port) ? port : -1;
    if (port_ <= 0) {
        server_.reset();
        throw GatewayError("cannot listen on " + host + ":" + std::to_string(port) + " (port busy?)");
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    spdlog::info("gateway listening on {}:{}", host, port_);
}

void Gateway::stop() {
    if (!server_) return;
    hub_->close_all();
    server_->stop();
    if (thread_.joinable()) thread_.join();
    server_.reset();
}

void Gateway::routes() {
    httplib::Server& s = *server_;
    const DaemonConfig& cfg = app_.config();

    // Operator tokens also open the participant channel.
    auto authorized = [&cfg](const httplib::Request& req, Channel needed) {
        const std::string token = request_token(req);
        if (needed == Channel::Operator) return cfg.operator_token.empty() || token == cfg.operator_token;
        if (cfg.participant_token.empty()) return true;
        return token == cfg.participant_token || (!cfg.operator_token.empty() && token == cfg.operator_token);
    };
    // Resolves ?channel= and checks the token for it; writes the error on failure.
    auto gate = [authorized](const httplib::Request& req, httplib::Response& res) -> std::optional<Channel> {
        const std::string name = req.has_param("channel") ? req.get_param_value("channel") : "participant";
        const auto channel = channel_from_string(name);
        if (!channel) {
            send_error(res, 400, "bad_channel", "channel must be participant or operator");
            return std::nullopt;
        }
        if (!authorized(req, *channel)) {
            send_error(res, 401, "unauthorized", "missing or wrong token for the " + name + " channel");
            return std::nullopt;
        }
        return channel;
    };
    auto require = [authorized](const httplib::Request& req, httplib::Response& res, Channel needed) {
        if (authorized(req, needed)) return true;
        send_error(res, 401, "unauthorized", std::string("requires the ") + std::string(to_string(needed)) + " token");
        return false;
    };

    s.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    s.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Authorization, Content-Type, Last-Event-ID");
        res.status = 204;
    });
    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        } catch (...) {
            send_error(res, 500, "internal", "unknown error");
        }
    });
    s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return;
        if (res.status == 404) send_error(res, 404, "not_found", "no such endpoint");
        else if (res.status == 413) send_error(res, 413, "too_large", "request body too large");
        else if (res.status == 405) send_error(res, 405, "method_not_allowed", "method not allowed");
    });

    s.Get("/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"ok", true}}); });

    s.Get("/state", [this, gate](const httplib::Request& req, httplib::Response& res) {
        const auto channel = gate(req, res);
        if (!channel) return;
        // Read the sequence first: replaying events after it can only
        // repeat what the snapshot shows, never miss anything.
        const std::uint64_t seq = hub_->last_seq(*channel);
        send_json(res, 200, state_view(app_.engine().snapshot(), *channel, seq));
    });

    s.Get("/objects", [this, require](const httplib::Request& req, httplib::Response& res) {
        if (!require(req, res, Channel::Participant)) return;
        json objects = json::array();
        for (const auto& p : app_.registry().all()) objects.push_back(profile_view(p));
        send_json(res, 200, {{"objects", objects}});
    });

    s.Get("/objects/:id", [this, require](const httplib::Request& req, httplib::Response& res) {
        if (!require(req, res, Channel::Participant)) return;
        const auto p = app_.registry().find(req.path_params.at("id"));
        if (!p) return send_error(res, 404, "unknown_object", "no object with that id");
        send_json(res, 200, profile_view(*p));
    });

    s.Get("/objects/:id/memories", [this, require](const httplib::Request& req, httplib::Response& res) {
        if (!require(req, res, Channel::Operator)) return;
        const std::string id = req.path_params.at("id");
        if (!app_.registry().contains(id)) return send_error(res, 404, "unknown_object", "no object with that id");
        const std::string mode = req.has_param("mode") ? req.get_param_value("mode") : "history";
        std::size_t limit = 20;
        if (req.has_param("limit")) {
            const auto v = parse_u64(req.get_param_value("limit"));
            if (!v || *v == 0 || *v > kMaxMemoryLimit)
                return send_error(res, 400, "bad_limit", "limit must be 1.." + std::to_string(kMaxMemoryLimit));
            limit = *v;
        }
        json results = json::array();
        if (mode == "history") {
            for (const auto& r : app_.memory().retrieve_history(id, limit)) results.push_back(memory_view(r));
        } else if (mode == "search") {
            const std::string q = req.get_param_value("q");
            if (q.empty()) return send_error(res, 400, "missing_query", "search mode requires q");
            try {
                for (const auto& m : app_.memory().retrieve_relevant(id, q, limit, *app_.providers().embedding))
                    results.push_back(memory_view(m.record, m.score));
            } catch (const ProviderError& e) {
                return send_error(res, 502, "provider_error", e.what());
            }
        } else {
            return send_error(res, 400, "bad_mode", "mode must be history or search");
        }
        send_json(res, 200, {{"object_id", id}, {"mode", mode}, {"results", results}});
    });

    s.Post("/session/awaken", [this, require](const httplib::Request& req, httplib::Response& res) {
        if (!require(req, res, Channel::Participant)) return;
        const auto body = body_object(req, res);
        if (!body) return;
        std::optional<VisionRequest> image;
        if (body->contains("image_ref") && !(*body)["image_ref"].is_null()) {
            if (!(*body)["image_ref"].is_string())
                return send_error(res, 400, "bad_request", "image_ref must be a string");
            try {
                image = app_.resolve_image_ref((*body)["image_ref"].get<std::string>());
            } catch (const std::exception& e) {
                return send_error(res, 400, "bad_image_ref", e.what());
            }
        }
        send_result(res, app_.engine().awaken(std::move(image)));
    });

    s.Post("/session/utterance", [this, require](const httplib::Request& req, httplib::Response& res) {
        if (!require(req, res, Channel::Participant)) return;
        const auto body = body_object(req, res);
        if (!body) return;
        if (!body->contains("text") || !(*body)["text"].is_string())
            return send_error(res, 400, "bad_request", "text must be a string");
        send_result(res, app_.engine().utterance((*body)["text"].get<std::string>()));
    });

    s.Post("/session/goodbye", [this, require](const httplib::Request& req, httplib::Response& res) {
        if (!require(req, res, Channel::Participant)) return;
        send_result(res, app_.engine().goodbye());
    });

    s.Get("/events", [this, gate](const httplib::Request& req, httplib::Response& res) {
        const auto channel = gate(req, res);
        if (!channel) return;
        std::optional<std::uint64_t> after;
        const std::string resume =
            req.has_header("Last-Event-ID") ? req.get_header_value("Last-Event-ID") : req.get_param_value("since");
        if (!resume.empty()) {
            after = parse_u64(resume);
            if (!after) return send_error(res, 400, "bad_resume", "Last-Event-ID / since must be an integer");
        }
        auto sub = hub_->subscribe(*channel, after);
        auto hub = hub_;
        res.set_header("Cache-Control", "no-cache");
        res.set_header("X-Accel-Buffering", "no");
        auto idle = std::make_shared<int>(0);
        res.set_chunked_content_provider(
            "text/event-stream",
            [sub, idle](std::size_t, httplib::DataSink& sink) {
                const auto batch = sub->wait(std::chrono::milliseconds(500));
                if (batch.empty()) {
                    if (sub->closed()) {
                        sink.done();
                        return true;
                    }
                    if (++*idle >= 30) {  // keep-alive comment every ~15 s
                        *idle = 0;
                        static constexpr std::string_view ping = ": ping\n\n";
                        return sink.write(ping.data(), ping.size());
                    }
                    return true;
                }
                *idle = 0;
                std::string out;
                for (const auto& ev : batch) out += ev.to_sse();
                return sink.write(out.data(), out.size());
            },
            [hub, sub](bool) { hub->unsubscribe(sub); });
    });
}

}  // namespace portal
