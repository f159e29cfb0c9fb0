// Acceptance suite: one PASS/FAIL line per criterion, checked against
// independent oracles at the stated tolerances and time limits.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "portal/gateway.hpp"
#include "portal/repl.hpp"
#include "support.hpp"

using namespace portal;
using namespace portal::test;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

class Failure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename... Args>
void expect(bool ok, const char* fmt, Args... args) {
    if (ok) return;
    if constexpr (sizeof...(Args) == 0) {
        throw Failure(fmt);
    } else {
        char buf[512];
        std::snprintf(buf, sizeof buf, fmt, args...);
        throw Failure(buf);
    }
}

// ---- independent oracles ----

long double oracle_cosine(const std::vector<float>& a, const std::vector<float>& b) {
    long double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<long double>(a[i]) * b[i];
        na += static_cast<long double>(a[i]) * a[i];
        nb += static_cast<long double>(b[i]) * b[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<float> random_vector(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<float> g;
    std::vector<float> v(dim);
    for (auto& x : v) x = g(rng);
    return v;
}

std::vector<float> unit(std::vector<float> v) {
    long double n = 0;
    for (float x : v) n += static_cast<long double>(x) * x;
    const long double s = std::sqrt(n);
    for (auto& x : v) x = static_cast<float>(x / s);
    return v;
}

// Expected ritual transitions, written out pair by pair.
RitualPhase oracle_transition(RitualPhase p, RitualEventKind k) {
    using P = RitualPhase;
    using K = RitualEventKind;
    if (k == K::Error) return P::Idle;
    if (p == P::Idle && k == K::KeywordAwaken) return P::Request;
    if (p == P::Request && k == K::IdentityResolved) return P::Conversation;
    if (p == P::Conversation && k == K::KeywordGoodbye) return P::Transformation;
    if (p == P::Transformation && k == K::SummaryStored) return P::Idle;
    return p;
}

RitualEvent event_of(RitualEventKind k) {
    if (k == RitualEventKind::Utterance) return RitualEvent::utterance("hello");
    if (k == RitualEventKind::Error) return RitualEvent::error("boom");
    return RitualEvent::of(k);
}

// ---- criteria ----

void state_machine() {
    std::size_t pairs = 0;
    for (RitualPhase p : kAllPhases)
        for (RitualEventKind k : kAllEventKinds) {
            ++pairs;
            const RitualPhase got = transition(p, event_of(k));
            expect(got == oracle_transition(p, k), "(%s, %s) -> %s", std::string(to_string(p)).c_str(),
                   std::string(to_string(k)).c_str(), std::string(to_string(got)).c_str());
        }
    expect(pairs == 28, "enumerated %zu pairs, expected 28", pairs);

    // Reachability over the implemented table.
    std::set<std::pair<RitualPhase, RitualPhase>> edges;
    for (RitualPhase p : kAllPhases)
        for (RitualEventKind k : kAllEventKinds) {
            const RitualPhase q = transition(p, event_of(k));
            if (q != p) edges.insert({p, q});
        }
    for (const auto& [from, to] : edges)
        expect(to != RitualPhase::Conversation || from == RitualPhase::Request,
               "Conversation entered from %s", std::string(to_string(from)).c_str());
    for (RitualPhase start : kAllPhases) {
        std::set<RitualPhase> seen{start};
        std::vector<RitualPhase> todo{start};
        while (!todo.empty()) {
            const RitualPhase p = todo.back();
            todo.pop_back();
            for (const auto& [from, to] : edges)
                if (from == p && seen.insert(to).second) todo.push_back(to);
        }
        expect(seen.contains(RitualPhase::Idle), "%s cannot return to Idle", std::string(to_string(start)).c_str());
    }
    // From Idle, only Request is one step away.
    for (const auto& [from, to] : edges)
        if (from == RitualPhase::Idle) expect(to == RitualPhase::Request, "Idle leads directly to a non-Request phase");
}

std::vector<std::string> determinism_script() {
    return {persona_sheet("Quill"), turn_text("a visitor, how nice", 0.72, true, "Hello, traveller."),
            turn_text("I am well but wary", 0.55, true, "Quite well, thank you."), "We greeted each other."};
}

void end_to_end_determinism() {
    std::string first;
    for (int run = 0; run < 5; ++run) {
        TempDir dir;
        mock::MockSet mocks;
        for (const auto& s : determinism_script()) mocks.chat->push(s);
        auto app = make_app(dir.path(), mocks);
        std::istringstream in("awaken fox.png\nsay hello\nsay how are you\ngoodbye\n");
        std::ostringstream out;
        run_repl(*app, in, out);
        const auto sessions = app->store().list_sessions();
        expect(sessions.size() == 1, "run %d wrote %zu session logs", run, sessions.size());
        const std::string log = read_text(app->store().layout().sessions_dir / (sessions[0] + ".json"));
        const SessionLog parsed = app->store().read_session_log(sessions[0]);
        expect(parsed.transcript.size() == 5, "run %d transcript has %zu entries", run, parsed.transcript.size());
        expect(parsed.summary_ref.has_value(), "run %d has no summary", run);
        if (run == 0)
            first = log;
        else
            expect(log == first, "run %d session log differs from run 0", run);
    }
}

void re_recognition() {
    TempDir dir;
    Store store(StoreLayout::under(dir.path()));
    Registry registry(store);
    ManualClock clock;
    SeededIdSource ids(11);
    const PromptTemplates templates = PromptTemplates::defaults();
    mock::MockSet mocks;
    ProviderSet providers = mocks.providers();
    providers.chat = std::make_shared<mock::SyntheticChat>(std::vector<std::string>{"warm", "bright"});
    IdentityContext ctx{providers, registry, store, clock, ids, templates, {"warm", "bright"}, 0.85};

    std::vector<VisionRequest> originals;
    std::vector<std::string> first_ids;
    for (int i = 0; i < 20; ++i) {
        originals.push_back(image_of("original-object-" + std::to_string(i)));
        const Resolution r = resolve_identity(originals.back(), ctx);
        expect(r.was_new, "original %d matched an earlier object", i);
        first_ids.push_back(r.profile.object_id);
    }
    expect(std::set<std::string>(first_ids.begin(), first_ids.end()).size() == 20, "originals share ids");

    int false_new = 0;
    for (int i = 0; i < 20; ++i) {
        const Resolution r = resolve_identity(originals[i], ctx);
        if (r.was_new || r.profile.object_id != first_ids[i]) ++false_new;
    }
    expect(false_new == 0, "%d false-new on re-presentation", false_new);

    // Fresh images, screened by the oracle to sit below 0.5 against every stored profile.
    std::vector<std::vector<float>> stored;
    for (const auto& p : registry.all()) stored.push_back(p.embedding.values);
    int false_match = 0, fresh = 0;
    std::set<std::string> new_ids;
    for (int seed = 0; fresh < 20; ++seed) {
        expect(seed < 1000, "could not find 20 dissimilar fresh images");
        const VisionRequest img = image_of("fresh-object-" + std::to_string(seed));
        const Embedding e = mocks.embedding->embed_image(img);
        long double worst = -1;
        for (const auto& s : stored) worst = std::max(worst, oracle_cosine(e.values, s));
        if (worst >= 0.5L) continue;
        ++fresh;
        const Resolution r = resolve_identity(img, ctx);
        if (!r.was_new) ++false_match;
        new_ids.insert(r.profile.object_id);
        stored.push_back(r.profile.embedding.values);
    }
    expect(false_match == 0, "%d false-match on fresh images", false_match);
    expect(new_ids.size() == 20, "fresh images produced %zu distinct ids", new_ids.size());
    expect(registry.size() == 40, "registry holds %zu profiles", registry.size());
}

void match_oracle() {
    std::mt19937_64 rng(2024);
    SeededIdSource ids(5);
    std::uniform_real_distribution<double> u;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = rng() % 101;
        const std::size_t dim = trial % 10 == 0 ? 512 : 2 + rng() % 63;
        std::vector<ObjectProfile> reg;
        for (std::size_t i = 0; i < n; ++i) {
            ObjectProfile p;
            p.object_id = "obj-" + std::to_string(i);
            // Some exact duplicates exercise the created_at tie-break.
            if (i > 0 && rng() % 8 == 0)
                p.embedding = reg[rng() % i].embedding;
            else
                p.embedding = Embedding{unit(random_vector(rng, dim))};
            p.created_at = Timestamp{static_cast<std::int64_t>(rng() % 10'000)};
            reg.push_back(std::move(p));
        }
        std::vector<float> q = random_vector(rng, dim);
        if (n > 0 && trial % 3 != 0) {
            const auto& near = reg[rng() % n].embedding.values;
            const float noise = static_cast<float>(u(rng) * 0.6);
            for (std::size_t i = 0; i < dim; ++i) q[i] = near[i] + noise * q[i] / std::sqrt(float(dim));
        }
        const double tau = 0.05 + 0.95 * u(rng);
        const MatchResult got = match_object(Embedding{q}, reg, tau, ids);

        if (n == 0) {
            expect(!got.matched() && !got.similarity, "trial %d: empty registry matched", trial);
            continue;
        }
        long double best = -2;
        const ObjectProfile* winner = nullptr;
        for (const auto& p : reg) {
            const long double s = oracle_cosine(q, p.embedding.values);
            if (s > best + 1e-15L || (std::abs(s - best) <= 1e-15L && p.created_at < winner->created_at)) {
                best = s;
                winner = &p;
            }
        }
        expect(got.similarity.has_value(), "trial %d: no similarity reported", trial);
        expect(std::abs(*got.similarity - static_cast<double>(best)) < 1e-9, "trial %d: similarity %.12f vs %.12Lf",
               trial, *got.similarity, best);
        const bool should_match = best >= tau;
        expect(got.matched() == should_match, "trial %d: outcome disagrees (sim %.12Lf, tau %.6f)", trial, best, tau);
        if (should_match)
            expect(got.object_id == winner->object_id, "trial %d: matched %s, oracle %s", trial, got.object_id.c_str(),
                   winner->object_id.c_str());
        else
            expect(!got.object_id.empty(), "trial %d: new object without an id", trial);
    }
}

void memory_oracles() {
    std::mt19937_64 rng(77);
    const std::vector<std::string> words{"river", "tea", "rain", "lamp", "stone", "fox", "window", "song"};
    for (int trial = 0; trial < 200; ++trial) {
        TempDir dir;
        Store store(StoreLayout::under(dir.path()));
        ManualClock clock;
        SeededIdSource ids(static_cast<std::uint64_t>(trial) + 1);
        MemoryStore memory(store, clock, ids, [](const std::string& id) { return id == "obj"; });
        mock::MockEmbedding embedder(64);

        std::vector<MemoryRecord> expected;  // insertion order
        const std::size_t n = rng() % 51;
        for (std::size_t i = 0; i < n; ++i) {
            const std::string text = words[rng() % words.size()] + " " + words[rng() % words.size()];
            const std::string session = "s" + std::to_string(rng() % 3);
            expected.push_back(memory.store_memory("obj", session, rng() % 2 ? Speaker::Human : Speaker::Object, text,
                                                   embedder));
        }

        // History: suffix of insertion order, ascending time, for every limit.
        for (std::size_t k = 1; k <= n + 1; ++k) {
            const auto h = memory.retrieve_history("obj", k);
            const std::size_t want = std::min(k, n);
            expect(h.size() == want, "trial %d: history(%zu) has %zu records", trial, k, h.size());
            for (std::size_t i = 0; i < want; ++i)
                expect(h[i].memory_id == expected[n - want + i].memory_id, "trial %d: history(%zu)[%zu] wrong", trial,
                       k, i);
            for (std::size_t i = 1; i < h.size(); ++i)
                expect(h[i - 1].created_at < h[i].created_at, "trial %d: history not ascending", trial);
        }
        // Excluding a session keeps the suffix property on the remaining records.
        std::vector<MemoryRecord> others;
        for (const auto& r : expected)
            if (r.session_id != "s0") others.push_back(r);
        const auto hx = memory.retrieve_history("obj", 10, "s0");
        const std::size_t want_x = std::min<std::size_t>(10, others.size());
        expect(hx.size() == want_x, "trial %d: excluded history size", trial);
        for (std::size_t i = 0; i < want_x; ++i)
            expect(hx[i].memory_id == others[others.size() - want_x + i].memory_id, "trial %d: excluded history",
                   trial);

        // Search: brute-force cosine ranking, newer first on ties.
        const std::string query = words[rng() % words.size()] + " " + words[rng() % words.size()];
        const std::size_t limit = 1 + rng() % 60;
        const auto hits = memory.retrieve_relevant("obj", query, limit, embedder);
        const Embedding qe = embedder.embed_text(query);
        std::vector<std::pair<long double, const MemoryRecord*>> ranked;
        for (const auto& r : expected) ranked.emplace_back(oracle_cosine(qe.values, r.embedding.values), &r);
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (std::abs(a.first - b.first) > 1e-12L) return a.first > b.first;
            return a.second->created_at > b.second->created_at;
        });
        expect(hits.size() == std::min(limit, n), "trial %d: search returned %zu", trial, hits.size());
        for (std::size_t i = 0; i < hits.size(); ++i) {
            expect(hits[i].record.memory_id == ranked[i].second->memory_id, "trial %d: rank %zu differs", trial, i);
            expect(std::abs(hits[i].score - static_cast<double>(ranked[i].first)) < 1e-9,
                   "trial %d: score %zu off", trial, i);
        }
    }
}

// Builds the wire text of a turn from raw section values.
std::string emit(const std::string& inner, const std::string& intent, const std::string& speak,
                 const std::string& response) {
    return "INNER: " + inner + "\nINTENT: " + intent + "\nSPEAK: " + speak + "\nRESPONSE: " + response;
}

std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
    static const std::vector<std::string> pieces{"the",   "river", "INNER", "speak", "yes",  "no",   "0.5",
                                                 "a:b",   "tea,",  "quiet", "é",     "水",   "SPEAK", "?",
                                                 "RESPONSE", "--", "\"x\"", "…"};
    std::string s;
    const std::size_t n = 1 + rng() % max_len;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s += rng() % 6 == 0 ? "\n" : " ";
        s += pieces[rng() % pieces.size()];
    }
    // A line that starts with a section marker cannot be carried by the
    // grammar; keep generated text clear of that case.
    std::string out;
    std::istringstream lines(s);
    for (std::string line; std::getline(lines, line);) {
        for (std::string_view m : {kInnerMarker, kIntentMarker, kSpeakMarker, kResponseMarker})
            if (line.starts_with(m)) line = "~" + line;
        if (!out.empty()) out += "\n";
        out += line;
    }
    return out;
}

void two_tier_round_trip() {
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> u;
    std::vector<TwoTierTurn> valid;
    for (int i = 0; i < 500; ++i) {
        TwoTierTurn t;
        t.inner_thoughts = random_text(rng, 24);
        const int edge = i % 50;
        t.engagement_intent = edge == 0 ? 0.0 : edge == 1 ? 1.0 : u(rng);
        t.speak = rng() % 2;
        t.public_response = t.speak ? random_text(rng, 30) : "";
        const std::string once = format_two_tier(t);
        TwoTierTurn back;
        try {
            back = parse_two_tier(once);
        } catch (const std::exception& e) {
            throw Failure("valid turn " + std::to_string(i) + " rejected: " + e.what());
        }
        expect(back == t, "turn %d did not survive format/parse", i);
        expect(format_two_tier(back) == once, "turn %d is not a fixed point", i);
        valid.push_back(t);
    }

    // 50 malformed strings, each derived from a valid turn by one mutation.
    std::vector<std::string> bad;
    for (int i = 0; i < 50; ++i) {
        const TwoTierTurn& t = valid[i * 7 % valid.size()];
        char intent[32];
        std::snprintf(intent, sizeof intent, "%.6f", t.engagement_intent);
        const std::string speak = t.speak ? "yes" : "no";
        const std::string good = emit(t.inner_thoughts, intent, speak, t.public_response);
        switch (i % 10) {
            case 0: bad.push_back(good.substr(0, good.find("\nRESPONSE:"))); break;  // missing section
            case 1: bad.push_back(good.substr(good.find("INTENT:"))); break;          // missing INNER
            case 2: bad.push_back("INNER: again\n" + good); break;                    // repeated section
            case 3: bad.push_back(emit(t.inner_thoughts, i % 20 < 10 ? "1.5" : "-0.25", speak, t.public_response)); break;
            case 4: bad.push_back(emit(t.inner_thoughts, i % 20 < 10 ? "high" : "0.5x", speak, t.public_response)); break;
            case 5: bad.push_back(emit(t.inner_thoughts, intent, i % 20 < 10 ? "maybe" : "", t.public_response)); break;
            case 6: bad.push_back(emit(t.inner_thoughts, intent, "no", "I talk anyway")); break;
            case 7: bad.push_back(emit(t.inner_thoughts, intent, "yes", "   ")); break;
            case 8: bad.push_back(emit("  ", intent, speak, t.public_response)); break;
            case 9: bad.push_back(i % 20 < 10 ? std::string() : random_text(rng, 10)); break;
        }
    }
    expect(bad.size() == 50, "generated %zu malformed strings", bad.size());
    for (std::size_t i = 0; i < bad.size(); ++i) {
        bool rejected = false;
        try {
            parse_two_tier(bad[i]);
        } catch (const ProviderError& e) {
            rejected = e.kind() == ProviderErrorKind::MalformedResponse;
        }
        expect(rejected, "malformed string %zu accepted: %s", i, bad[i].substr(0, 80).c_str());
    }
}

void covertness_audit() {
    quiet_logs();
    TempDir dir;
    mock::MockSet mocks;
    auto app = make_app(dir.path(), mocks);
    Gateway gateway(*app);
    gateway.start("127.0.0.1", 0);

    // Participant event stream over HTTP, read until the session closes.
    std::string stream;
    std::mutex stream_mutex;
    std::atomic<bool> closed{false};
    std::thread reader([&] {
        httplib::Client cli("127.0.0.1", gateway.port());
        cli.set_read_timeout(10, 0);
        cli.Get("/events?channel=participant", [&](const char* data, std::size_t n) {
            std::lock_guard lock(stream_mutex);
            stream.append(data, n);
            if (stream.find("event: SessionClosed") != std::string::npos) closed = true;
            return !closed.load();
        });
    });
    for (int i = 0; i < 400 && gateway.hub().subscriber_count() == 0; ++i) std::this_thread::sleep_for(5ms);
    expect(gateway.hub().subscriber_count() == 1, "participant stream did not connect");

    std::vector<std::string> secrets;
    std::mt19937_64 rng(9);
    mocks.chat->push(persona_sheet("Quill"));
    for (int i = 0; i < 10; ++i) {
        char tag[32];
        std::snprintf(tag, sizeof tag, "%016llx", static_cast<unsigned long long>(rng()));
        secrets.push_back(std::string("covert-") + tag + " I privately think the visitor is " +
                          (i % 2 ? "tiresome" : "delightful"));
        const bool speak = i % 3 != 2;
        mocks.chat->push(turn_text(secrets.back(), speak ? 0.8 : 0.1, speak, speak ? "Reply number " + std::to_string(i) : ""));
    }
    mocks.chat->push("A pleasant chat about nothing.");

    httplib::Client cli("127.0.0.1", gateway.port());
    auto post = [&](const std::string& path, const json& body) {
        auto r = cli.Post(path, body.dump(), "application/json");
        expect(r && r->status == 200, "%s failed", path.c_str());
    };
    post("/session/awaken", {{"image_ref", "fox.png"}});
    for (int i = 0; i < 10; ++i) post("/session/utterance", {{"text", "turn " + std::to_string(i)}});
    const auto mid = cli.Get("/state");
    post("/session/goodbye", json::object());
    for (int i = 0; i < 400 && !closed; ++i) std::this_thread::sleep_for(5ms);
    gateway.stop();
    reader.join();
    expect(closed.load(), "participant stream never saw SessionClosed");

    const auto speech = mocks.speech->requests();
    expect(speech.size() >= 7, "only %zu speech requests", speech.size());
    std::size_t leaks = 0;
    for (const auto& s : secrets) {
        for (const auto& req : speech) leaks += req.text.find(s) != std::string::npos;
        leaks += stream.find(s) != std::string::npos;
        if (mid) leaks += mid->body.find(s) != std::string::npos;
        // Any 12-byte window of the thought is enough to count as a leak.
        for (std::size_t at = 0; at + 12 <= s.size(); at += 6) {
            const std::string window = s.substr(at, 12);
            for (const auto& req : speech) leaks += req.text.find(window) != std::string::npos;
            leaks += stream.find(window) != std::string::npos;
        }
    }
    expect(stream.find("InnerThoughts") == std::string::npos, "InnerThoughts event on the participant channel");
    expect(leaks == 0, "%zu inner-thought leaks", leaks);
    // The operator channel did receive them, so the scan is not vacuous.
    std::size_t operator_inner = 0;
    for (const auto& e : gateway.hub().history(Channel::Operator))
        operator_inner += e.kind == ApiEventKind::InnerThoughts;
    expect(operator_inner == 10, "operator channel carried %zu inner thoughts", operator_inner);
}

void breathing_waveform() {
    const LightPattern p = LightPattern::breathing(0.15, 0.9, 4.0);
    const double T = p.period_s;
    auto oracle = [&](double t) {
        return p.b_min + (p.b_max - p.b_min) * (1.0L - std::cos(2.0L * std::numbers::pi_v<long double> * t / T)) / 2.0L;
    };
    const int samples = static_cast<int>(3 * T * 1000);
    for (int i = 0; i <= samples; ++i) {
        const double t = i / 1000.0;
        const double b = brightness_at(p, t);
        expect(b >= p.b_min - 1e-9 && b <= p.b_max + 1e-9, "b(%.3f) = %.12f out of bounds", t, b);
        expect(std::abs(b - static_cast<double>(oracle(t))) < 1e-9, "b(%.3f) = %.12f differs from the waveform", t, b);
    }
    // Period from successive upward midpoint crossings, located by bisection.
    const double mid = (p.b_min + p.b_max) / 2.0;
    std::vector<double> crossings;
    for (int i = 0; i < samples; ++i) {
        double lo = i / 1000.0, hi = (i + 1) / 1000.0;
        if (!(brightness_at(p, lo) < mid && brightness_at(p, hi) >= mid)) continue;
        for (int it = 0; it < 200 && hi - lo > 0; ++it) {
            const double m = lo + (hi - lo) / 2;
            if (m == lo || m == hi) break;
            (brightness_at(p, m) < mid ? lo : hi) = m;
        }
        crossings.push_back(hi);
    }
    expect(crossings.size() == 3, "found %zu upward crossings in 3 periods", crossings.size());
    for (std::size_t i = 1; i < crossings.size(); ++i) {
        const double err = std::abs((crossings[i] - crossings[i - 1]) - T);
        expect(err < 1e-9, "period error %.3e", err);
    }
    for (int i = 0; i <= samples; ++i) {
        const double t = i / 1000.0;
        expect(std::abs(brightness_at(p, t + T) - brightness_at(p, t)) < 1e-9, "b(t+T) != b(t) at t=%.3f", t);
    }
    const double quarter = brightness_at(p, T / 4);
    expect(std::abs(quarter - mid) < 1e-9, "b(T/4) = %.12f, midpoint %.12f", quarter, mid);
}

ObjectProfile crash_profile(const std::string& id, const std::string& description, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ObjectProfile p;
    p.object_id = id;
    p.description = description;
    p.persona = Persona{"Murmur", {"patient", "curious", "wry"}, "slow", "It held tea.", "warm", "content"};
    p.embedding = normalized(random_vector(rng, 512));
    p.created_at = Timestamp{1'760'000'000'000'000};
    p.last_seen_at = p.created_at;
    return p;
}

void crash_safety() {
    const ObjectProfile a = crash_profile("a", "a chipped blue mug", 1);
    const ObjectProfile b = crash_profile("b", "a brass key", 2);
    ObjectProfile a2 = a;
    a2.description = "a mended blue mug";
    a2.last_seen_at = Timestamp{1'760'000'000'500'000};
    const ObjectProfile c = crash_profile("c", "a paper crane", 3);

    struct Case {
        const char* name;
        ObjectProfile write;
        std::vector<ObjectProfile> before;
        std::vector<ObjectProfile> after;
    };
    const std::vector<Case> cases{{"update", a2, {a, b}, {a2, b}}, {"insert", c, {a, b}, {a, b, c}},
                                  {"first", a, {}, {a}}};
    auto by_id = [](std::vector<ObjectProfile> v) {
        std::sort(v.begin(), v.end(), [](auto& x, auto& y) { return x.object_id < y.object_id; });
        return v;
    };
    std::size_t total_points = 0;
    for (const auto& cs : cases) {
        std::vector<std::string> points;
        {
            TempDir dir;
            Store store(StoreLayout::under(dir.path()));
            for (const auto& p : cs.before) store.save_profile(p);
            store.set_fault_hook([&](std::string_view p) { points.emplace_back(p); });
            store.save_profile(cs.write);
        }
        expect(!points.empty(), "%s: no write points observed", cs.name);
        total_points += points.size();
        for (const auto& point : points) {
            TempDir dir;
            {
                Store store(StoreLayout::under(dir.path()));
                for (const auto& p : cs.before) store.save_profile(p);
                store.set_fault_hook([&](std::string_view p) {
                    if (p == point) throw InjectedFault(std::string(p));
                });
                bool interrupted = false;
                try {
                    store.save_profile(cs.write);
                } catch (const InjectedFault&) {
                    interrupted = true;
                }
                expect(interrupted, "%s: fault at %s did not fire", cs.name, point.c_str());
            }
            Store reopened(StoreLayout::under(dir.path()));
            const auto loaded = reopened.load_registry();
            expect(loaded.warnings.empty(), "%s: corrupt registry after fault at %s", cs.name, point.c_str());
            const auto got = by_id(loaded.items);
            expect(got == by_id(cs.before) || got == by_id(cs.after), "%s: registry is neither old nor new after %s",
                   cs.name, point.c_str());
            reopened.save_profile(cs.write);
            expect(by_id(reopened.load_registry().items) == by_id(cs.after), "%s: store unusable after %s", cs.name,
                   point.c_str());
        }
    }
    expect(total_points >= 6, "only %zu write points exercised", total_points);
}

struct Criterion {
    const char* name;
    std::chrono::milliseconds limit;
    std::function<void()> run;
};

}  // namespace

int main() {
    quiet_logs();
    const std::vector<Criterion> criteria{
        {"state-machine exhaustiveness", 1000ms, state_machine},
        {"ritual end-to-end determinism", 5000ms, end_to_end_determinism},
        {"re-recognition", 5000ms, re_recognition},
        {"match oracle equivalence", 10000ms, match_oracle},
        {"memory oracles", 10000ms, memory_oracles},
        {"two-tier round-trip", 2000ms, two_tier_round_trip},
        {"covertness audit", 5000ms, covertness_audit},
        {"breathing waveform", 1000ms, breathing_waveform},
        {"crash safety", 10000ms, crash_safety},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        std::string detail;
        const auto start = std::chrono::steady_clock::now();
        try {
            c.run();
        } catch (const std::exception& e) {
            detail = e.what();
        }
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        if (detail.empty() && ms > static_cast<double>(c.limit.count()))
            detail = "too slow: " + std::to_string(static_cast<long long>(ms)) + " ms";
        const bool ok = detail.empty();
        failed += !ok;
        std::printf("%s  %-32s %9.1f ms  (limit %lld ms)%s%s\n", ok ? "PASS" : "FAIL", c.name, ms,
                    static_cast<long long>(c.limit.count()), ok ? "" : "  ", detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
