#include <doctest.h>

#include <cmath>
#include <numbers>
#include <queue>
#include <set>
#include <stdexcept>

#include "portal/ritual.hpp"

using namespace portal;
using P = RitualPhase;
using K = RitualEventKind;

namespace {

RitualEvent ev(K k) { return k == K::Utterance ? RitualEvent::utterance("hi") : RitualEvent::of(k); }

}  // namespace

TEST_CASE("transition table rows") {
    CHECK(transition(P::Idle, ev(K::KeywordAwaken)) == P::Request);
    CHECK(transition(P::Idle, ev(K::KeywordGoodbye)) == P::Idle);
    CHECK(transition(P::Request, ev(K::IdentityResolved)) == P::Conversation);
    CHECK(transition(P::Conversation, ev(K::KeywordGoodbye)) == P::Transformation);
    CHECK(transition(P::Transformation, ev(K::SummaryStored)) == P::Idle);
    for (P p : kAllPhases) CHECK(transition(p, RitualEvent::error("boom")) == P::Idle);
}

TEST_CASE("every other pair leaves the phase unchanged") {
    const std::set<std::pair<P, K>> moving{{P::Idle, K::KeywordAwaken},
                                           {P::Request, K::IdentityResolved},
                                           {P::Conversation, K::KeywordGoodbye},
                                           {P::Transformation, K::SummaryStored}};
    for (P p : kAllPhases)
        for (K k : kAllEventKinds) {
            if (k == K::Error || moving.contains({p, k})) continue;
            CHECK(transition(p, ev(k)) == p);
        }
}

TEST_CASE("conversation is reachable only through request, and every phase returns to idle") {
    // Breadth-first search over the table, recording predecessors.
    std::set<std::pair<P, P>> edges;
    std::set<P> seen{P::Idle};
    std::queue<P> todo;
    todo.push(P::Idle);
    while (!todo.empty()) {
        const P p = todo.front();
        todo.pop();
        for (K k : kAllEventKinds) {
            const P q = transition(p, ev(k));
            if (q != p) edges.insert({p, q});
            if (seen.insert(q).second) todo.push(q);
        }
    }
    CHECK(seen.size() == 4);
    for (const auto& [from, to] : edges)
        if (to == P::Conversation) CHECK(from == P::Request);
    for (P p : kAllPhases) CHECK(transition(p, RitualEvent::error("x")) == P::Idle);
}

TEST_CASE("utterance events need text") {
    CHECK_THROWS_AS(RitualEvent::utterance(""), std::invalid_argument);
    CHECK(RitualEvent::utterance("hello").text == "hello");
}

TEST_CASE("keyword detection examples") {
    CHECK(detect_keyword("awaken") == Trigger::Awaken);
    CHECK(detect_keyword("Goodbye, little fox") == Trigger::Goodbye);
    CHECK_FALSE(detect_keyword("I was awakened yesterday").has_value());
}

TEST_CASE("keyword detection is whole-word and case-insensitive") {
    CHECK(detect_keyword("  AWAKEN!  ") == Trigger::Awaken);
    CHECK(detect_keyword("please, Awaken now") == Trigger::Awaken);
    CHECK_FALSE(detect_keyword("reawaken").has_value());
    CHECK_FALSE(detect_keyword("goodbyes").has_value());
    CHECK_FALSE(detect_keyword("awaken_now").has_value());
    CHECK_FALSE(detect_keyword("").has_value());
    CHECK(detect_keyword("awaken and then goodbye") == Trigger::Goodbye);
    CHECK(detect_keyword("goodbye... awaken") == Trigger::Goodbye);
}

TEST_CASE("custom and multi-word triggers") {
    const KeywordSet words{"wake up", "farewell"};
    CHECK(detect_keyword("Wake   up, please", words) == Trigger::Awaken);
    CHECK_FALSE(detect_keyword("wake me up", words).has_value());
    CHECK(detect_keyword("FAREWELL", words) == Trigger::Goodbye);
    CHECK_FALSE(detect_keyword("awaken", words).has_value());
}

TEST_CASE("breathing waveform examples") {
    const LightPattern b = LightPattern::breathing(0.15, 0.9, 4.0);
    CHECK(std::abs(brightness_at(b, 0.0) - 0.15) < 1e-12);
    CHECK(std::abs(brightness_at(b, 2.0) - 0.9) < 1e-12);
    CHECK(std::abs(brightness_at(b, 1.0) - 0.525) < 1e-9);
    CHECK(brightness_at(LightPattern::steady(0.9), 12.3) == 0.9);
    CHECK(brightness_at(LightPattern::off(), 7.0) == 0.0);
    CHECK_THROWS_AS(brightness_at(b, -0.001), std::invalid_argument);
}

TEST_CASE("breathing waveform bounds and periodicity") {
    const LightPattern b = LightPattern::breathing(0.15, 0.9, 4.0);
    for (int i = 0; i <= 40000; ++i) {
        const double t = i * 0.001;
        const double v = brightness_at(b, t);
        CHECK(v >= b.b_min - 1e-9);
        CHECK(v <= b.b_max + 1e-9);
        CHECK(std::abs(brightness_at(b, t + b.period_s) - v) < 1e-9);
        const double formula = b.b_min + (b.b_max - b.b_min) * (1 - std::cos(2 * std::numbers::pi * t / 4.0)) / 2;
        CHECK(std::abs(v - formula) < 1e-9);
    }
}

TEST_CASE("light patterns are validated") {
    CHECK_THROWS(LightPattern::breathing(0.9, 0.1, 4).validate());
    CHECK_THROWS(LightPattern::breathing(0.1, 0.9, 0).validate());
    CHECK_THROWS(LightPattern::breathing(-0.1, 0.9, 4).validate());
    CHECK_THROWS(LightPattern::steady(1.5).validate());
    CHECK_NOTHROW(LightPattern::off().validate());
    CHECK_NOTHROW(LightPattern::steady(1.0).validate());
}
