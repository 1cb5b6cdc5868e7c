#include "doctest.h"

#include <stdexcept>

#include <cmath>
#include <set>

#include "lbq/params.hpp"
#include "lbq/state.hpp"
#include "lbq/transitions.hpp"

using namespace lbq;

TEST_CASE("make_params follows the heavy-traffic load curve") {
    CHECK(make_params(4, 0.5, 3).lambda == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(make_params(1'000'000, 0.5, 3).lambda == doctest::Approx(0.999).epsilon(1e-15));
    CHECK(make_params(2, 0.5, 1, 0.3).lambda == 0.3);
    CHECK(make_params(2, 0.5, 1, 0.3).lambda_overridden);
}

TEST_CASE("make_params rejects degenerate loads") {
    CHECK_THROWS_AS(make_params(0, 0.5, 3), std::invalid_argument);
    CHECK_THROWS_AS(make_params(4, 0.5, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_params(1, 0.5, 3), std::invalid_argument); // lambda = 0
    CHECK_THROWS_AS(make_params(4, -0.5, 3), std::invalid_argument);
    CHECK_THROWS_AS(make_params(4, 1.5, 3), std::invalid_argument);
    CHECK_THROWS_AS(make_params(4, 0.5, 3, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(make_params(4, 0.5, 3, 0.0), std::invalid_argument);
    CHECK_NOTHROW(make_params(1, 0.5, 3, 0.3)); // override rescues N = 1
}

TEST_CASE("tail fractions") {
    const Params p = make_params(4, 0.5, 3);
    AggregateState s{{2, 1, 1, 0}};
    auto tails = tail_fractions(s, p);
    CHECK(tails == std::vector<double>{0.5, 0.25, 0.0});

    CHECK(tail_fractions({{0, 0, 0, 4}}, p) == std::vector<double>{1.0, 1.0, 1.0});
    CHECK(tail_fractions({{4, 0, 0, 0}}, p) == std::vector<double>{0.0, 0.0, 0.0});
    CHECK(tail_fraction(s, p, 0) == 1.0);
    CHECK(tail_fraction(s, p, 4) == 0.0); // beyond the buffer, by convention
}

TEST_CASE("tail fractions are monotone and invert back to counts") {
    const Params p = make_params(5, 0.5, 3);
    for_each_state(p, [&](const AggregateState &s) {
        const auto tails = tail_fractions(s, p);
        double prev = 1.0;
        for (double t : tails) {
            CHECK(t <= prev + 1e-15);
            prev = t;
        }
        // counts -> s -> counts round trip
        AggregateState back;
        back.counts.assign(static_cast<std::size_t>(p.buffer_levels) + 1, 0);
        double prev_tail = 1.0;
        for (std::int64_t i = 1; i <= p.buffer_levels; ++i) {
            const double s_i = tails[static_cast<std::size_t>(i - 1)];
            back.counts[static_cast<std::size_t>(i - 1)] = static_cast<std::int64_t>(
                std::llround((prev_tail - s_i) * static_cast<double>(p.n_servers)));
            prev_tail = s_i;
        }
        back.counts[static_cast<std::size_t>(p.buffer_levels)] = static_cast<std::int64_t>(
            std::llround(prev_tail * static_cast<double>(p.n_servers)));
        CHECK(back == s);
    });
}

TEST_CASE("state space sizes") {
    CHECK(state_space_size(2, 1) == 3);
    CHECK(state_space_size(4, 3) == 35);
    CHECK(state_space_size(50, 3) == 23426);
}

TEST_CASE("for_each_state is lexicographic and complete") {
    const Params p = make_params(3, 0.5, 2);
    std::vector<AggregateState> seen;
    for_each_state(p, [&](const AggregateState &s) { seen.push_back(s); });
    CHECK(static_cast<std::int64_t>(seen.size()) == state_space_size(3, 2));
    for (std::size_t i = 1; i < seen.size(); ++i) CHECK(seen[i - 1] < seen[i]);
    for (const auto &s : seen) CHECK_NOTHROW(validate_state(s, p));
}

TEST_CASE("transitions: JSQ joins the idle server") {
    const Params p = make_params(2, 0.5, 2, 0.45);
    AggregateState s{{1, 1, 0}};
    auto ts = transitions(s, Policy::jsq(), p);
    REQUIRE(ts.size() == 2);
    CHECK(ts[0].kind == TransitionKind::ArrivalJoin);
    CHECK(ts[0].rate == doctest::Approx(2 * 0.45).epsilon(1e-15));
    CHECK(ts[0].target == AggregateState{{0, 2, 0}});
    CHECK(ts[1].kind == TransitionKind::Departure);
    CHECK(ts[1].rate == 1.0);
    CHECK(ts[1].target == AggregateState{{2, 0, 0}});
}

TEST_CASE("transitions: full system only blocks and serves") {
    const Params p = make_params(2, 0.5, 1, 0.45);
    AggregateState s{{0, 2}};
    for (const Policy &pol : {Policy::jsq(), Policy::random(), Policy::join_idle_queue()}) {
        auto ts = transitions(s, pol, p);
        REQUIRE(ts.size() == 2);
        CHECK(ts[0].kind == TransitionKind::ArrivalBlocked);
        CHECK(ts[0].rate == doctest::Approx(0.9).epsilon(1e-15));
        CHECK(ts[1].kind == TransitionKind::Departure);
        CHECK(ts[1].rate == 2.0);
        CHECK(ts[1].target == AggregateState{{1, 1}});
    }
}

TEST_CASE("transitions: random splits by tail differences") {
    // Every server at one job: the arrival joins level 2 at full rate.
    const Params p = make_params(4, 0.5, 3);
    AggregateState s{{0, 4, 0, 0}};
    auto ts = transitions(s, Policy::random(), p);
    REQUIRE(ts.size() == 2);
    CHECK(ts[0].kind == TransitionKind::ArrivalJoin);
    CHECK(ts[0].level == 2);
    CHECK(ts[0].rate == doctest::Approx(4 * p.lambda).epsilon(1e-15));
    CHECK(ts[0].target == AggregateState{{0, 3, 1, 0}});
    CHECK(ts[1].kind == TransitionKind::Departure);
    CHECK(ts[1].rate == 4.0);
}

TEST_CASE("transition rate balance and conservation over every state") {
    const Params p = make_params(5, 0.5, 3);
    const std::vector<Policy> policies = {Policy::jsq(), Policy::idle_one_first(),
                                          Policy::join_idle_queue(), Policy::random(),
                                          Policy::power_of_d(2),
                                          Policy::power_of_d(3, Sampling::WithoutReplacement)};
    for_each_state(p, [&](const AggregateState &s) {
        for (const auto &pol : policies) {
            double arrival_sum = 0.0, departure_sum = 0.0;
            for (const auto &t : transitions(s, pol, p)) {
                CHECK(t.rate > 0.0);
                if (t.kind == TransitionKind::Departure) {
                    departure_sum += t.rate;
                } else {
                    arrival_sum += t.rate;
                }
                if (t.kind != TransitionKind::ArrivalBlocked) {
                    std::int64_t total = 0, jobs = 0, jobs_src = 0;
                    for (std::size_t i = 0; i < t.target.counts.size(); ++i) {
                        total += t.target.counts[i];
                        jobs += static_cast<std::int64_t>(i) * t.target.counts[i];
                        jobs_src += static_cast<std::int64_t>(i) * s.counts[i];
                    }
                    CHECK(total == p.n_servers);
                    CHECK(std::abs(jobs - jobs_src) == 1);
                }
            }
            CHECK(arrival_sum == doctest::Approx(p.arrival_rate()).epsilon(1e-12));
            CHECK(departure_sum ==
                  doctest::Approx(static_cast<double>(s.tail_count(1))).epsilon(1e-12));
        }
    });
}
