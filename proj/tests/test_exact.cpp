#include "doctest.h"

#include <stdexcept>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "lbq/analysis.hpp"
#include "lbq/exact.hpp"
#include "oracles.hpp"

using namespace lbq;

namespace {
std::vector<Policy> five_policies() {
    return {Policy::jsq(), Policy::idle_one_first(), Policy::power_of_d(2),
            Policy::join_idle_queue(), Policy::random()};
}
} // namespace

TEST_CASE("enumerate_states sizes and cap") {
    const Params p2 = make_params(2, 0.5, 1, 0.3);
    auto space = enumerate_states(p2);
    REQUIRE(space.size() == 3);
    CHECK(space.states[0] == AggregateState{{0, 2}});
    CHECK(space.states[1] == AggregateState{{1, 1}});
    CHECK(space.states[2] == AggregateState{{2, 0}});
    CHECK(space.index_of({{1, 1}}) == 1);

    CHECK(enumerate_states(make_params(4, 0.5, 3)).size() == 35);
    CHECK_THROWS_AS(enumerate_states(make_params(50, 0.5, 3), 10'000), std::length_error);
}

TEST_CASE("generator matches the hand-built loss chain") {
    // Random routing, N=2, b=1, lambda=0.3: birth-death with rows
    // (0,2): -2, +2 to (1,1); (1,1): 0.3 to (0,2), -1.3, 1 to (2,0);
    // (2,0): 0.6 to (1,1), -0.6.
    const Params p = make_params(2, 0.5, 1, 0.3);
    auto space = enumerate_states(p);
    auto q = build_generator(space, Policy::random(), p);
    REQUIRE(q.n == 3);

    auto entry = [&](std::int64_t i, std::int64_t j) {
        for (auto k = q.row_begin[i]; k < q.row_begin[i + 1]; ++k)
            if (q.col[static_cast<std::size_t>(k)] == j)
                return q.value[static_cast<std::size_t>(k)];
        return 0.0;
    };
    CHECK(entry(0, 0) == doctest::Approx(-2.0).epsilon(1e-15));
    CHECK(entry(0, 1) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(entry(1, 0) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(entry(1, 1) == doctest::Approx(-1.3).epsilon(1e-15));
    CHECK(entry(1, 2) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(entry(2, 1) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(entry(2, 2) == doctest::Approx(-0.6).epsilon(1e-15));
}

TEST_CASE("generator rows sum to zero with at most 2b+1 entries") {
    const Params p = make_params(6, 0.5, 3);
    auto space = enumerate_states(p);
    for (const auto &pol : five_policies()) {
        auto q = build_generator(space, pol, p);
        for (std::int64_t i = 0; i < q.n; ++i) {
            double row = 0.0;
            CHECK(q.row_begin[i + 1] - q.row_begin[i] <= 2 * p.buffer_levels + 1);
            for (auto k = q.row_begin[i]; k < q.row_begin[i + 1]; ++k)
                row += q.value[static_cast<std::size_t>(k)];
            CHECK(std::abs(row) <= 1e-12);
        }
    }
}

TEST_CASE("policy-equivalent generators are identical down to the bit") {
    for (std::int64_t n : {2, 4, 8}) {
        for (std::int64_t b : {1, 2, 3}) {
            const Params p = make_params(n, 0.5, b);
            auto space = enumerate_states(p);
            auto q_jsq = build_generator(space, Policy::jsq(), p);
            auto q_pod =
                build_generator(space, Policy::power_of_d(n, Sampling::WithoutReplacement), p);
            CHECK(q_jsq.col == q_pod.col);
            CHECK(q_jsq.value == q_pod.value); // exact vector equality

            auto q_rand = build_generator(space, Policy::random(), p);
            auto q_pod1 = build_generator(space, Policy::power_of_d(1), p);
            CHECK(q_rand.col == q_pod1.col);
            CHECK(q_rand.value == q_pod1.value);
        }
    }
}

TEST_CASE("stationary distribution reproduces the Erlang-B loss system") {
    const Params p = make_params(2, 0.5, 1, 0.3);
    auto space = enumerate_states(p);
    // all idle-preferring policies coincide at b=1
    auto q = build_generator(space, Policy::jsq(), p);
    auto dist = stationary_distribution(q);
    // order is (0,2), (1,1), (2,0): pi = (0.18, 0.6, 1)/1.78
    CHECK(dist.pi[0] == doctest::Approx(0.10112359550561797).epsilon(1e-12));
    CHECK(dist.pi[1] == doctest::Approx(0.33707865168539325).epsilon(1e-12));
    CHECK(dist.pi[2] == doctest::Approx(0.5617977528089888).epsilon(1e-12));
    CHECK(dist.residual <= 1e-12);

    auto m = exact_metrics(space, dist, Policy::jsq(), p, 1, 33.0);
    CHECK(m.es[0].value == doctest::Approx(0.2696629213483146).epsilon(1e-12));
    CHECK(m.p_block.value == doctest::Approx(0.10112359550561797).epsilon(1e-12));
    // work conservation on the same instance
    CHECK(m.es[0].value == doctest::Approx(p.lambda * (1.0 - m.p_block.value)).epsilon(1e-12));
}

TEST_CASE("direct solve and power iteration agree in total variation") {
    const Params p = make_params(5, 0.5, 3);
    auto space = enumerate_states(p);
    auto q = build_generator(space, Policy::power_of_d(2), p);
    auto direct = stationary_distribution(q, SolveMethod::DirectSolve);
    auto powered = stationary_distribution(q, SolveMethod::PowerIteration, 1e-13);
    double tv = 0.0;
    for (std::size_t i = 0; i < direct.pi.size(); ++i)
        tv += std::abs(direct.pi[i] - powered.pi[i]);
    CHECK(tv / 2.0 <= 1e-9);
    CHECK(powered.residual <= 1e-13);
}

TEST_CASE("b=1 blocking matches the per-policy loss formula") {
    // Idle-preferring policies pool the servers (Erlang-B at offered load
    // lambda N); random routing leaves N independent single-slot queues
    // (Erlang-B at load lambda per server).
    for (double lambda : {0.3, 0.7}) {
        for (std::int64_t n : {2, 5, 10}) {
            const Params p = make_params(n, 0.5, 1, lambda);
            auto space = enumerate_states(p);
            const double pooled = oracle::erlang_b(n, lambda * static_cast<double>(n));
            for (const auto &pol :
                 {Policy::jsq(), Policy::idle_one_first(), Policy::join_idle_queue(),
                  Policy::power_of_d(n, Sampling::WithoutReplacement)}) {
                auto dist = stationary_distribution(build_generator(space, pol, p));
                auto m = exact_metrics(space, dist, pol, p, 1, 33.0);
                CHECK(std::abs(m.p_block.value - pooled) <= 1e-10);
            }
            auto dist = stationary_distribution(build_generator(space, Policy::random(), p));
            auto m = exact_metrics(space, dist, Policy::random(), p, 1, 33.0);
            CHECK(std::abs(m.p_block.value - oracle::mm11_loss(lambda)) <= 1e-10);
            CHECK(std::abs(m.p_block.value - oracle::erlang_b(1, lambda)) <= 1e-10);
        }
    }
}

TEST_CASE("light traffic pushes the system toward idle") {
    const Params p = make_params(2, 0.5, 1, 1e-6);
    auto space = enumerate_states(p);
    auto dist = stationary_distribution(build_generator(space, Policy::random(), p));
    auto m = exact_metrics(space, dist, Policy::random(), p, 1, 33.0);
    CHECK(std::abs(m.es[0].value - p.lambda) <= 1e-9);
    CHECK(m.p_block.value <= 1e-6);
}

TEST_CASE("steady-state identities hold exactly across the policy grid") {
    for (std::int64_t n : {4, 6, 8}) {
        const Params p = make_params(n, 0.5, 3);
        auto space = enumerate_states(p);
        for (const auto &pol : five_policies()) {
            auto dist = stationary_distribution(build_generator(space, pol, p));
            auto reports = verify_identities_exact(space, dist, pol, p);
            for (const auto &rep : reports) {
                INFO(rep.claim, " N=", n, " policy=", pol.name());
                CHECK(std::abs(rep.lhs - rep.rhs) <= 1e-10);
                CHECK(rep.satisfied.value_or(false));
            }
        }
    }
}

TEST_CASE("the s3 identity is vacuous at b=2") {
    const Params p = make_params(4, 0.5, 2);
    auto space = enumerate_states(p);
    auto dist = stationary_distribution(build_generator(space, Policy::jsq(), p));
    auto reports = verify_identities_exact(space, dist, Policy::jsq(), p);
    CHECK(reports[0].claim == "s3-identity");
    CHECK(reports[0].lhs == 0.0);
    // rhs = lambda E[A_2 - A_2] need not be exactly zero in floating point
    CHECK(std::abs(reports[0].rhs) <= 1e-12);
}

TEST_CASE("pi export round-trips through csv") {
    const Params p = make_params(3, 0.5, 2);
    auto space = enumerate_states(p);
    auto dist = stationary_distribution(build_generator(space, Policy::jsq(), p));
    const std::string path = "pi_test_export.csv";
    write_pi_csv(path, space, dist);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "n0,n1,n2,probability");
    std::int64_t rows = 0;
    double total = 0.0;
    std::string line;
    while (std::getline(in, line)) {
        ++rows;
        const auto pos = line.rfind(',');
        total += std::stod(line.substr(pos + 1));
    }
    CHECK(rows == space.size());
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    std::remove(path.c_str());
}
