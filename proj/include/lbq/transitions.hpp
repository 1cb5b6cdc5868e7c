#ifndef LBQ_TRANSITIONS_HPP
#define LBQ_TRANSITIONS_HPP

#include <cstdint>
#include <vector>

#include "lbq/params.hpp"
#include "lbq/policy.hpp"
#include "lbq/state.hpp"

namespace lbq {

enum class TransitionKind { ArrivalJoin, ArrivalBlocked, Departure };

struct Transition {
    AggregateState target;
    double rate = 0.0;            // events per unit time, > 0 for emitted transitions
    TransitionKind kind = TransitionKind::ArrivalJoin;
    std::int64_t level = 0;       // join level (1..b) or departure level (1..b)
};

// All positive-rate transitions out of `s`. Arrival joining level i moves a
// server from cell i-1 to cell i at rate lambda*N*(A_{i-1} - A_i) with
// A_0 = 1; blocked arrivals are an explicit self-loop at rate lambda*N*A_b;
// departures from level i run at rate n_i. Sum of arrival rates (blocked
// included) is lambda*N and sum of departure rates is N*s_1.
std::vector<Transition> transitions(const AggregateState &s, const Policy &policy,
                                    const Params &p);

} // namespace lbq

#endif
