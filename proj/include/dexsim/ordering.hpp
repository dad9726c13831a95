#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dexsim/errors.hpp"
#include "dexsim/rng.hpp"

namespace dexsim {

// Committee parameters for the ordered-broadcast layer.
//   n      validators
//   f      Byzantine tolerance
//   kappa  order-fairness slack (>= 1)
// honest_relay_only restricts the receipt race to the n-f-1 honest validators
// beyond the entry point.
struct OrderingConfig {
    int n = 4;
    int f = 0;
    int kappa = 1;
    bool honest_relay_only = false;

    void validate() const;
    // True when n > 3f, the usual BFT operating regime.
    bool standard_regime() const { return n > 3 * f; }
    // Number of validators participating in a receipt race.
    int race_size() const { return honest_relay_only ? n - f - 1 : n - 1; }
};

// One network-link latency distribution.
struct LatencySpec {
    enum class Kind { Normal, Exponential, Constant };

    Kind kind = Kind::Normal;
    double a = 1.0;  // mean / rate / value
    double b = 1.0;  // variance (normal only)

    static LatencySpec normal(double mean, double variance);
    static LatencySpec exponential(double rate);
    static LatencySpec constant(double value);
    // Accepts "normal:mean,var", "exponential:rate", "constant:value".
    static LatencySpec parse(const std::string& text);

    void validate() const;
    double sample(Rng& rng) const;
    std::string describe() const;
};

struct LatencyModel {
    LatencySpec validator_link;
    LatencySpec user_link;
    LatencySpec arb_link;

    static LatencyModel uniform(const LatencySpec& s) { return {s, s, s}; }
    void validate() const;
};

// P[D <= 0] where D is the difference of two independent validator-link
// draws, with exact ties counted at weight 1/2. For i.i.d. links this is
// exactly 1/2 by symmetry, which the implementation returns case by case.
double tie_cdf_at_zero(const LatencyModel& model);

// Front-running success probability
//   p* = 1 - sum_{s=2f+kappa-1}^{U} C(U,s) c^s (1-c)^(U-s),  U = race size,
// with an empty sum meaning p* = 1. Evaluated in log space so U up to 10^3
// stays stable.
double success_probability_analytic(const OrderingConfig& cfg, double cdf0);

struct McEstimate {
    double p = 0.0;
    double std_error = 0.0;
    long trials = 0;
};

// Monte-Carlo cross-check: per trial, race the victim's dissemination
// (validator links) against the front-runner's (arb links) across the
// participating validators; the victim message wins the race at a validator
// when its draw is strictly smaller, ties counting 1/2. The front-runner
// succeeds unless the victim's lead count (entry validator included) reaches
// 2f + kappa.
McEstimate success_probability_mc(const OrderingConfig& cfg, const LatencyModel& model,
                                  long trials, std::uint64_t seed);

// Pairwise broadcast-order counts: b(i,j) = number of validators that
// broadcast message i before message j.
struct BroadcastProfile {
    Eigen::MatrixXi b;
    void validate() const;
};

// A message as received by the committee: per-validator receipt times with
// NaN for validators that never saw it.
struct ReceiptMessage {
    std::int64_t id = 0;
    double fee = 0.0;
    std::vector<double> receipts;
};

BroadcastProfile broadcast_counts(const std::vector<ReceiptMessage>& messages);

// Must-precede constraints (i before j) wherever b(i,j) > b(j,i) + 2f + kappa.
std::vector<std::pair<int, int>> fairness_constraints(const BroadcastProfile& profile,
                                                      int f, int kappa);

// Total order over the messages: condense strongly connected components of
// the constraint graph, order components topologically (deterministic
// tie-break), and order within a component by descending fee with
// seeded-uniform shuffling of equal-fee groups. Returns indices into the
// input vector.
std::vector<std::size_t> fair_order(const std::vector<ReceiptMessage>& messages,
                                    const OrderingConfig& cfg, std::uint64_t seed);

// Component id per message for the same condensation fair_order uses;
// messages sharing an id were mutually unordered by the constraints.
std::vector<int> fair_order_components(const std::vector<ReceiptMessage>& messages,
                                       const OrderingConfig& cfg);

}  // namespace dexsim
