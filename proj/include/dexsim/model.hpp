#pragma once

#include <Eigen/Dense>

#include "dexsim/errors.hpp"
#include "dexsim/rng.hpp"

namespace dexsim {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Distribution of the absolute fundamental-value jump size J (J >= 0 with
// bounded support). `rate` is informational: jump specs are reused for both
// public and private information events, whose arrival rates live in
// MarketParams.
struct JumpSpec {
    enum class Kind { Constant, Uniform, Table };

    Kind kind = Kind::Constant;
    double value = 1.0;        // Constant
    double lo = 0.0, hi = 1.0; // Uniform
    VectorXd values;           // Table support points
    VectorXd probs;            // Table probabilities

    static JumpSpec constant(double j);
    static JumpSpec uniform(double lo, double hi);
    static JumpSpec table(VectorXd values, VectorXd probs);

    void validate() const;
    double max_support() const;
    double mean() const;
    // P[J > x] with the strict inequality used throughout.
    double tail_prob(double x) const;
    double sample(Rng& rng) const;

    JumpSpec scaled(double factor) const;
};

// Market primitives shared by both execution designs.
//
//   lambda_i   rate of uninformed investor arrivals
//   lambda_pr  rate of private information events (informed trading)
//   lambda_pb  rate of public information events (sniping races)
//   fee        priority fee F attached to time-sensitive transactions
//   setup_cost per-arbitrageur setup cost c (welfare accounting only)
//   r          number of arbitrageurs
//   Q          book depth in unit levels
//   size_pmf   p_j = P[investor trades j units], j = 1..Q
//   interval   batch auction interval I
struct MarketParams {
    double lambda_i = 0.0;
    double lambda_pr = 0.0;
    double lambda_pb = 0.0;
    double fee = 0.0;
    double setup_cost = 0.0;
    int r = 2;
    int Q = 1;
    VectorXd size_pmf;
    double interval = 1.0;
    JumpSpec jump;

    void validate() const;
    // P[investor size >= k], k = 1-based.
    double size_tail(int k) const;
    double mean_size() const;
    int sample_size(Rng& rng) const;
};

// Conditional jump moments against a half-spread x:
//   jbar(x)   = P[J > x] * E[J - x | J > x]
//   jtilde(x) = P[J > x] * E[J | J > x]
// Both are exact closed forms (sums for discrete specs, polynomial integrals
// for the uniform density).
double jbar(const JumpSpec& jump, double half_spread);
double jtilde(const JumpSpec& jump, double half_spread);

// Adverse-selection price impact of an anonymous unit order:
//   delta = jtilde_k * lambda_pr / (lambda_pr + lambda_i)
double price_impact(double lambda_pr, double lambda_i, double jtilde_k);

// Law of the per-batch excess demand Z, truncated to |Z| <= Q+1.
struct ExcessDemandModel {
    enum class Kind { Skellam, Explicit };

    Kind kind = Kind::Skellam;
    double mu_buy = 1.0;
    double mu_sell = 1.0;
    int Q = 1;
    VectorXd explicit_pmf;  // length 2Q+3, indices -(Q+1)..Q+1

    static ExcessDemandModel skellam(double mu_buy, double mu_sell, int Q);
    static ExcessDemandModel explicit_pmf_model(VectorXd pmf, int Q);
    // Default intensity mapping: mu_buy = mu_sell = (lambda_i + lambda_pr) * I / 2.
    static ExcessDemandModel from_params(const MarketParams& params);

    void validate() const;
};

// Untruncated Skellam pmf P[Z = k] for Z = Poisson(mu_buy) - Poisson(mu_sell),
// evaluated by a scaled series in log space.
double skellam_pmf(double mu_buy, double mu_sell, int k);

// Truncated-and-renormalized pmf over k = -(Q+1)..Q+1, returned as a vector of
// length 2Q+3 with index i <-> k = i - (Q+1). Sums to one.
VectorXd excess_demand_pmf(const ExcessDemandModel& model);

// q_k = P[Z = k | |Z| <= Q+1] for k = 1..Q+1, extracted from the full pmf.
VectorXd positive_demand_q(const ExcessDemandModel& model);

}  // namespace dexsim
