#pragma once

#include "dexsim/model.hpp"

// Algebraic solutions for the constant-jump, first-level market. These are
// independent of the iterative solver and back it as oracles; the region
// margins reproduce the welfare and spread comparisons without touching a
// root finder.
namespace dexsim::closed_form {

// Effective informed-flow multiplier a = 1 + p*g/(g(r-2)+1).
double crowding(double g1, int r, double pstar);

// First-level half-spread for a constant jump of size J:
//   s/2 = ((lambda_pb + a*lambda_pr)J - (lambda_i+lambda_pr)g1*F)
//         / (lambda_pb + a*lambda_pr + lambda_i)
double clob_half_spread(const MarketParams& params, double g1, double pstar);

// First-unit markup s/2 - Delta, expanded so no spread solve is needed.
double clob_markup(const MarketParams& params, double g1, double pstar);

// Markup per unit time, (lambda_pr + lambda_i) * clob_markup.
double clob_expected_markup(const MarketParams& params, double g1, double pstar);

// Batch-demand pmf q_1 = 1/8, q_2 = ... = q_{Q+1} = 1/(8Q).
VectorXd geometric_q(int Q);

// First-level batch markup under geometric_q with constant impact delta:
//   M_1 = delta * (2/(Q+1)) * (1 - 2^{-Q})
double fba_m1_geometric(int Q, double delta);

// Expected batch markup per unit time under geometric_q, evaluated from the
// closed level formulas M_k = delta*(1 - 2^{k-Q-1}) rather than the recursion.
double fba_expected_markup_geometric(int Q, double interval, double delta);

// CLOB markup per time minus batch markup per time at the geometric demand
// configuration; positive where batching wins on welfare.
double welfare_margin(const MarketParams& params, double g1, double pstar);

// (1-q0) * s_CLOB - s_FBA with s_FBA = 2*(delta + M_1); positive where
// batching quotes the tighter effective spread.
double spread_margin(const MarketParams& params, double g1, double pstar, double q0);

}  // namespace dexsim::closed_form
