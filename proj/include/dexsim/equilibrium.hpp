#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

#include "dexsim/model.hpp"

namespace dexsim {

// Stationary continuous-book equilibrium. Vectors are level-indexed,
// entry k-1 holding the quantity for level k = 1..Q.
struct ClobEquilibrium {
    VectorXd half_spreads;   // s_k / 2
    VectorXd g;              // front-running intensity g_k in [0,1]
    VectorXd jbar_k;         // conditional overshoot moment at s_k/2
    VectorXd jtilde_k;       // conditional jump moment at s_k/2
    double pstar = 0.0;
    double delta = 0.0;              // first-level price impact
    double markup_first_unit = 0.0;  // s_1/2 - delta
    double expected_markup = 0.0;    // (lambda_pr + lambda_i) * markup
    double arb_welfare_loss = 0.0;   // r c + sum_k g_k (r-1) p* F
    bool equilibrium_g = true;       // false for the fixed-g diagnostic mode

    // Per-level markup s_k/2 - delta_k; the headline number is level 1.
    double level_markup(const MarketParams& params, int level) const;
};

// Zero-profit residual of the level-k quote condition at a candidate
// half-spread and front-running intensity:
//   lambda_i * P[size >= k] * s_k/2
//     - lambda_pr * (1 + p* g/(g(r-2)+1)) * jbar_k
//     - lambda_pb * jbar_k
//     + (lambda_i + lambda_pr) * g * F
double clob_residual(const MarketParams& params, double half_spread, double g,
                     double pstar, int level);

// Maximizer over g in [0,1] of the front-runner objective
//   lambda_pr p* g/(g(r-2)+1) jbar - (lambda_i + lambda_pr) g F,
// by closed form (interior stationary point clamped; linear edge cases for
// r = 2 and F = 0 handled by sign).
double optimal_g(const MarketParams& params, double pstar, double jbar_k);

// Level-by-level fixed point: bisection in s at fixed g alternating with the
// closed-form g update, 0.5 damping on oscillation, until successive
// half-spreads move by less than 1e-10. Smallest residual root preferred.
ClobEquilibrium solve_clob(const MarketParams& params, double pstar);

// Diagnostic (non-equilibrium) mode: g held fixed, spreads solved around it.
ClobEquilibrium solve_clob_fixed_g(const MarketParams& params, double pstar,
                                   const VectorXd& g_fixed);

// Frequent-batch-auction equilibrium quotes. Vectors cover levels 1..Q+1
// (alphas stop at Q); markups satisfy M_{Q+1} = 0.
struct FbaEquilibrium {
    VectorXd q;        // q_k = P[Z = k | |Z| <= Q+1], k = 1..Q+1
    VectorXd deltas;   // price impact per level
    VectorXd alphas;   // q_{k+1} / (q_k + q_{k+1}), k = 1..Q
    VectorXd markups;  // M_k, k = 1..Q+1
    double interval = 1.0;
    double expected_markup_per_time = 0.0;  // (2/I) sum_k k q_k M_k
    double half_spread_first = 0.0;         // delta_1 + M_1
};

// Backward recursion M_k = alpha_k (delta_k + M_{k+1}), M_{Q+1} = 0.
// deltas and q are level-indexed vectors of length Q+1.
FbaEquilibrium fba_markups(const VectorXd& deltas, const VectorXd& q, int Q);

double fba_expected_markup(double interval, const VectorXd& q, const VectorXd& markups);

// Assemble the batch-auction equilibrium from market primitives: q from the
// excess-demand law, a common price impact from the unconditional jump mean
// (the conditional moment's upper bound, keeping level quotes closed-form).
FbaEquilibrium solve_fba(const MarketParams& params, const ExcessDemandModel& demand);

// Parameter axes for sweeps and comparison grids.
enum class Axis { LambdaI, LambdaPr, LambdaPb, Fee, JumpScale, ArbCount };

Axis axis_from_name(const std::string& name);
std::string axis_name(Axis axis);
MarketParams with_axis(const MarketParams& params, Axis axis, double value);

struct AxisRange {
    Axis axis = Axis::LambdaPb;
    double lo = 0.0;
    double hi = 1.0;
    int steps = 2;

    void validate() const;
    double value_at(int i) const;
};

// Dense comparison grid; cell(i, j) pairs a_values[i] (rows) with
// b_values[j] (columns). Unsolvable cells carry NaN.
struct RegionGrid {
    VectorXd a_values;
    VectorXd b_values;
    MatrixXd cells;
    std::string a_name;
    std::string b_name;
};

// Welfare comparison: cell = CLOB expected markup per unit time minus FBA
// expected markup per unit time. Positive cells favor batching. Axes must be
// among the three arrival rates. An explicit demand model pins the batch
// excess-demand law; otherwise it derives from each cell's parameters.
RegionGrid welfare_region(const MarketParams& params, double pstar,
                          const AxisRange& a, const AxisRange& b,
                          const std::optional<ExcessDemandModel>& demand = std::nullopt);

// Spread comparison: cell = (1 - q0) * s_CLOB - s_FBA, the expectation gap
// between the effective continuous-book spread and the batch spread.
RegionGrid spread_region(const MarketParams& params, double pstar, double q0,
                         const AxisRange& a, const AxisRange& b,
                         const std::optional<ExcessDemandModel>& demand = std::nullopt);

// One-dimensional sweeps used for monotonicity checks and figure-style
// tables: expected CLOB markup, and the FBA first-level markup M_1.
VectorXd markup_sweep_clob(const MarketParams& params, double pstar, const AxisRange& range);
VectorXd markup_sweep_fba(const MarketParams& params, const AxisRange& range,
                          const std::optional<ExcessDemandModel>& demand = std::nullopt);

}  // namespace dexsim
