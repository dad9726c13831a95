#include "dexsim/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dexsim {

double ClobEquilibrium::level_markup(const MarketParams& params, int level) const {
    if (level < 1 || level > half_spreads.size())
        throw ConfigError("level_markup: level out of range");
    const double delta_k =
        price_impact(params.lambda_pr, params.lambda_i, jtilde_k[level - 1]);
    return half_spreads[level - 1] - delta_k;
}

double clob_residual(const MarketParams& params, double half_spread, double g,
                     double pstar, int level) {
    params.validate();
    if (level < 1 || level > params.Q)
        throw ConfigError("clob_residual: level out of range");
    if (!(g >= 0.0 && g <= 1.0))
        throw ConfigError("clob_residual: g must lie in [0,1]");
    if (!(pstar >= 0.0 && pstar <= 1.0))
        throw ConfigError("clob_residual: p* must lie in [0,1]");

    const double jb = jbar(params.jump, half_spread);
    const double crowd = g / (g * (params.r - 2) + 1.0);
    return params.lambda_i * params.size_tail(level) * half_spread -
           params.lambda_pr * (1.0 + pstar * crowd) * jb -
           params.lambda_pb * jb +
           (params.lambda_i + params.lambda_pr) * g * params.fee;
}

double optimal_g(const MarketParams& params, double pstar, double jbar_k) {
    if (!(pstar >= 0.0 && pstar <= 1.0))
        throw ConfigError("optimal_g: p* must lie in [0,1]");
    if (!(jbar_k >= 0.0)) throw ConfigError("optimal_g: jbar must be >= 0");

    const double gain = params.lambda_pr * pstar * jbar_k;
    const double cost = (params.lambda_i + params.lambda_pr) * params.fee;
    if (gain <= 0.0) return 0.0;
    if (cost <= 0.0) return 1.0;
    if (params.r == 2) return gain > cost ? 1.0 : 0.0;
    const double root = (std::sqrt(gain / cost) - 1.0) / (params.r - 2);
    return std::clamp(root, 0.0, 1.0);
}

namespace {

struct LevelSolution {
    double half_spread = 0.0;
    double g = 0.0;
};

// Residual at fixed g is monotone non-decreasing in the half-spread, so the
// smallest root is the infimum of {x : residual(x) >= 0}, found by predicate
// bisection down to machine resolution.
double bisect_half_spread(const MarketParams& params, double pstar, int level,
                          double g, double hi) {
    auto residual = [&](double x) {
        const double jb = jbar(params.jump, x);
        const double crowd = g / (g * (params.r - 2) + 1.0);
        return params.lambda_i * params.size_tail(level) * x -
               params.lambda_pr * (1.0 + pstar * crowd) * jb -
               params.lambda_pb * jb +
               (params.lambda_i + params.lambda_pr) * g * params.fee;
    };
    if (residual(0.0) >= 0.0) return 0.0;
    if (residual(hi) < 0.0) {
        std::ostringstream msg;
        msg << "solve_clob: no root in bracket at level " << level
            << " (residual at bracket top " << residual(hi) << ")";
        throw NumericError(msg.str());
    }
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-17 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (residual(mid) >= 0.0) hi = mid;
        else lo = mid;
    }
    return hi;
}

LevelSolution solve_level(const MarketParams& params, double pstar, int level) {
    const double bracket = 2.0 * params.jump.max_support() +
                           2.0 * params.Q * params.fee + 1.0;
    LevelSolution sol;
    sol.g = 0.0;
    sol.half_spread = bisect_half_spread(params, pstar, level, sol.g, bracket);

    double prev_dg = 0.0;
    int alternations = 0;
    bool damped = false;
    for (int it = 0; it < 10000; ++it) {
        const double jb = jbar(params.jump, sol.half_spread);
        const double g_prop = optimal_g(params, pstar, jb);
        const double dg = g_prop - sol.g;
        if (dg * prev_dg < 0.0) {
            if (++alternations >= 2) damped = true;
        } else {
            alternations = 0;
        }
        prev_dg = dg;
        const double g_next = damped ? 0.5 * (sol.g + g_prop) : g_prop;
        const double s_next = bisect_half_spread(params, pstar, level, g_next, bracket);
        const bool done = std::abs(s_next - sol.half_spread) < 1e-10 &&
                          std::abs(g_next - sol.g) < 1e-8;
        sol.half_spread = s_next;
        sol.g = g_next;
        if (done) return sol;
    }
    std::ostringstream msg;
    msg << "solve_clob: no convergence at level " << level << " (last residual "
        << clob_residual(params, sol.half_spread, sol.g, pstar, level) << ")";
    throw NumericError(msg.str());
}

ClobEquilibrium assemble_clob(const MarketParams& params, double pstar,
                              const VectorXd& half_spreads, const VectorXd& g,
                              bool equilibrium_g) {
    ClobEquilibrium eq;
    eq.half_spreads = half_spreads;
    eq.g = g;
    eq.pstar = pstar;
    eq.equilibrium_g = equilibrium_g;
    eq.jbar_k.resize(params.Q);
    eq.jtilde_k.resize(params.Q);
    for (int k = 0; k < params.Q; ++k) {
        eq.jbar_k[k] = jbar(params.jump, half_spreads[k]);
        eq.jtilde_k[k] = jtilde(params.jump, half_spreads[k]);
    }
    eq.delta = price_impact(params.lambda_pr, params.lambda_i, eq.jtilde_k[0]);
    eq.markup_first_unit = eq.half_spreads[0] - eq.delta;
    eq.expected_markup = (params.lambda_pr + params.lambda_i) * eq.markup_first_unit;
    eq.arb_welfare_loss = params.r * params.setup_cost +
                          eq.g.sum() * (params.r - 1) * pstar * params.fee;
    return eq;
}

}  // namespace

ClobEquilibrium solve_clob(const MarketParams& params, double pstar) {
    params.validate();
    if (!(params.lambda_i > 0.0))
        throw ConfigError("solve_clob: lambda_i must be > 0");
    if (!(pstar >= 0.0 && pstar <= 1.0))
        throw ConfigError("solve_clob: p* must lie in [0,1]");

    VectorXd half_spreads(params.Q), g(params.Q);
    for (int k = 1; k <= params.Q; ++k) {
        const LevelSolution sol = solve_level(params, pstar, k);
        half_spreads[k - 1] = sol.half_spread;
        g[k - 1] = sol.g;
    }
    return assemble_clob(params, pstar, half_spreads, g, true);
}

ClobEquilibrium solve_clob_fixed_g(const MarketParams& params, double pstar,
                                   const VectorXd& g_fixed) {
    params.validate();
    if (!(params.lambda_i > 0.0))
        throw ConfigError("solve_clob: lambda_i must be > 0");
    if (g_fixed.size() != params.Q)
        throw ConfigError("solve_clob_fixed_g: need one g per level");
    for (int k = 0; k < params.Q; ++k)
        if (!(g_fixed[k] >= 0.0 && g_fixed[k] <= 1.0))
            throw ConfigError("solve_clob_fixed_g: g must lie in [0,1]");

    const double bracket = 2.0 * params.jump.max_support() +
                           2.0 * params.Q * params.fee + 1.0;
    VectorXd half_spreads(params.Q);
    for (int k = 1; k <= params.Q; ++k)
        half_spreads[k - 1] = bisect_half_spread(params, pstar, k, g_fixed[k - 1], bracket);
    return assemble_clob(params, pstar, half_spreads, g_fixed, false);
}

FbaEquilibrium fba_markups(const VectorXd& deltas, const VectorXd& q, int Q) {
    if (Q < 1) throw ConfigError("fba_markups: Q must be >= 1");
    if (deltas.size() != Q + 1 || q.size() != Q + 1)
        throw ConfigError("fba_markups: deltas and q need Q+1 entries");
    for (int k = 0; k < Q; ++k)
        if (!(q[k] + q[k + 1] > 0.0))
            throw ConfigError("fba_markups: q_k + q_{k+1} must be > 0 for k <= Q");
    for (int k = 0; k <= Q; ++k) {
        if (!(q[k] >= 0.0)) throw ConfigError("fba_markups: q entries must be >= 0");
        if (!(deltas[k] >= 0.0)) throw ConfigError("fba_markups: deltas must be >= 0");
    }

    FbaEquilibrium eq;
    eq.q = q;
    eq.deltas = deltas;
    eq.alphas.resize(Q);
    for (int k = 0; k < Q; ++k) eq.alphas[k] = q[k + 1] / (q[k] + q[k + 1]);
    eq.markups = VectorXd::Zero(Q + 1);
    for (int k = Q - 1; k >= 0; --k)
        eq.markups[k] = eq.alphas[k] * (eq.deltas[k] + eq.markups[k + 1]);
    eq.half_spread_first = eq.deltas[0] + eq.markups[0];
    return eq;
}

double fba_expected_markup(double interval, const VectorXd& q, const VectorXd& markups) {
    if (!(interval > 0.0)) throw ConfigError("fba_expected_markup: interval must be > 0");
    if (q.size() != markups.size())
        throw ConfigError("fba_expected_markup: q and markups must align");
    double acc = 0.0;
    for (Eigen::Index k = 0; k < q.size(); ++k)
        acc += static_cast<double>(k + 1) * q[k] * markups[k];
    return 2.0 / interval * acc;
}

FbaEquilibrium solve_fba(const MarketParams& params, const ExcessDemandModel& demand) {
    params.validate();
    demand.validate();
    if (demand.Q != params.Q)
        throw ConfigError("solve_fba: demand model depth must match params.Q");

    const VectorXd q = positive_demand_q(demand);
    const double delta =
        price_impact(params.lambda_pr, params.lambda_i, params.jump.mean());
    const VectorXd deltas = VectorXd::Constant(params.Q + 1, delta);
    FbaEquilibrium eq = fba_markups(deltas, q, params.Q);
    eq.interval = params.interval;
    eq.expected_markup_per_time = fba_expected_markup(params.interval, eq.q, eq.markups);
    return eq;
}

Axis axis_from_name(const std::string& name) {
    if (name == "lambda_i") return Axis::LambdaI;
    if (name == "lambda_pr") return Axis::LambdaPr;
    if (name == "lambda_pb") return Axis::LambdaPb;
    if (name == "fee") return Axis::Fee;
    if (name == "jump_scale") return Axis::JumpScale;
    if (name == "r") return Axis::ArbCount;
    throw ConfigError("unknown axis '" + name + "'");
}

std::string axis_name(Axis axis) {
    switch (axis) {
        case Axis::LambdaI: return "lambda_i";
        case Axis::LambdaPr: return "lambda_pr";
        case Axis::LambdaPb: return "lambda_pb";
        case Axis::Fee: return "fee";
        case Axis::JumpScale: return "jump_scale";
        case Axis::ArbCount: return "r";
    }
    return "?";
}

MarketParams with_axis(const MarketParams& params, Axis axis, double value) {
    MarketParams p = params;
    switch (axis) {
        case Axis::LambdaI: p.lambda_i = value; break;
        case Axis::LambdaPr: p.lambda_pr = value; break;
        case Axis::LambdaPb: p.lambda_pb = value; break;
        case Axis::Fee: p.fee = value; break;
        case Axis::JumpScale: p.jump = params.jump.scaled(value); break;
        case Axis::ArbCount: p.r = static_cast<int>(std::lround(value)); break;
    }
    return p;
}

void AxisRange::validate() const {
    if (!(lo <= hi)) throw ConfigError("axis range: need lo <= hi");
    if (steps < 2) throw ConfigError("axis range: need at least two steps");
}

double AxisRange::value_at(int i) const {
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
}

namespace {

void require_rate_axis(Axis axis) {
    if (axis != Axis::LambdaI && axis != Axis::LambdaPr && axis != Axis::LambdaPb)
        throw ConfigError("region axes must be among lambda_i, lambda_pr, lambda_pb");
}

// Regions only consume the first book level, so they solve it directly
// rather than running the full ladder per cell.
LevelSolution first_level(const MarketParams& params, double pstar) {
    if (!(params.lambda_i > 0.0))
        throw ConfigError("region: lambda_i must be > 0");
    return solve_level(params, pstar, 1);
}

template <typename CellFn>
RegionGrid fill_grid(const MarketParams& params, const AxisRange& a, const AxisRange& b,
                     CellFn&& cell) {
    a.validate();
    b.validate();
    require_rate_axis(a.axis);
    require_rate_axis(b.axis);
    if (a.axis == b.axis) throw ConfigError("region axes must differ");

    RegionGrid grid;
    grid.a_name = axis_name(a.axis);
    grid.b_name = axis_name(b.axis);
    grid.a_values.resize(a.steps);
    grid.b_values.resize(b.steps);
    for (int i = 0; i < a.steps; ++i) grid.a_values[i] = a.value_at(i);
    for (int j = 0; j < b.steps; ++j) grid.b_values[j] = b.value_at(j);

    grid.cells.resize(a.steps, b.steps);
    for (int i = 0; i < a.steps; ++i) {
        for (int j = 0; j < b.steps; ++j) {
            MarketParams p = with_axis(params, a.axis, grid.a_values[i]);
            p = with_axis(p, b.axis, grid.b_values[j]);
            try {
                grid.cells(i, j) = cell(p);
            } catch (const std::exception&) {
                grid.cells(i, j) = std::numeric_limits<double>::quiet_NaN();
            }
        }
    }
    return grid;
}

}  // namespace

RegionGrid welfare_region(const MarketParams& params, double pstar,
                          const AxisRange& a, const AxisRange& b,
                          const std::optional<ExcessDemandModel>& demand) {
    params.validate();
    return fill_grid(params, a, b, [&](const MarketParams& p) {
        p.validate();
        const LevelSolution lvl = first_level(p, pstar);
        const double jt = jtilde(p.jump, lvl.half_spread);
        const double delta = price_impact(p.lambda_pr, p.lambda_i, jt);
        const double clob_markup =
            (p.lambda_pr + p.lambda_i) * (lvl.half_spread - delta);
        const ExcessDemandModel model =
            demand ? *demand : ExcessDemandModel::from_params(p);
        const FbaEquilibrium fba = solve_fba(p, model);
        return clob_markup - fba.expected_markup_per_time;
    });
}

RegionGrid spread_region(const MarketParams& params, double pstar, double q0,
                         const AxisRange& a, const AxisRange& b,
                         const std::optional<ExcessDemandModel>& demand) {
    params.validate();
    if (!(q0 >= 0.0 && q0 < 1.0))
        throw ConfigError("spread_region: q0 must lie in [0,1)");
    return fill_grid(params, a, b, [&](const MarketParams& p) {
        p.validate();
        const LevelSolution lvl = first_level(p, pstar);
        const double s_clob = 2.0 * lvl.half_spread;
        const ExcessDemandModel model =
            demand ? *demand : ExcessDemandModel::from_params(p);
        const FbaEquilibrium fba = solve_fba(p, model);
        const double s_fba = 2.0 * fba.half_spread_first;
        return (1.0 - q0) * s_clob - s_fba;
    });
}

VectorXd markup_sweep_clob(const MarketParams& params, double pstar, const AxisRange& range) {
    params.validate();
    range.validate();
    VectorXd out(range.steps);
    for (int i = 0; i < range.steps; ++i) {
        const MarketParams p = with_axis(params, range.axis, range.value_at(i));
        p.validate();
        const LevelSolution lvl = first_level(p, pstar);
        const double jt = jtilde(p.jump, lvl.half_spread);
        const double delta = price_impact(p.lambda_pr, p.lambda_i, jt);
        out[i] = (p.lambda_pr + p.lambda_i) * (lvl.half_spread - delta);
    }
    return out;
}

VectorXd markup_sweep_fba(const MarketParams& params, const AxisRange& range,
                          const std::optional<ExcessDemandModel>& demand) {
    params.validate();
    range.validate();
    VectorXd out(range.steps);
    for (int i = 0; i < range.steps; ++i) {
        const MarketParams p = with_axis(params, range.axis, range.value_at(i));
        p.validate();
        const ExcessDemandModel model =
            demand ? *demand : ExcessDemandModel::from_params(p);
        const FbaEquilibrium fba = solve_fba(p, model);
        out[i] = fba.markups[0];
    }
    return out;
}

}  // namespace dexsim
