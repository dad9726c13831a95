#include "dexsim/closed_form.hpp"

#include <cmath>

#include "dexsim/errors.hpp"

namespace dexsim::closed_form {

namespace {

double constant_jump(const MarketParams& params) {
    if (params.jump.kind != JumpSpec::Kind::Constant)
        throw ConfigError("closed form requires a constant jump size");
    return params.jump.value;
}

void check_g(double g1) {
    if (!(g1 >= 0.0 && g1 <= 1.0))
        throw ConfigError("closed form: g must lie in [0,1]");
}

}  // namespace

double crowding(double g1, int r, double pstar) {
    check_g(g1);
    if (r < 2) throw ConfigError("crowding: r must be >= 2");
    if (!(pstar >= 0.0 && pstar <= 1.0))
        throw ConfigError("crowding: p* must lie in [0,1]");
    return 1.0 + pstar * g1 / (g1 * (r - 2) + 1.0);
}

double clob_half_spread(const MarketParams& params, double g1, double pstar) {
    params.validate();
    const double j = constant_jump(params);
    const double a = crowding(g1, params.r, pstar);
    const double informed = params.lambda_pb + a * params.lambda_pr;
    return (informed * j - (params.lambda_i + params.lambda_pr) * g1 * params.fee) /
           (informed + params.lambda_i);
}

double clob_markup(const MarketParams& params, double g1, double pstar) {
    params.validate();
    const double j = constant_jump(params);
    const double a = crowding(g1, params.r, pstar);
    const double li = params.lambda_i, lpr = params.lambda_pr, lpb = params.lambda_pb;
    const double denom = li + a * lpr + lpb;
    return j * (li * lpb + (a - 1.0) * li * lpr) / (denom * (lpr + li)) -
           (li + lpr) * g1 * params.fee / denom;
}

double clob_expected_markup(const MarketParams& params, double g1, double pstar) {
    return (params.lambda_pr + params.lambda_i) * clob_markup(params, g1, pstar);
}

VectorXd geometric_q(int Q) {
    if (Q < 1) throw ConfigError("geometric_q: Q must be >= 1");
    VectorXd q(Q + 1);
    q[0] = 0.125;
    for (int k = 1; k <= Q; ++k) q[k] = 0.125 / Q;
    return q;
}

double fba_m1_geometric(int Q, double delta) {
    if (Q < 1) throw ConfigError("fba_m1_geometric: Q must be >= 1");
    return delta * (2.0 / (Q + 1)) * (1.0 - std::ldexp(1.0, -Q));
}

double fba_expected_markup_geometric(int Q, double interval, double delta) {
    if (Q < 1) throw ConfigError("fba_expected_markup_geometric: Q must be >= 1");
    if (!(interval > 0.0))
        throw ConfigError("fba_expected_markup_geometric: interval must be > 0");
    double acc = 0.125 * fba_m1_geometric(Q, delta);
    for (int k = 2; k <= Q; ++k)
        acc += k * (0.125 / Q) * delta * (1.0 - std::ldexp(1.0, k - Q - 1));
    return 2.0 / interval * acc;
}

double welfare_margin(const MarketParams& params, double g1, double pstar) {
    params.validate();
    const double j = constant_jump(params);
    const double delta = j * params.lambda_pr / (params.lambda_pr + params.lambda_i);
    return clob_expected_markup(params, g1, pstar) -
           fba_expected_markup_geometric(params.Q, params.interval, delta);
}

double spread_margin(const MarketParams& params, double g1, double pstar, double q0) {
    params.validate();
    if (!(q0 >= 0.0 && q0 < 1.0))
        throw ConfigError("spread_margin: q0 must lie in [0,1)");
    const double j = constant_jump(params);
    const double delta = j * params.lambda_pr / (params.lambda_pr + params.lambda_i);
    const double s_clob = 2.0 * clob_half_spread(params, g1, pstar);
    const double s_fba = 2.0 * (delta + fba_m1_geometric(params.Q, delta));
    return (1.0 - q0) * s_clob - s_fba;
}

}  // namespace dexsim::closed_form
