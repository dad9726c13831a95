#include "dexsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dexsim {

JumpSpec JumpSpec::constant(double j) {
    JumpSpec s;
    s.kind = Kind::Constant;
    s.value = j;
    return s;
}

JumpSpec JumpSpec::uniform(double lo, double hi) {
    JumpSpec s;
    s.kind = Kind::Uniform;
    s.lo = lo;
    s.hi = hi;
    return s;
}

JumpSpec JumpSpec::table(VectorXd values, VectorXd probs) {
    JumpSpec s;
    s.kind = Kind::Table;
    s.values = std::move(values);
    s.probs = std::move(probs);
    return s;
}

void JumpSpec::validate() const {
    switch (kind) {
        case Kind::Constant:
            if (!(value >= 0.0) || !std::isfinite(value))
                throw ConfigError("jump spec: constant value must be finite and >= 0");
            return;
        case Kind::Uniform:
            if (!(lo >= 0.0) || !(hi > lo) || !std::isfinite(hi))
                throw ConfigError("jump spec: uniform bounds need 0 <= lo < hi");
            return;
        case Kind::Table: {
            if (values.size() == 0)
                throw ConfigError("jump spec: empty table");
            if (values.size() != probs.size())
                throw ConfigError("jump spec: table values/probs length mismatch");
            double total = 0.0;
            for (Eigen::Index i = 0; i < values.size(); ++i) {
                if (!(values[i] >= 0.0) || !std::isfinite(values[i]))
                    throw ConfigError("jump spec: table values must be finite and >= 0");
                if (!(probs[i] >= 0.0))
                    throw ConfigError("jump spec: table probabilities must be >= 0");
                total += probs[i];
            }
            if (std::abs(total - 1.0) > 1e-9)
                throw ConfigError("jump spec: table probabilities must sum to 1");
            return;
        }
    }
    throw ConfigError("jump spec: unknown kind");
}

double JumpSpec::max_support() const {
    switch (kind) {
        case Kind::Constant: return value;
        case Kind::Uniform: return hi;
        case Kind::Table: return values.size() ? values.maxCoeff() : 0.0;
    }
    return 0.0;
}

double JumpSpec::mean() const {
    switch (kind) {
        case Kind::Constant: return value;
        case Kind::Uniform: return 0.5 * (lo + hi);
        case Kind::Table: return values.dot(probs);
    }
    return 0.0;
}

double JumpSpec::tail_prob(double x) const {
    switch (kind) {
        case Kind::Constant: return value > x ? 1.0 : 0.0;
        case Kind::Uniform:
            if (x <= lo) return 1.0;
            if (x >= hi) return 0.0;
            return (hi - x) / (hi - lo);
        case Kind::Table: {
            double p = 0.0;
            for (Eigen::Index i = 0; i < values.size(); ++i)
                if (values[i] > x) p += probs[i];
            return p;
        }
    }
    return 0.0;
}

double JumpSpec::sample(Rng& rng) const {
    switch (kind) {
        case Kind::Constant: return value;
        case Kind::Uniform: return lo + (hi - lo) * rng.uniform01();
        case Kind::Table: {
            double u = rng.uniform01();
            double acc = 0.0;
            for (Eigen::Index i = 0; i < values.size(); ++i) {
                acc += probs[i];
                if (u < acc) return values[i];
            }
            return values[values.size() - 1];
        }
    }
    return value;
}

JumpSpec JumpSpec::scaled(double factor) const {
    JumpSpec s = *this;
    switch (kind) {
        case Kind::Constant: s.value *= factor; break;
        case Kind::Uniform: s.lo *= factor; s.hi *= factor; break;
        case Kind::Table: s.values *= factor; break;
    }
    return s;
}

void MarketParams::validate() const {
    if (!(lambda_i >= 0.0) || !(lambda_pr >= 0.0) || !(lambda_pb >= 0.0))
        throw ConfigError("market params: arrival rates must be >= 0");
    if (!(fee >= 0.0)) throw ConfigError("market params: fee must be >= 0");
    if (!(setup_cost >= 0.0)) throw ConfigError("market params: setup cost must be >= 0");
    if (r < 2) throw ConfigError("market params: need at least two arbitrageurs");
    if (Q < 1) throw ConfigError("market params: book depth Q must be >= 1");
    if (!(interval > 0.0)) throw ConfigError("market params: batch interval must be > 0");
    if (size_pmf.size() != Q)
        throw ConfigError("market params: size_pmf must have exactly Q entries");
    double total = 0.0;
    for (Eigen::Index j = 0; j < size_pmf.size(); ++j) {
        if (!(size_pmf[j] >= 0.0))
            throw ConfigError("market params: size_pmf entries must be >= 0");
        total += size_pmf[j];
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw ConfigError("market params: size_pmf must sum to 1");
    jump.validate();
}

double MarketParams::size_tail(int k) const {
    if (k < 1) return 1.0;
    if (k > Q) return 0.0;
    double p = 0.0;
    for (Eigen::Index j = k - 1; j < size_pmf.size(); ++j) p += size_pmf[j];
    return p;
}

double MarketParams::mean_size() const {
    double m = 0.0;
    for (Eigen::Index j = 0; j < size_pmf.size(); ++j)
        m += static_cast<double>(j + 1) * size_pmf[j];
    return m;
}

int MarketParams::sample_size(Rng& rng) const {
    double u = rng.uniform01();
    double acc = 0.0;
    for (Eigen::Index j = 0; j < size_pmf.size(); ++j) {
        acc += size_pmf[j];
        if (u < acc) return static_cast<int>(j) + 1;
    }
    return Q;
}

double jbar(const JumpSpec& jump, double half_spread) {
    jump.validate();
    if (!(half_spread >= 0.0))
        throw ConfigError("jbar: half-spread must be >= 0");
    const double x = half_spread;
    switch (jump.kind) {
        case JumpSpec::Kind::Constant:
            return jump.value > x ? jump.value - x : 0.0;
        case JumpSpec::Kind::Uniform: {
            const double lo = jump.lo, hi = jump.hi;
            if (x >= hi) return 0.0;
            if (x <= lo) return 0.5 * (lo + hi) - x;
            const double w = hi - x;
            return 0.5 * w * w / (hi - lo);
        }
        case JumpSpec::Kind::Table: {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < jump.values.size(); ++i)
                if (jump.values[i] > x) acc += jump.probs[i] * (jump.values[i] - x);
            return acc;
        }
    }
    return 0.0;
}

double jtilde(const JumpSpec& jump, double half_spread) {
    jump.validate();
    if (!(half_spread >= 0.0))
        throw ConfigError("jtilde: half-spread must be >= 0");
    const double x = half_spread;
    switch (jump.kind) {
        case JumpSpec::Kind::Constant:
            return jump.value > x ? jump.value : 0.0;
        case JumpSpec::Kind::Uniform: {
            const double lo = jump.lo, hi = jump.hi;
            if (x >= hi) return 0.0;
            if (x <= lo) return 0.5 * (lo + hi);
            return 0.5 * (hi * hi - x * x) / (hi - lo);
        }
        case JumpSpec::Kind::Table: {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < jump.values.size(); ++i)
                if (jump.values[i] > x) acc += jump.probs[i] * jump.values[i];
            return acc;
        }
    }
    return 0.0;
}

double price_impact(double lambda_pr, double lambda_i, double jtilde_k) {
    if (lambda_pr < 0.0 || lambda_i < 0.0)
        throw ConfigError("price_impact: rates must be >= 0");
    if (lambda_pr + lambda_i <= 0.0)
        throw ConfigError("price_impact: lambda_pr + lambda_i must be > 0");
    return jtilde_k * lambda_pr / (lambda_pr + lambda_i);
}

ExcessDemandModel ExcessDemandModel::skellam(double mu_buy, double mu_sell, int Q) {
    ExcessDemandModel m;
    m.kind = Kind::Skellam;
    m.mu_buy = mu_buy;
    m.mu_sell = mu_sell;
    m.Q = Q;
    return m;
}

ExcessDemandModel ExcessDemandModel::explicit_pmf_model(VectorXd pmf, int Q) {
    ExcessDemandModel m;
    m.kind = Kind::Explicit;
    m.explicit_pmf = std::move(pmf);
    m.Q = Q;
    return m;
}

ExcessDemandModel ExcessDemandModel::from_params(const MarketParams& params) {
    const double mu = (params.lambda_i + params.lambda_pr) * params.interval / 2.0;
    return skellam(mu, mu, params.Q);
}

void ExcessDemandModel::validate() const {
    if (Q < 1) throw ConfigError("excess demand: Q must be >= 1");
    if (kind == Kind::Skellam) {
        if (!(mu_buy >= 0.0) || !(mu_sell >= 0.0))
            throw ConfigError("excess demand: Poisson intensities must be >= 0");
        return;
    }
    if (explicit_pmf.size() != 2 * Q + 3)
        throw ConfigError("excess demand: explicit pmf needs 2Q+3 entries");
    double total = 0.0;
    for (Eigen::Index i = 0; i < explicit_pmf.size(); ++i) {
        if (!(explicit_pmf[i] >= 0.0))
            throw ConfigError("excess demand: explicit pmf entries must be >= 0");
        total += explicit_pmf[i];
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw ConfigError("excess demand: explicit pmf must sum to 1");
}

namespace {

// log of the two-sided Poisson product term at inner index j:
//   exp(-mb - ms) * mb^(j+k) / (j+k)! * ms^j / j!     (k >= 0)
double log_series_term(double mb, double ms, int k, long j) {
    return -mb - ms + (j + k) * std::log(mb) - std::lgamma(static_cast<double>(j + k) + 1.0) +
           j * std::log(ms) - std::lgamma(static_cast<double>(j) + 1.0);
}

}  // namespace

double skellam_pmf(double mu_buy, double mu_sell, int k) {
    if (mu_buy < 0.0 || mu_sell < 0.0)
        throw ConfigError("skellam_pmf: intensities must be >= 0");
    if (k < 0) return skellam_pmf(mu_sell, mu_buy, -k);

    // Degenerate one-sided cases reduce to plain Poisson masses.
    if (mu_sell == 0.0) {
        if (mu_buy == 0.0) return k == 0 ? 1.0 : 0.0;
        return std::exp(-mu_buy + k * std::log(mu_buy) - std::lgamma(k + 1.0));
    }
    if (mu_buy == 0.0) return k == 0 ? std::exp(-mu_sell) : 0.0;

    // The term sequence in j is unimodal; start at the mode and expand both
    // ways until additional terms are negligible relative to the peak.
    const double disc = std::sqrt(0.25 * k * k + mu_buy * mu_sell);
    long j_mode = static_cast<long>(std::floor(-0.5 * k + disc));
    if (j_mode < 0) j_mode = 0;

    const double log_peak = log_series_term(mu_buy, mu_sell, k, j_mode);
    constexpr double kCut = -45.0;  // exp(-45) ~ 3e-20 relative contribution
    constexpr long kMaxTerms = 2000000;

    double sum = 0.0;
    long terms = 0;
    for (long j = j_mode; ; ++j) {
        const double lt = log_series_term(mu_buy, mu_sell, k, j) - log_peak;
        if (lt < kCut) break;
        sum += std::exp(lt);
        if (++terms > kMaxTerms)
            throw NumericError("skellam_pmf: series did not converge");
    }
    for (long j = j_mode - 1; j >= 0; --j) {
        const double lt = log_series_term(mu_buy, mu_sell, k, j) - log_peak;
        if (lt < kCut) break;
        sum += std::exp(lt);
        if (++terms > kMaxTerms)
            throw NumericError("skellam_pmf: series did not converge");
    }
    return std::exp(log_peak) * sum;
}

VectorXd excess_demand_pmf(const ExcessDemandModel& model) {
    model.validate();
    const int Q = model.Q;
    VectorXd pmf(2 * Q + 3);
    if (model.kind == ExcessDemandModel::Kind::Explicit) {
        pmf = model.explicit_pmf;
        return pmf;
    }
    for (int k = -(Q + 1); k <= Q + 1; ++k)
        pmf[k + Q + 1] = skellam_pmf(model.mu_buy, model.mu_sell, k);
    const double total = pmf.sum();
    if (!(total > 0.0))
        throw NumericError("excess_demand_pmf: truncated mass is zero");
    return pmf / total;
}

VectorXd positive_demand_q(const ExcessDemandModel& model) {
    const VectorXd pmf = excess_demand_pmf(model);
    const int Q = model.Q;
    VectorXd q(Q + 1);
    for (int k = 1; k <= Q + 1; ++k) q[k - 1] = pmf[k + Q + 1];
    return q;
}

}  // namespace dexsim
