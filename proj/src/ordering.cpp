#include "dexsim/ordering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

namespace dexsim {

void OrderingConfig::validate() const {
    if (n < 2) throw ConfigError("ordering: need at least two validators");
    if (f < 0) throw ConfigError("ordering: f must be >= 0");
    if (kappa < 1) throw ConfigError("ordering: kappa must be >= 1");
    if (honest_relay_only && n - f - 1 < 1)
        throw ConfigError("ordering: honest relay set is empty");
}

LatencySpec LatencySpec::normal(double mean, double variance) {
    LatencySpec s;
    s.kind = Kind::Normal;
    s.a = mean;
    s.b = variance;
    return s;
}

LatencySpec LatencySpec::exponential(double rate) {
    LatencySpec s;
    s.kind = Kind::Exponential;
    s.a = rate;
    return s;
}

LatencySpec LatencySpec::constant(double value) {
    LatencySpec s;
    s.kind = Kind::Constant;
    s.a = value;
    return s;
}

LatencySpec LatencySpec::parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string name = text.substr(0, colon);
    std::vector<double> args;
    if (colon != std::string::npos) {
        std::stringstream ss(text.substr(colon + 1));
        std::string piece;
        while (std::getline(ss, piece, ',')) {
            try {
                std::size_t used = 0;
                const double v = std::stod(piece, &used);
                if (used != piece.size()) throw std::invalid_argument(piece);
                args.push_back(v);
            } catch (const std::exception&) {
                throw ConfigError("latency spec: bad numeric argument in '" + text + "'");
            }
        }
    }
    LatencySpec s;
    if (name == "normal") {
        if (args.size() != 2) throw ConfigError("latency spec: normal needs mean,variance");
        s = normal(args[0], args[1]);
    } else if (name == "exponential") {
        if (args.size() != 1) throw ConfigError("latency spec: exponential needs rate");
        s = exponential(args[0]);
    } else if (name == "constant") {
        if (args.size() != 1) throw ConfigError("latency spec: constant needs value");
        s = constant(args[0]);
    } else {
        throw ConfigError("latency spec: unknown family '" + name + "'");
    }
    s.validate();
    return s;
}

void LatencySpec::validate() const {
    switch (kind) {
        case Kind::Normal:
            if (!(b >= 0.0) || !std::isfinite(a) || !std::isfinite(b))
                throw ConfigError("latency spec: normal needs finite mean and variance >= 0");
            return;
        case Kind::Exponential:
            if (!(a > 0.0)) throw ConfigError("latency spec: exponential rate must be > 0");
            return;
        case Kind::Constant:
            if (!std::isfinite(a)) throw ConfigError("latency spec: constant must be finite");
            return;
    }
    throw ConfigError("latency spec: unknown kind");
}

double LatencySpec::sample(Rng& rng) const {
    switch (kind) {
        case Kind::Normal: return rng.normal(a, b);
        case Kind::Exponential: return rng.exponential(a);
        case Kind::Constant: return a;
    }
    return 0.0;
}

std::string LatencySpec::describe() const {
    std::ostringstream out;
    switch (kind) {
        case Kind::Normal: out << "normal:" << a << "," << b; break;
        case Kind::Exponential: out << "exponential:" << a; break;
        case Kind::Constant: out << "constant:" << a; break;
    }
    return out.str();
}

void LatencyModel::validate() const {
    validator_link.validate();
    user_link.validate();
    arb_link.validate();
}

double tie_cdf_at_zero(const LatencyModel& model) {
    model.validate();
    // D = X - Y for i.i.d. X, Y: P[D < 0] = P[D > 0], so with ties at weight
    // 1/2 the value is exactly 1/2 for every supported family. The case split
    // documents why rather than computing a convolution numerically.
    switch (model.validator_link.kind) {
        case LatencySpec::Kind::Normal:       // symmetric difference N(0, 2v)
        case LatencySpec::Kind::Exponential:  // symmetric Laplace difference
        case LatencySpec::Kind::Constant:     // certain tie, counted at 1/2
            return 0.5;
    }
    throw ConfigError("tie_cdf_at_zero: unknown latency kind");
}

double success_probability_analytic(const OrderingConfig& cfg, double cdf0) {
    cfg.validate();
    if (!(cdf0 >= 0.0 && cdf0 <= 1.0))
        throw ConfigError("success probability: cdf0 must lie in [0,1]");

    const int U = cfg.race_size();
    const long lower = 2L * cfg.f + cfg.kappa - 1;
    if (lower > U) return 1.0;  // empty sum

    // Degenerate race probabilities.
    if (cdf0 == 1.0) return 0.0;                      // only s = U contributes
    if (cdf0 == 0.0) return lower <= 0 ? 0.0 : 1.0;   // only s = 0 contributes

    const double log_c = std::log(cdf0);
    const double log_1c = std::log1p(-cdf0);
    const double lg_n1 = std::lgamma(static_cast<double>(U) + 1.0);

    // Stream the tail in log space against its running maximum.
    double max_log = -std::numeric_limits<double>::infinity();
    std::vector<double> logs;
    logs.reserve(static_cast<std::size_t>(U - std::max(lower, 0L) + 1));
    for (long s = std::max(lower, 0L); s <= U; ++s) {
        const double lt = lg_n1 - std::lgamma(static_cast<double>(s) + 1.0) -
                          std::lgamma(static_cast<double>(U - s) + 1.0) +
                          s * log_c + (U - s) * log_1c;
        logs.push_back(lt);
        max_log = std::max(max_log, lt);
    }
    double tail = 0.0;
    for (const double lt : logs) tail += std::exp(lt - max_log);
    tail *= std::exp(max_log);
    tail = std::min(tail, 1.0);
    return 1.0 - tail;
}

McEstimate success_probability_mc(const OrderingConfig& cfg, const LatencyModel& model,
                                  long trials, std::uint64_t seed) {
    cfg.validate();
    model.validate();
    if (trials <= 0) throw ConfigError("success probability mc: trials must be > 0");

    const int U = cfg.race_size();
    const double need = 2.0 * cfg.f + cfg.kappa - 1;
    Rng rng(seed);

    long successes = 0;
    for (long t = 0; t < trials; ++t) {
        // Worst case: the front-runner observes the victim message the moment
        // it reaches its entry validator and injects immediately; both
        // messages then disseminate in parallel.
        double victim_leads = 0.0;
        for (int v = 0; v < U; ++v) {
            const double dv = model.validator_link.sample(rng);
            const double da = model.arb_link.sample(rng);
            if (dv < da) victim_leads += 1.0;
            else if (dv == da) victim_leads += 0.5;
        }
        if (victim_leads < need) ++successes;
    }

    McEstimate est;
    est.trials = trials;
    est.p = static_cast<double>(successes) / static_cast<double>(trials);
    est.std_error = std::sqrt(est.p * (1.0 - est.p) / static_cast<double>(trials));
    return est;
}

void BroadcastProfile::validate() const {
    if (b.rows() != b.cols()) throw ConfigError("broadcast profile: matrix must be square");
    if ((b.array() < 0).any()) throw ConfigError("broadcast profile: counts must be >= 0");
}

BroadcastProfile broadcast_counts(const std::vector<ReceiptMessage>& messages) {
    const int m = static_cast<int>(messages.size());
    std::size_t n_validators = 0;
    for (const auto& msg : messages) n_validators = std::max(n_validators, msg.receipts.size());

    BroadcastProfile profile;
    profile.b = Eigen::MatrixXi::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            int count = 0;
            for (std::size_t v = 0; v < n_validators; ++v) {
                const double ri = v < messages[i].receipts.size() ? messages[i].receipts[v]
                                                                  : std::numeric_limits<double>::quiet_NaN();
                const double rj = v < messages[j].receipts.size() ? messages[j].receipts[v]
                                                                  : std::numeric_limits<double>::quiet_NaN();
                const bool has_i = !std::isnan(ri);
                const bool has_j = !std::isnan(rj);
                // A validator counts toward b(i,j) when it saw i strictly
                // first, or saw only i. Exact ties count toward neither.
                if (has_i && has_j) {
                    if (ri < rj) ++count;
                } else if (has_i) {
                    ++count;
                }
            }
            profile.b(i, j) = count;
        }
    }
    return profile;
}

std::vector<std::pair<int, int>> fairness_constraints(const BroadcastProfile& profile,
                                                      int f, int kappa) {
    profile.validate();
    if (f < 0 || kappa < 1) throw ConfigError("fairness constraints: need f >= 0, kappa >= 1");
    const int m = static_cast<int>(profile.b.rows());
    std::vector<std::pair<int, int>> constraints;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (i != j && profile.b(i, j) > profile.b(j, i) + 2 * f + kappa)
                constraints.emplace_back(i, j);
    return constraints;
}

namespace {

// Iterative Tarjan condensation; returns component id per node, ids numbered
// in reverse topological order of discovery.
std::vector<int> strongly_connected_components(int n,
                                               const std::vector<std::vector<int>>& adj,
                                               int& component_count) {
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<bool> on_stack(n, false);
    std::vector<int> stack;
    int next_index = 0;
    component_count = 0;

    struct Frame {
        int node;
        std::size_t edge;
    };
    for (int root = 0; root < n; ++root) {
        if (index[root] != -1) continue;
        std::vector<Frame> frames{{root, 0}};
        index[root] = low[root] = next_index++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!frames.empty()) {
            Frame& fr = frames.back();
            if (fr.edge < adj[fr.node].size()) {
                const int next = adj[fr.node][fr.edge++];
                if (index[next] == -1) {
                    index[next] = low[next] = next_index++;
                    stack.push_back(next);
                    on_stack[next] = true;
                    frames.push_back({next, 0});
                } else if (on_stack[next]) {
                    low[fr.node] = std::min(low[fr.node], index[next]);
                }
            } else {
                if (low[fr.node] == index[fr.node]) {
                    for (;;) {
                        const int w = stack.back();
                        stack.pop_back();
                        on_stack[w] = false;
                        comp[w] = component_count;
                        if (w == fr.node) break;
                    }
                    ++component_count;
                }
                const int done = fr.node;
                frames.pop_back();
                if (!frames.empty())
                    low[frames.back().node] = std::min(low[frames.back().node], low[done]);
            }
        }
    }
    return comp;
}

struct Condensation {
    std::vector<int> comp;                      // node -> component
    int count = 0;
    std::vector<std::vector<int>> members;      // component -> nodes
    std::vector<std::vector<int>> edges;        // component DAG
    std::vector<int> indegree;
};

Condensation condense(const std::vector<ReceiptMessage>& messages, const OrderingConfig& cfg) {
    const int m = static_cast<int>(messages.size());
    const auto profile = broadcast_counts(messages);
    const auto constraints = fairness_constraints(profile, cfg.f, cfg.kappa);

    std::vector<std::vector<int>> adj(m);
    for (const auto& [a, b] : constraints) adj[a].push_back(b);

    Condensation c;
    c.comp = strongly_connected_components(m, adj, c.count);
    c.members.resize(c.count);
    for (int v = 0; v < m; ++v) c.members[c.comp[v]].push_back(v);

    c.edges.resize(c.count);
    c.indegree.assign(c.count, 0);
    std::vector<std::pair<int, int>> seen;
    for (const auto& [a, b] : constraints) {
        const int ca = c.comp[a], cb = c.comp[b];
        if (ca == cb) continue;
        if (std::find(seen.begin(), seen.end(), std::make_pair(ca, cb)) != seen.end()) continue;
        seen.emplace_back(ca, cb);
        c.edges[ca].push_back(cb);
        ++c.indegree[cb];
    }
    return c;
}

}  // namespace

std::vector<int> fair_order_components(const std::vector<ReceiptMessage>& messages,
                                       const OrderingConfig& cfg) {
    cfg.validate();
    return condense(messages, cfg).comp;
}

std::vector<std::size_t> fair_order(const std::vector<ReceiptMessage>& messages,
                                    const OrderingConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    for (const auto& msg : messages)
        if (msg.receipts.empty())
            throw ConfigError("fair_order: every message needs at least one receipt");

    Condensation c = condense(messages, cfg);

    // Kahn's algorithm over the component DAG. Among ready components the
    // deterministic pick is highest member fee first, then smallest member id.
    auto comp_key = [&](int comp) {
        double best_fee = -std::numeric_limits<double>::infinity();
        std::int64_t min_id = std::numeric_limits<std::int64_t>::max();
        for (const int v : c.members[comp]) {
            best_fee = std::max(best_fee, messages[v].fee);
            min_id = std::min(min_id, messages[v].id);
        }
        return std::make_pair(-best_fee, min_id);
    };
    auto cmp = [&](int lhs, int rhs) { return comp_key(lhs) > comp_key(rhs); };
    std::priority_queue<int, std::vector<int>, decltype(cmp)> ready(cmp);
    for (int k = 0; k < c.count; ++k)
        if (c.indegree[k] == 0) ready.push(k);

    Rng rng(Rng::mix(seed, 0x0fa1u));
    std::vector<std::size_t> order;
    order.reserve(messages.size());
    int emitted = 0;
    while (!ready.empty()) {
        const int comp = ready.top();
        ready.pop();
        ++emitted;

        // Within a component: seeded shuffle, then stable sort by descending
        // fee, which leaves equal-fee groups uniformly permuted.
        std::vector<int> group = c.members[comp];
        for (std::size_t i = group.size(); i > 1; --i)
            std::swap(group[i - 1], group[rng.below(i)]);
        std::stable_sort(group.begin(), group.end(), [&](int lhs, int rhs) {
            return messages[lhs].fee > messages[rhs].fee;
        });
        for (const int v : group) order.push_back(static_cast<std::size_t>(v));

        for (const int next : c.edges[comp])
            if (--c.indegree[next] == 0) ready.push(next);
    }
    if (emitted != c.count)
        throw NumericError("fair_order: component graph was not acyclic");
    return order;
}

}  // namespace dexsim
