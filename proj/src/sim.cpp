#include "dexsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>
#include <unordered_map>

namespace dexsim {

namespace {

enum Bucket : int { kInvestor = 0, kInformed, kMm, kFr, kOtherArb, kSink, kBucketCount };

OwnerClass bucket_owner(int bucket) {
    switch (bucket) {
        case kInvestor: return OwnerClass::Investor;
        case kInformed: return OwnerClass::Trader;
        default: return OwnerClass::Arbitrageur;
    }
}

// Cash is tracked in integer half-ticks so transfers cancel exactly; fee legs
// are mirrored against a sink bucket. Valuation profits settle each trade at
// the two sides' reference values.
struct Ledger {
    std::int64_t cash2[kBucketCount] = {};
    double fees[kBucketCount] = {};
    double profit[kBucketCount] = {};

    void settle(int buyer, double buyer_value, int seller, double seller_value,
                std::int64_t price2, double price_real, std::int64_t qty) {
        cash2[buyer] -= price2 * qty;
        cash2[seller] += price2 * qty;
        const double q = static_cast<double>(qty);
        profit[buyer] += (buyer_value - price_real) * q;
        profit[seller] += (price_real - seller_value) * q;
    }

    void pay_fee(int payer, double amount) {
        fees[payer] -= amount;
        fees[kSink] += amount;
    }

    double gap(double tick) const {
        std::int64_t cash = 0;
        for (int b = 0; b < kBucketCount; ++b) cash += cash2[b];
        double fee_net = 0.0;
        for (int b = 0; b < kBucketCount; ++b) fee_net += fees[b];
        return std::abs(static_cast<double>(cash)) * tick / 2.0 + std::abs(fee_net);
    }
};

std::int64_t to_ticks(double price, double tick) {
    return std::llround(price / tick);
}

// Quotes for the side an incoming order will hit: unit depth at each level,
// asks for a buyer (direction +1), bids for a seller.
Book quote_one_side(const VectorXd& half_spreads, double center, int direction,
                    double tick, std::int64_t& next_id, std::int64_t& next_seq) {
    Book book;
    for (Eigen::Index k = 0; k < half_spreads.size(); ++k) {
        Book::Resting r;
        r.id = next_id++;
        r.side = direction > 0 ? Side::Sell : Side::Buy;
        r.price = to_ticks(center + direction * half_spreads[k], tick);
        r.qty = 1;
        r.fee = 0.0;
        r.seq = next_seq++;
        r.owner = OwnerClass::Arbitrageur;
        book.insert(r);
    }
    return book;
}

void log_trades(SimLog* log, double t, EventType event, OwnerClass actor,
                const std::vector<Trade>& trades, double tick) {
    if (!log) return;
    for (const Trade& tr : trades)
        log->trades.push_back({t, event, tr.taker_is_buy ? Side::Buy : Side::Sell,
                               tr.price * tick, static_cast<int>(tr.qty), actor});
}

void log_event(SimLog* log, double t, EventType type, int direction, double jump,
               double p_before, double p_after, double v_after, int winner, int units) {
    if (!log) return;
    log->events.push_back({t, type, direction, jump, p_before, p_after, v_after, winner, units});
}

SimStats finalize(const SimConfig& config, const Ledger& led, SimStats st, double horizon) {
    st.horizon = horizon;
    st.investor_profit = led.profit[kInvestor];
    st.informed_profit = led.profit[kInformed];
    st.mm_profit = led.profit[kMm];
    st.fr_profit = led.profit[kFr] + led.fees[kFr];
    st.other_arb_profit = led.profit[kOtherArb];
    st.fees_paid = led.fees[kSink];
    st.accounting_gap = led.gap(config.tick);
    return st;
}

SimStats run_clob(const SimConfig& config, const ClobEquilibrium& eq, SimLog* log) {
    const MarketParams& mp = config.params;
    const double tick = config.tick;
    const double ps = config.pstar();
    const int Q = mp.Q;
    const double top_half_spread =
        eq.half_spreads.size() > 0 ? eq.half_spreads.maxCoeff() : 0.0;

    VectorXd crowd_win(Q);
    for (int k = 0; k < Q; ++k)
        crowd_win[k] = 1.0 / (1.0 + eq.g[k] * static_cast<double>(mp.r - 2));

    Rng rng(config.seed);
    Ledger led;
    SimStats st;
    double P = config.initial_price;
    double V = P;
    double t = 0.0;
    std::int64_t next_id = 1;
    std::int64_t next_seq = 1;
    const ArrivalRates rates{mp.lambda_i, mp.lambda_pr, mp.lambda_pb};

    // Far enough to cross the whole ladder regardless of rounding.
    const double reach = top_half_spread + mp.jump.max_support() + 1.0;

    while (true) {
        NextEvent ev = next_event(rates, rng);
        if (!std::isfinite(ev.elapsed)) break;
        t += ev.elapsed;
        if (t > config.horizon) break;

        const int d = rng.bernoulli(0.5) ? 1 : -1;
        const double p_before = P;
        const Side victim_side = d > 0 ? Side::Buy : Side::Sell;

        switch (ev.type) {
            case EventType::Investor: {
                ++st.events_investor;
                const int m = mp.sample_size(rng);
                Book book = quote_one_side(eq.half_spreads, P, d, tick, next_id, next_seq);
                Order o;
                o.id = next_id++;
                o.side = victim_side;
                o.price = to_ticks(P + d * reach, tick);
                o.qty = m;
                o.kind = OrderKind::Ioc;
                o.seq = next_seq++;
                o.owner = OwnerClass::Investor;
                const auto trades = clob_apply(book, o);

                const double value = p_before;
                for (const Trade& tr : trades) {
                    const double px = tr.price * tick;
                    const int buyer = tr.taker_is_buy ? kInvestor : kMm;
                    const int seller = tr.taker_is_buy ? kMm : kInvestor;
                    led.settle(buyer, value, seller, value,
                               2 * static_cast<std::int64_t>(tr.price), px, tr.qty);
                    ++st.trade_count;
                }
                if (!trades.empty())
                    st.markup_paid += d * (trades.front().price * tick - value);
                log_trades(log, t, ev.type, OwnerClass::Investor, trades, tick);

                for (int k = 0; k < Q; ++k) {
                    if (rng.uniform01() >= eq.g[k]) continue;
                    led.pay_fee(kFr, mp.fee);
                    ++st.races_attempted;
                    if (rng.bernoulli(ps)) ++st.races_won;
                }

                if (!trades.empty()) P += d * eq.delta;
                log_event(log, t, ev.type, d, 0.0, p_before, P, V, -1,
                          static_cast<int>(trades.size()));
                break;
            }
            case EventType::Private: {
                ++st.events_private;
                const double J = mp.jump.sample(rng);
                V += d * J;
                const double value = p_before + d * J;
                Book book = quote_one_side(eq.half_spreads, P, d, tick, next_id, next_seq);
                Order o;
                o.id = next_id++;
                o.side = victim_side;
                o.price = to_ticks(value, tick);
                o.qty = Q;
                o.kind = OrderKind::Ioc;
                o.seq = next_seq++;
                o.owner = OwnerClass::Trader;
                const auto trades = clob_apply(book, o);

                for (const Trade& tr : trades) {
                    const double px = tr.price * tick;
                    const int buyer = tr.taker_is_buy ? kInformed : kMm;
                    const int seller = tr.taker_is_buy ? kMm : kInformed;
                    led.settle(buyer, value, seller, value,
                               2 * static_cast<std::int64_t>(tr.price), px, tr.qty);
                    ++st.trade_count;
                }
                if (!trades.empty())
                    st.markup_paid += d * (trades.front().price * tick - value);
                log_trades(log, t, ev.type, OwnerClass::Trader, trades, tick);

                const int filled = static_cast<int>(trades.size());
                for (int k = 0; k < Q; ++k) {
                    if (rng.uniform01() >= eq.g[k]) continue;
                    led.pay_fee(kFr, mp.fee);
                    ++st.races_attempted;
                    const bool race_won = rng.bernoulli(ps);
                    if (race_won) ++st.races_won;
                    if (race_won && k < filled && rng.bernoulli(crowd_win[k])) {
                        const double gain = d * (value - trades[k].price * tick);
                        led.profit[kInformed] -= gain;
                        led.profit[kFr] += gain;
                        ++st.frontruns_succeeded;
                    }
                }

                if (!trades.empty()) P += d * eq.delta;
                log_event(log, t, ev.type, d, J, p_before, P, V, -1, filled);
                break;
            }
            case EventType::Public: {
                ++st.events_public;
                const double J = mp.jump.sample(rng);
                V += d * J;
                const double value = p_before + d * J;
                const int winner = static_cast<int>(rng.below(static_cast<std::uint64_t>(mp.r)));
                int units = 0;
                if (winner != 0) {
                    Book book = quote_one_side(eq.half_spreads, P, d, tick, next_id, next_seq);
                    Order o;
                    o.id = next_id++;
                    o.side = victim_side;
                    o.price = to_ticks(value, tick);
                    o.qty = Q;
                    o.kind = OrderKind::Ioc;
                    o.seq = next_seq++;
                    o.owner = OwnerClass::Arbitrageur;
                    const auto trades = clob_apply(book, o);
                    const int sniper = winner == 1 ? kFr : kOtherArb;
                    for (const Trade& tr : trades) {
                        const double px = tr.price * tick;
                        const int buyer = tr.taker_is_buy ? sniper : kMm;
                        const int seller = tr.taker_is_buy ? kMm : sniper;
                        led.settle(buyer, value, seller, value,
                                   2 * static_cast<std::int64_t>(tr.price), px, tr.qty);
                        ++st.trade_count;
                    }
                    units = static_cast<int>(trades.size());
                    log_trades(log, t, ev.type, OwnerClass::Arbitrageur, trades, tick);
                }
                P = V;
                log_event(log, t, ev.type, d, J, p_before, P, V, winner, units);
                break;
            }
            case EventType::Null:
                break;
        }
    }

    st.arb_welfare_loss = mp.r * mp.setup_cost + led.fees[kSink];
    return finalize(config, led, st, config.horizon);
}

SimStats run_fba(const SimConfig& config, const FbaEquilibrium& eq, SimLog* log) {
    const MarketParams& mp = config.params;
    const double tick = config.tick;
    const double B = config.batch_length();
    const auto n_batches = static_cast<std::int64_t>(std::floor(config.horizon / B + 1e-12));

    const Eigen::Index levels = eq.markups.size();
    VectorXd schedule(levels);
    for (Eigen::Index k = 0; k < levels; ++k) schedule[k] = eq.deltas[k] + eq.markups[k];
    const double far = schedule.maxCoeff() + 2.0 * tick;

    Rng rng(config.seed);
    Ledger led;
    SimStats st;
    double P = config.initial_price;
    double V = P;
    std::int64_t next_id = 1;
    std::int64_t next_seq = 1;
    const ArrivalRates rates{mp.lambda_i, mp.lambda_pr, mp.lambda_pb};

    struct Meta {
        int bucket;
        double value;
        EventType origin;
    };

    for (std::int64_t b = 0; b < n_batches; ++b) {
        const double t0 = b * B;
        const double p_anchor = P;
        std::vector<Order> batch;
        std::unordered_map<std::int64_t, Meta> meta;
        std::int64_t net_units = 0;
        double t_local = 0.0;

        while (true) {
            NextEvent ev = next_event(rates, rng);
            if (!std::isfinite(ev.elapsed)) break;
            t_local += ev.elapsed;
            if (t_local >= B) break;
            const double t = t0 + t_local;
            const int d = rng.bernoulli(0.5) ? 1 : -1;
            const double p_before = P;

            switch (ev.type) {
                case EventType::Investor: {
                    ++st.events_investor;
                    const int m = mp.sample_size(rng);
                    Order o;
                    o.id = next_id++;
                    o.side = d > 0 ? Side::Buy : Side::Sell;
                    o.price = to_ticks(p_anchor + d * far, tick);
                    o.qty = m;
                    o.kind = OrderKind::Ioc;
                    o.seq = next_seq++;
                    o.owner = OwnerClass::Investor;
                    batch.push_back(o);
                    meta[o.id] = {kInvestor, p_before, ev.type};
                    net_units += d * m;
                    log_event(log, t, ev.type, d, 0.0, p_before, P, V, -1, m);
                    break;
                }
                case EventType::Private: {
                    ++st.events_private;
                    const double J = mp.jump.sample(rng);
                    V += d * J;
                    const double value = p_before + d * J;
                    Order o;
                    o.id = next_id++;
                    o.side = d > 0 ? Side::Buy : Side::Sell;
                    o.price = to_ticks(value, tick);
                    o.qty = 1;
                    o.kind = OrderKind::Ioc;
                    o.seq = next_seq++;
                    o.owner = OwnerClass::Trader;
                    batch.push_back(o);
                    meta[o.id] = {kInformed, value, ev.type};
                    net_units += d;
                    log_event(log, t, ev.type, d, J, p_before, P, V, -1, 1);
                    break;
                }
                case EventType::Public: {
                    ++st.events_public;
                    const double J = mp.jump.sample(rng);
                    V += d * J;
                    P = V;
                    log_event(log, t, ev.type, d, J, p_before, P, V, -1, 0);
                    break;
                }
                case EventType::Null:
                    break;
            }
        }

        const double t_end = t0 + B;
        const std::int64_t z = net_units < 0 ? -net_units : net_units;
        const int d_net = net_units > 0 ? 1 : (net_units < 0 ? -1 : 0);
        Book book;
        std::int64_t mm_id = 0;
        Eigen::Index level_idx = 0;
        if (z > 0) {
            level_idx = std::min<std::int64_t>(z, levels) - 1;
            const std::int64_t mm_px =
                to_ticks(p_anchor + d_net * schedule[level_idx], tick);
            Book::Resting mm;
            mm.id = next_id++;
            mm.side = d_net > 0 ? Side::Sell : Side::Buy;
            mm.price = mm_px;
            mm.qty = level_idx + 1;
            mm.fee = 0.0;
            mm.seq = next_seq++;
            mm.owner = OwnerClass::Arbitrageur;
            book.insert(mm);
            mm_id = mm.id;
            Book::Resting pin;
            pin.id = next_id++;
            pin.side = d_net > 0 ? Side::Buy : Side::Sell;
            pin.price = mm_px - d_net;
            pin.qty = 1;
            pin.fee = 0.0;
            pin.seq = next_seq++;
            pin.owner = OwnerClass::Arbitrageur;
            book.insert(pin);
        } else if (!batch.empty()) {
            const std::int64_t center = to_ticks(p_anchor, tick);
            Book::Resting bid{next_id++, Side::Buy, center - 1, 1, 0.0, next_seq++,
                              OwnerClass::Arbitrageur};
            book.insert(bid);
            Book::Resting ask{next_id++, Side::Sell, center + 1, 1, 0.0, next_seq++,
                              OwnerClass::Arbitrageur};
            book.insert(ask);
        }

        const std::uint64_t batch_seed =
            Rng::mix(Rng::mix(config.seed, 0xba7c8e5dULL), static_cast<std::uint64_t>(b));
        ClearingResult cleared = fba_clear(book, batch, batch_seed);
        ++st.batches;

        if (cleared.volume > 0) {
            const double pi = cleared.uniform_price * tick;
            const std::int64_t price2 = std::llround(cleared.uniform_price * 2.0);
            std::int64_t mm_units = 0;
            for (const Trade& tr : cleared.trades) {
                auto side_of = [&](std::int64_t id) -> Meta {
                    auto it = meta.find(id);
                    if (it != meta.end()) return it->second;
                    return {kMm, p_anchor, EventType::Null};
                };
                const Meta maker = side_of(tr.maker_id);
                const Meta taker = side_of(tr.taker_id);
                const Meta& buyer = tr.taker_is_buy ? taker : maker;
                const Meta& seller = tr.taker_is_buy ? maker : taker;
                led.settle(buyer.bucket, buyer.value, seller.bucket, seller.value,
                           price2, pi, tr.qty);
                ++st.trade_count;
                if (tr.maker_id == mm_id || tr.taker_id == mm_id) mm_units += tr.qty;
                if (log)
                    log->trades.push_back({t_end, taker.origin,
                                           tr.taker_is_buy ? Side::Buy : Side::Sell, pi,
                                           static_cast<int>(tr.qty),
                                           bucket_owner(taker.bucket)});
            }
            if (mm_units > 0) {
                st.markup_paid +=
                    static_cast<double>(mm_units) *
                    (d_net * (pi - p_anchor) - eq.deltas[level_idx]);
                P += d_net * static_cast<double>(mm_units) * eq.deltas[level_idx];
            }
        }
    }

    st.arb_welfare_loss = 0.0;
    return finalize(config, led, st, static_cast<double>(n_batches) * B);
}

template <class RunOne>
std::vector<SimStats> fan_out(const SimConfig& config, int trials, RunOne run_one) {
    std::vector<SimStats> out(static_cast<std::size_t>(trials));
    const unsigned hw = std::thread::hardware_concurrency();
    const int nt = std::max(1, std::min(trials, hw ? static_cast<int>(hw) : 1));
    auto work = [&](int w) {
        for (int i = w; i < trials; i += nt) {
            SimConfig c = config;
            c.seed = Rng::mix(config.seed, static_cast<std::uint64_t>(i));
            out[static_cast<std::size_t>(i)] = run_one(c);
        }
    };
    if (nt == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nt));
        for (int w = 0; w < nt; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }
    return out;
}

MetricReport score(const std::vector<double>& xs, double theory) {
    MetricReport m;
    m.theoretical = theory;
    const auto n = static_cast<double>(xs.size());
    if (xs.empty()) return m;
    double sum = 0.0;
    for (double x : xs) sum += x;
    m.mean = sum / n;
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - m.mean) * (x - m.mean);
        m.sd = std::sqrt(ss / (n - 1.0));
    }
    if (m.sd > 0.0)
        m.z = (m.mean - theory) / (m.sd / std::sqrt(n));
    else
        m.z = m.mean == theory ? 0.0 : std::copysign(
                                           std::numeric_limits<double>::infinity(),
                                           m.mean - theory);
    return m;
}

ValidationReport summarize(const SimConfig& config, const std::vector<SimStats>& runs,
                           double theory_markup, bool with_indifference) {
    ValidationReport rep;
    rep.trials = static_cast<int>(runs.size());
    rep.pstar = config.pstar();
    std::vector<double> diff;
    std::int64_t attempted = 0;
    std::int64_t won = 0;
    for (const SimStats& st : runs) {
        rep.run_markup_rates.push_back(st.markup_rate());
        rep.run_mm_rates.push_back(st.mm_rate());
        rep.run_fr_rates.push_back(st.fr_rate());
        diff.push_back(st.mm_rate() - st.fr_rate());
        attempted += st.races_attempted;
        won += st.races_won;
    }
    rep.markup = score(rep.run_markup_rates, theory_markup);
    if (with_indifference) {
        rep.indifference = score(diff, 0.0);
        rep.has_indifference = true;
    }
    rep.race_success_rate =
        attempted > 0 ? static_cast<double>(won) / static_cast<double>(attempted) : 0.0;
    return rep;
}

}  // namespace

NextEvent next_event(const ArrivalRates& rates, Rng& rng) {
    if (!(rates.investor >= 0.0) || !(rates.informed >= 0.0) || !(rates.public_news >= 0.0))
        throw ConfigError("next_event: arrival rates must be >= 0");
    const double total = rates.total();
    if (total <= 0.0)
        return {EventType::Null, std::numeric_limits<double>::infinity()};
    NextEvent ev;
    ev.elapsed = rng.exponential(total);
    const double u = rng.uniform01() * total;
    if (u < rates.investor)
        ev.type = EventType::Investor;
    else if (u < rates.investor + rates.informed)
        ev.type = EventType::Private;
    else
        ev.type = EventType::Public;
    return ev;
}

void SimConfig::validate() const {
    params.validate();
    if (!(horizon > 0.0)) throw ConfigError("sim config: horizon must be > 0");
    if (batch_multiple < 1) throw ConfigError("sim config: batch_multiple must be >= 1");
    if (!(tick > 0.0)) throw ConfigError("sim config: tick must be > 0");
    if (!std::isfinite(initial_price))
        throw ConfigError("sim config: initial price must be finite");
    if (pstar_override) {
        if (!(*pstar_override >= 0.0 && *pstar_override <= 1.0))
            throw ConfigError("sim config: pstar override must lie in [0, 1]");
    } else {
        ordering.validate();
        latency.validate();
    }
    if (demand) demand->validate();
}

double SimConfig::pstar() const {
    if (pstar_override) return *pstar_override;
    return success_probability_analytic(ordering, tie_cdf_at_zero(latency));
}

SimStats run(const SimConfig& config, SimLog* log) {
    config.validate();
    if (config.mode == ExecMode::Clob) {
        const ClobEquilibrium eq = solve_clob(config.params, config.pstar());
        return run_clob(config, eq, log);
    }
    MarketParams batched = config.params;
    batched.interval = config.batch_length();
    const ExcessDemandModel demand =
        config.demand ? *config.demand : ExcessDemandModel::from_params(batched);
    const FbaEquilibrium eq = solve_fba(batched, demand);
    return run_fba(config, eq, log);
}

SimStats run_clob_quoted(const SimConfig& config, const ClobEquilibrium& quoted,
                         SimLog* log) {
    config.validate();
    return run_clob(config, quoted, log);
}

SimStats run_fba_quoted(const SimConfig& config, const FbaEquilibrium& quoted,
                        SimLog* log) {
    config.validate();
    return run_fba(config, quoted, log);
}

ValidationReport validate(const SimConfig& config, const ClobEquilibrium& eq, int trials) {
    if (trials < 1) throw ConfigError("validate: trials must be >= 1");
    config.validate();
    const auto runs = fan_out(config, trials, [&](const SimConfig& c) {
        return run_clob(c, eq, nullptr);
    });
    return summarize(config, runs, eq.expected_markup, true);
}

ValidationReport validate(const SimConfig& config, const FbaEquilibrium& eq, int trials) {
    if (trials < 1) throw ConfigError("validate: trials must be >= 1");
    config.validate();
    const auto runs = fan_out(config, trials, [&](const SimConfig& c) {
        return run_fba(c, eq, nullptr);
    });
    return summarize(config, runs, eq.expected_markup_per_time, false);
}

}  // namespace dexsim
