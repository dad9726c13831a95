#include "dexsim/replay.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <unordered_map>

#include "dexsim/errors.hpp"
#include "dexsim/rng.hpp"

namespace dexsim {

namespace {

constexpr const char* kHeader = "timestamp_ns,id,action,side,price,qty,kind,fee";

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
    throw ConfigError("tick data line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_csv(const std::string& row) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = row.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(row.substr(start));
            return fields;
        }
        fields.push_back(row.substr(start, comma - start));
        start = comma + 1;
    }
}

std::int64_t parse_int(const std::string& field, std::size_t line, const char* name) {
    std::int64_t value = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        parse_fail(line, std::string(name) + " is not an integer: '" + field + "'");
    return value;
}

double parse_fee(const std::string& field, std::size_t line) {
    if (field.empty()) return 0.0;
    char* end = nullptr;
    const double value = std::strtod(field.c_str(), &end);
    if (end != field.c_str() + field.size() || !std::isfinite(value))
        parse_fail(line, "fee is not a number: '" + field + "'");
    if (value < 0.0) parse_fail(line, "fee must be >= 0");
    return value;
}

double median_of(std::vector<double> xs) {
    const std::size_t n = xs.size();
    std::sort(xs.begin(), xs.end());
    if (n % 2 == 1) return xs[n / 2];
    return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

struct OrderInfo {
    Side side = Side::Buy;
    std::int64_t price = 0;
    std::int64_t seq = 0;
};

Order place_order(const TickEvent& ev, std::int64_t seq) {
    Order o;
    o.id = ev.id;
    o.side = ev.side;
    o.price = ev.price;
    o.qty = ev.qty;
    o.kind = ev.kind;
    o.fee = ev.fee;
    o.seq = seq;
    o.owner = OwnerClass::Investor;
    return o;
}

Order cancel_order(const TickEvent& ev, std::int64_t seq) {
    Order o;
    o.id = ev.id;
    o.kind = OrderKind::Withdraw;
    o.target_id = ev.id;
    o.seq = seq;
    o.owner = OwnerClass::Investor;
    return o;
}

Order update_order(const TickEvent& ev, std::int64_t seq) {
    Order o;
    o.id = ev.id;
    o.kind = OrderKind::Update;
    o.target_id = ev.id;
    o.new_price = ev.price;
    o.new_qty = ev.qty;
    o.seq = seq;
    o.owner = OwnerClass::Investor;
    return o;
}

}  // namespace

std::vector<TickEvent> parse_ticks(std::istream& in) {
    std::string row;
    std::size_t line = 0;
    if (!std::getline(in, row)) throw ConfigError("tick data: empty input, header expected");
    ++line;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (row != kHeader)
        throw ConfigError("tick data line 1: header must be '" + std::string(kHeader) + "'");

    std::vector<TickEvent> events;
    std::unordered_map<std::int64_t, bool> placed;
    std::int64_t prev_ts = std::numeric_limits<std::int64_t>::min();

    while (std::getline(in, row)) {
        ++line;
        if (!row.empty() && row.back() == '\r') row.pop_back();
        if (row.empty()) continue;
        const auto fields = split_csv(row);
        if (fields.size() != 7 && fields.size() != 8)
            parse_fail(line, "expected 7 or 8 fields, got " + std::to_string(fields.size()));

        TickEvent ev;
        ev.timestamp_ns = parse_int(fields[0], line, "timestamp_ns");
        ev.id = parse_int(fields[1], line, "id");

        if (fields[2] == "place")
            ev.action = TickAction::Place;
        else if (fields[2] == "cancel")
            ev.action = TickAction::Cancel;
        else if (fields[2] == "update")
            ev.action = TickAction::Update;
        else
            parse_fail(line, "unknown action '" + fields[2] + "'");

        if (fields[3] == "buy")
            ev.side = Side::Buy;
        else if (fields[3] == "sell")
            ev.side = Side::Sell;
        else
            parse_fail(line, "unknown side '" + fields[3] + "'");

        ev.price = parse_int(fields[4], line, "price");
        ev.qty = parse_int(fields[5], line, "qty");

        if (fields[6] == "limit")
            ev.kind = OrderKind::Limit;
        else if (fields[6] == "ioc")
            ev.kind = OrderKind::Ioc;
        else
            parse_fail(line, "unknown kind '" + fields[6] + "'");

        ev.fee = fields.size() == 8 ? parse_fee(fields[7], line) : 0.0;

        if (ev.timestamp_ns < prev_ts)
            parse_fail(line, "timestamp decreases (" + std::to_string(ev.timestamp_ns) +
                                 " after " + std::to_string(prev_ts) + ")");
        prev_ts = ev.timestamp_ns;

        if (ev.action == TickAction::Place) {
            if (ev.qty < 1) parse_fail(line, "qty must be positive");
            if (!placed.emplace(ev.id, true).second)
                parse_fail(line, "duplicate placement of id " + std::to_string(ev.id));
        } else {
            if (!placed.count(ev.id))
                parse_fail(line, (ev.action == TickAction::Cancel ? "cancel" : "update") +
                                     std::string(" references unknown id ") +
                                     std::to_string(ev.id));
            if (ev.action == TickAction::Update && ev.qty < 1)
                parse_fail(line, "qty must be positive");
            if (ev.qty < 0) parse_fail(line, "qty must be >= 0");
        }
        events.push_back(ev);
    }
    return events;
}

void write_ticks_csv(std::ostream& out, const std::vector<TickEvent>& events) {
    out << kHeader << '\n';
    for (const TickEvent& ev : events) {
        const char* action = ev.action == TickAction::Place
                                 ? "place"
                                 : ev.action == TickAction::Cancel ? "cancel" : "update";
        char fee[64];
        std::snprintf(fee, sizeof fee, "%.17g", ev.fee);
        out << ev.timestamp_ns << ',' << ev.id << ',' << action << ','
            << (ev.side == Side::Buy ? "buy" : "sell") << ',' << ev.price << ',' << ev.qty
            << ',' << (ev.kind == OrderKind::Limit ? "limit" : "ioc") << ',' << fee << '\n';
    }
}

ReplayResult replay_clob(const std::vector<TickEvent>& events) {
    ReplayResult result;
    Book book;
    std::int64_t seq = 0;
    for (const TickEvent& ev : events) {
        ++seq;
        Order order;
        switch (ev.action) {
            case TickAction::Place: order = place_order(ev, seq); break;
            case TickAction::Cancel: order = cancel_order(ev, seq); break;
            case TickAction::Update: order = update_order(ev, seq); break;
        }
        const double t = static_cast<double>(ev.timestamp_ns) * 1e-9;
        for (const Trade& tr : clob_apply(book, order))
            result.trades.push_back({t, tr.taker_is_buy ? 1 : -1, tr.price, tr.price, tr.qty});
        if (book.two_sided())
            result.mids.push_back(
                {t, static_cast<double>(*book.midpoint_half_ticks()) / 2.0});
    }
    return result;
}

ReplayResult replay_fba(const std::vector<TickEvent>& events, double freq_s,
                        std::uint64_t seed) {
    if (!(freq_s > 0.0)) throw ConfigError("replay: auction frequency must be > 0");
    ReplayResult result;
    if (events.empty()) return result;

    const auto freq_ns = static_cast<std::int64_t>(std::llround(freq_s * 1e9));
    if (freq_ns <= 0) throw ConfigError("replay: auction frequency too small");
    const std::int64_t t0 = events.front().timestamp_ns;
    const std::int64_t last_window = (events.back().timestamp_ns - t0) / freq_ns;

    std::unordered_map<std::int64_t, OrderInfo> info;
    Book book;
    std::int64_t seq = 0;
    std::size_t cursor = 0;

    for (std::int64_t w = 0; w <= last_window; ++w) {
        const std::int64_t cutoff = t0 + (w + 1) * freq_ns;
        std::vector<Order> batch;
        while (cursor < events.size() && events[cursor].timestamp_ns < cutoff) {
            const TickEvent& ev = events[cursor++];
            ++seq;
            switch (ev.action) {
                case TickAction::Place:
                    batch.push_back(place_order(ev, seq));
                    info[ev.id] = {ev.side, ev.price, seq};
                    break;
                case TickAction::Cancel:
                    batch.push_back(cancel_order(ev, seq));
                    break;
                case TickAction::Update: {
                    batch.push_back(update_order(ev, seq));
                    auto it = info.find(ev.id);
                    if (it != info.end()) {
                        it->second.price = ev.price;
                        it->second.seq = seq;
                    }
                    break;
                }
            }
        }

        ClearingResult cleared =
            fba_clear(book, batch, Rng::mix(seed, static_cast<std::uint64_t>(w)));
        const double t_end = static_cast<double>(cutoff) * 1e-9;
        const double pi = cleared.uniform_price;
        for (const Trade& tr : cleared.trades) {
            const OrderInfo& maker = info.at(tr.maker_id);
            const OrderInfo& taker = info.at(tr.taker_id);
            const OrderInfo& buy = maker.side == Side::Buy ? maker : taker;
            const OrderInfo& sell = maker.side == Side::Buy ? taker : maker;
            // Strict comparisons against a possibly half-tick print, kept in
            // integers by doubling both sides.
            const auto price2 = static_cast<std::int64_t>(std::llround(pi * 2.0));
            const bool buy_better = 2 * buy.price > price2;
            const bool sell_better = 2 * sell.price < price2;
            bool taker_is_buy;
            if (buy_better != sell_better)
                taker_is_buy = buy_better;
            else
                taker_is_buy = buy.seq > sell.seq;
            const OrderInfo& liq = taker_is_buy ? buy : sell;
            result.trades.push_back({t_end, taker_is_buy ? 1 : -1, pi,
                                     static_cast<double>(liq.price), tr.qty});
        }
        book = std::move(cleared.residual);
        if (book.two_sided())
            result.mids.push_back(
                {t_end, static_cast<double>(*book.midpoint_half_ticks()) / 2.0});
    }
    return result;
}

ReplayResult replay(const std::vector<TickEvent>& events, double freq_s,
                    std::uint64_t seed) {
    if (freq_s == 0.0) return replay_clob(events);
    return replay_fba(events, freq_s, seed);
}

SpreadSeries realized_spread(const std::vector<ReplayTrade>& trades,
                             const std::vector<MidPoint>& mids, double horizon_s) {
    if (!(horizon_s > 0.0)) throw ConfigError("realized spread: horizon must be > 0");
    SpreadSeries series;
    for (const ReplayTrade& tr : trades) {
        const double target = tr.t + horizon_s;
        const auto it = std::lower_bound(
            mids.begin(), mids.end(), target,
            [](const MidPoint& m, double t) { return m.t < t; });
        if (it == mids.end()) {
            ++series.dropped;
            continue;
        }
        series.values.push_back(2.0 * tr.direction * (tr.exec_price - it->mid));
    }
    return series;
}

std::vector<double> mad_trim(const std::vector<double>& values, double k) {
    if (!(k > 0.0)) throw ConfigError("mad_trim: k must be > 0");
    std::vector<double> kept = values;
    while (!kept.empty()) {
        const double med = median_of(kept);
        std::vector<double> dev;
        dev.reserve(kept.size());
        for (double x : kept) dev.push_back(std::abs(x - med));
        const double mad = median_of(dev);
        std::vector<double> next;
        next.reserve(kept.size());
        if (mad == 0.0) {
            for (double x : kept)
                if (x == med) next.push_back(x);
        } else {
            for (double x : kept)
                if (std::abs(x - med) <= k * mad) next.push_back(x);
        }
        if (next.size() == kept.size()) break;
        kept = std::move(next);
    }
    return kept;
}

SpreadSummary summarize(const std::vector<ModeSeries>& modes, double mad_k) {
    if (modes.empty()) throw ConfigError("summarize: at least one mode required");
    SpreadSummary summary;
    for (const ModeSeries& mode : modes) {
        RealizedSpreadStats row;
        row.mode = mode.label;
        row.auction_freq = mode.freq_s;
        row.dropped = mode.spreads.dropped;
        row.mean_improvement = mean_of(mode.improvements);
        const std::vector<double>& raw = mode.spreads.values;
        if (!raw.empty()) {
            row.present = true;
            row.raw_mean = mean_of(raw);
            row.raw_median = median_of(raw);
            const std::vector<double> trimmed = mad_trim(raw, mad_k);
            row.trimmed_mean = mean_of(trimmed);
            row.trimmed_median = median_of(trimmed);
            row.kept = static_cast<std::int64_t>(trimmed.size());
            row.dropped += static_cast<std::int64_t>(raw.size() - trimmed.size());
        }
        summary.rows.push_back(std::move(row));
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    summary.clob_excess_pct.assign(summary.rows.size(), nan);
    const auto base = std::find_if(summary.rows.begin(), summary.rows.end(),
                                   [](const RealizedSpreadStats& r) {
                                       return r.auction_freq == 0.0 && r.present;
                                   });
    if (base != summary.rows.end()) {
        for (std::size_t i = 0; i < summary.rows.size(); ++i) {
            const RealizedSpreadStats& row = summary.rows[i];
            if (&row == &*base || !row.present || row.trimmed_mean <= 0.0) continue;
            summary.clob_excess_pct[i] =
                (base->trimmed_mean / row.trimmed_mean - 1.0) * 100.0;
        }
    }
    return summary;
}

std::vector<TickEvent> builtin_fixture() {
    Rng rng(0x7ea1d5f1x7u5eULL);
    std::vector<TickEvent> out;
    std::vector<std::int64_t> live;
    std::int64_t ts = 0;
    std::int64_t next_id = 1;
    double mid = 10000.0;

    for (int i = 0; i < 420; ++i) {
        ts += 100'000'000 + static_cast<std::int64_t>(rng.below(2'400'000'000ULL));
        mid += rng.normal(0.0, 1.0);
        const double roll = rng.uniform01();
        if (roll < 0.72 || live.size() < 4) {
            TickEvent ev;
            ev.timestamp_ns = ts;
            ev.id = next_id++;
            ev.action = TickAction::Place;
            const bool buy = rng.bernoulli(0.5);
            ev.side = buy ? Side::Buy : Side::Sell;
            const bool aggressive = rng.bernoulli(0.3);
            const auto off = static_cast<std::int64_t>(
                aggressive ? rng.below(4) : 1 + rng.below(8));
            const std::int64_t anchor = std::llround(mid);
            ev.price = buy ? anchor - (aggressive ? -off : off)
                           : anchor + (aggressive ? -off : off);
            ev.qty = 1 + static_cast<std::int64_t>(rng.below(4));
            ev.kind = rng.bernoulli(0.2) ? OrderKind::Ioc : OrderKind::Limit;
            ev.fee = rng.bernoulli(0.25)
                         ? 0.5 * static_cast<double>(1 + rng.below(3))
                         : 0.0;
            if (ev.kind == OrderKind::Limit) live.push_back(ev.id);
            out.push_back(ev);
        } else if (roll < 0.86 && !live.empty()) {
            const auto idx = static_cast<std::size_t>(rng.below(live.size()));
            TickEvent ev;
            ev.timestamp_ns = ts;
            ev.id = live[idx];
            ev.action = TickAction::Cancel;
            ev.qty = 0;
            live.erase(live.begin() + static_cast<std::ptrdiff_t>(idx));
            out.push_back(ev);
        } else if (!live.empty()) {
            const auto idx = static_cast<std::size_t>(rng.below(live.size()));
            TickEvent ev;
            ev.timestamp_ns = ts;
            ev.id = live[idx];
            ev.action = TickAction::Update;
            const bool buy = rng.bernoulli(0.5);
            ev.side = buy ? Side::Buy : Side::Sell;
            ev.price = std::llround(mid) + (buy ? -1 : 1) *
                                               static_cast<std::int64_t>(1 + rng.below(6));
            ev.qty = 1 + static_cast<std::int64_t>(rng.below(4));
            out.push_back(ev);
        }
    }
    return out;
}

std::vector<TickEvent> improvement_fixture() {
    auto place = [](std::int64_t ts, std::int64_t id, Side side, std::int64_t price) {
        TickEvent ev;
        ev.timestamp_ns = ts;
        ev.id = id;
        ev.action = TickAction::Place;
        ev.side = side;
        ev.price = price;
        ev.qty = 1;
        ev.kind = OrderKind::Limit;
        return ev;
    };
    return {
        place(100'000'000, 1, Side::Buy, 90),
        place(200'000'000, 2, Side::Sell, 110),
        place(300'000'000, 3, Side::Buy, 105),
        place(400'000'000, 4, Side::Sell, 95),
        place(500'000'000, 5, Side::Buy, 103),
        place(600'000'000, 6, Side::Sell, 97),
        place(6'000'000'000, 7, Side::Buy, 99),
        place(7'000'000'000, 8, Side::Sell, 101),
    };
}

}  // namespace dexsim
