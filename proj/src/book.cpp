#include "dexsim/book.hpp"

#include <algorithm>
#include <functional>
#include <limits>

#include "dexsim/rng.hpp"

namespace dexsim {

namespace {

bool priority_before(double fee_a, std::int64_t seq_a, double fee_b, std::int64_t seq_b) {
    if (fee_a != fee_b) return fee_a > fee_b;
    return seq_a < seq_b;
}

}  // namespace

void Book::insert(const Resting& order) {
    if (order.qty <= 0) throw ConfigError("book: resting qty must be positive");
    if (index_.count(order.id)) throw ConfigError("book: duplicate order id");
    Level* level;
    if (order.side == Side::Buy) level = &bids_[order.price];
    else level = &asks_[order.price];
    auto pos = std::upper_bound(
        level->begin(), level->end(), order, [](const Resting& a, const Resting& b) {
            return priority_before(a.fee, a.seq, b.fee, b.seq);
        });
    level->insert(pos, order);
    index_.emplace(order.id, std::make_pair(order.side, order.price));
}

bool Book::erase(std::int64_t id) {
    auto it = index_.find(id);
    if (it == index_.end()) return false;
    const auto [side, price] = it->second;
    if (side == Side::Buy) {
        Level& level = bids_.at(price);
        level.erase(std::find_if(level.begin(), level.end(),
                                 [&](const Resting& o) { return o.id == id; }));
        if (level.empty()) bids_.erase(price);
    } else {
        Level& level = asks_.at(price);
        level.erase(std::find_if(level.begin(), level.end(),
                                 [&](const Resting& o) { return o.id == id; }));
        if (level.empty()) asks_.erase(price);
    }
    index_.erase(it);
    return true;
}

const Book::Resting* Book::find(std::int64_t id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return nullptr;
    const auto [side, price] = it->second;
    const Level& level = side == Side::Buy ? bids_.at(price) : asks_.at(price);
    for (const Resting& o : level)
        if (o.id == id) return &o;
    return nullptr;
}

void Book::reduce(std::int64_t id, std::int64_t by) {
    auto it = index_.find(id);
    if (it == index_.end()) throw ConfigError("book: reduce of unknown id");
    const auto [side, price] = it->second;
    Level& level = side == Side::Buy ? bids_.at(price) : asks_.at(price);
    auto pos = std::find_if(level.begin(), level.end(),
                            [&](const Resting& o) { return o.id == id; });
    if (by < 0 || by > pos->qty) throw ConfigError("book: bad reduce quantity");
    pos->qty -= by;
    if (pos->qty == 0) {
        level.erase(pos);
        if (level.empty()) {
            if (side == Side::Buy) bids_.erase(price);
            else asks_.erase(price);
        }
        index_.erase(it);
    }
}

std::optional<std::int64_t> Book::best_bid() const {
    if (bids_.empty()) return std::nullopt;
    return bids_.begin()->first;
}

std::optional<std::int64_t> Book::best_ask() const {
    if (asks_.empty()) return std::nullopt;
    return asks_.begin()->first;
}

std::optional<std::int64_t> Book::midpoint_half_ticks() const {
    const auto bb = best_bid(), ba = best_ask();
    if (!bb || !ba) return std::nullopt;
    return *bb + *ba;
}

std::vector<Book::Resting> Book::all_orders() const {
    std::vector<Resting> out;
    out.reserve(index_.size());
    for (const auto& [price, level] : bids_)
        out.insert(out.end(), level.begin(), level.end());
    for (const auto& [price, level] : asks_)
        out.insert(out.end(), level.begin(), level.end());
    return out;
}

const Book::Resting* Book::best_match(Side incoming, std::int64_t limit) const {
    if (incoming == Side::Buy) {
        if (asks_.empty() || asks_.begin()->first > limit) return nullptr;
        return &asks_.begin()->second.front();
    }
    if (bids_.empty() || bids_.begin()->first < limit) return nullptr;
    return &bids_.begin()->second.front();
}

std::int64_t Book::matchable_qty(Side incoming, std::int64_t limit) const {
    std::int64_t total = 0;
    if (incoming == Side::Buy) {
        for (const auto& [price, level] : asks_) {
            if (price > limit) break;
            for (const Resting& o : level) total += o.qty;
        }
    } else {
        for (const auto& [price, level] : bids_) {
            if (price < limit) break;
            for (const Resting& o : level) total += o.qty;
        }
    }
    return total;
}

void Book::check() const {
    std::size_t counted = 0;
    auto check_side = [&](const auto& levels, Side side) {
        for (const auto& [price, level] : levels) {
            if (level.empty()) throw NumericError("book: empty level retained");
            for (std::size_t i = 0; i < level.size(); ++i) {
                const Resting& o = level[i];
                if (o.qty <= 0) throw NumericError("book: non-positive resting qty");
                if (o.price != price || o.side != side)
                    throw NumericError("book: order filed under wrong level");
                auto it = index_.find(o.id);
                if (it == index_.end() || it->second != std::make_pair(side, price))
                    throw NumericError("book: index out of sync");
                if (i > 0 && !priority_before(level[i - 1].fee, level[i - 1].seq, o.fee, o.seq))
                    throw NumericError("book: level priority order violated");
                ++counted;
            }
        }
    };
    check_side(bids_, Side::Buy);
    check_side(asks_, Side::Sell);
    if (counted != index_.size()) throw NumericError("book: index size mismatch");
    const auto bb = best_bid(), ba = best_ask();
    if (bb && ba && *bb >= *ba) throw NumericError("book: crossed resting book");
}

namespace {

void validate_entry(const Order& order) {
    switch (order.kind) {
        case OrderKind::Limit:
        case OrderKind::Ioc:
        case OrderKind::Fok:
            if (order.qty <= 0) throw ConfigError("order: qty must be positive");
            break;
        case OrderKind::Withdraw:
            break;
        case OrderKind::Update:
            break;
    }
}

std::vector<Trade> match_into(Book& book, const Order& order, std::int64_t price,
                              std::int64_t qty) {
    std::vector<Trade> trades;
    if (order.kind == OrderKind::Fok && book.matchable_qty(order.side, price) < qty)
        return trades;
    std::int64_t remaining = qty;
    while (remaining > 0) {
        const Book::Resting* best = book.best_match(order.side, price);
        if (!best) break;
        const std::int64_t take = std::min(remaining, best->qty);
        trades.push_back({best->id, order.id, static_cast<double>(best->price), take,
                          order.side == Side::Buy});
        book.reduce(best->id, take);
        remaining -= take;
    }
    if (remaining > 0 && order.kind == OrderKind::Limit)
        book.insert({order.id, order.side, price, remaining, order.fee, order.seq,
                     order.owner});
    return trades;
}

}  // namespace

std::vector<Trade> clob_apply(Book& book, const Order& order) {
    validate_entry(order);
    switch (order.kind) {
        case OrderKind::Withdraw: {
            const Book::Resting* target = book.find(order.target_id);
            if (!target || target->owner != order.owner) return {};
            book.erase(order.target_id);
            return {};
        }
        case OrderKind::Update: {
            const Book::Resting* target = book.find(order.target_id);
            if (!target || target->owner != order.owner || order.new_qty <= 0) return {};
            Order reentry;
            reentry.id = target->id;
            reentry.side = target->side;
            reentry.price = order.new_price;
            reentry.qty = order.new_qty;
            reentry.kind = OrderKind::Limit;
            reentry.fee = target->fee;
            reentry.seq = order.seq;
            reentry.owner = target->owner;
            book.erase(order.target_id);
            return match_into(book, reentry, reentry.price, reentry.qty);
        }
        default:
            return match_into(book, order, order.price, order.qty);
    }
}

namespace {

// One auction participant: a resting order or a batch entry surviving the
// withdrawal/update pass.
struct Part {
    std::int64_t id;
    Side side;
    std::int64_t price;
    std::int64_t qty;
    double fee;
    std::int64_t seq;
    OwnerClass owner;
    OrderKind kind;
    bool active = true;
    std::int64_t fill = 0;
};

std::vector<Part> collect_participants(const Book& book, const std::vector<Order>& batch) {
    std::vector<Part> parts;
    for (const Book::Resting& o : book.all_orders())
        parts.push_back({o.id, o.side, o.price, o.qty, o.fee, o.seq, o.owner,
                         OrderKind::Limit});

    auto locate = [&](std::int64_t id) -> Part* {
        for (Part& p : parts)
            if (p.id == id && p.active) return &p;
        return nullptr;
    };

    for (const Order& o : batch) {
        validate_entry(o);
        switch (o.kind) {
            case OrderKind::Withdraw: {
                Part* target = locate(o.target_id);
                if (target && target->owner == o.owner) target->active = false;
                break;
            }
            case OrderKind::Update: {
                Part* target = locate(o.target_id);
                if (!target || target->owner != o.owner || o.new_qty <= 0) break;
                Part updated = *target;
                updated.price = o.new_price;
                updated.qty = o.new_qty;
                updated.seq = o.seq;
                target->active = false;
                parts.push_back(updated);
                break;
            }
            default:
                parts.push_back({o.id, o.side, o.price, o.qty, o.fee, o.seq, o.owner,
                                 o.kind});
        }
    }
    std::erase_if(parts, [](const Part& p) { return !p.active; });
    return parts;
}

struct Curve {
    // Buy prices descending / sell prices ascending, with cumulative qty
    // from the aggressive end, so D(p) and S(p) are partition-point lookups.
    std::vector<std::int64_t> prices;
    std::vector<std::int64_t> cum;

    std::int64_t at_or_beyond(std::int64_t p, bool buy_side) const {
        if (prices.empty()) return 0;
        std::size_t n;
        if (buy_side) {
            n = std::upper_bound(prices.begin(), prices.end(), p,
                                 [](std::int64_t a, std::int64_t b) { return a > b; }) -
                prices.begin();
        } else {
            n = std::upper_bound(prices.begin(), prices.end(), p) - prices.begin();
        }
        return n == 0 ? 0 : cum[n - 1];
    }
};

Curve build_curve(const std::vector<Part>& parts, Side side) {
    std::vector<std::pair<std::int64_t, std::int64_t>> acc;
    for (const Part& p : parts)
        if (p.side == side) acc.emplace_back(p.price, p.qty);
    if (side == Side::Buy)
        std::sort(acc.begin(), acc.end(), std::greater<>());
    else
        std::sort(acc.begin(), acc.end());
    Curve curve;
    for (const auto& [price, qty] : acc) {
        if (!curve.prices.empty() && curve.prices.back() == price) {
            curve.cum.back() += qty;
        } else {
            curve.prices.push_back(price);
            curve.cum.push_back((curve.cum.empty() ? 0 : curve.cum.back()) + qty);
        }
    }
    return curve;
}

struct Auction {
    std::int64_t volume = 0;
    std::int64_t price2 = 0;  // clearing price in half-ticks
};

// Price selection inside the max-volume interval [lo, hi]: residual excess
// demand at hi prints hi, residual excess supply at lo prints lo; otherwise
// the balanced range (or the two ticks bracketing the sign change) prints at
// the tick nearest the pre-batch midpoint, falling back to the range
// midpoint, which may land on a half-tick.
Auction clear_on_interval(std::int64_t lo, std::int64_t hi, std::int64_t volume,
                          const std::function<std::int64_t(std::int64_t)>& excess,
                          std::optional<std::int64_t> mid2) {
    Auction a;
    a.volume = volume;
    if (excess(hi) > 0) {
        a.price2 = 2 * hi;
        return a;
    }
    if (excess(lo) < 0) {
        a.price2 = 2 * lo;
        return a;
    }
    std::int64_t t0 = lo, t_hi = hi;
    while (t0 < t_hi) {  // first tick with excess <= 0
        const std::int64_t m = t0 + (t_hi - t0) / 2;
        if (excess(m) <= 0) t_hi = m;
        else t0 = m + 1;
    }
    std::int64_t range_lo, range_hi;
    if (excess(t0) == 0) {
        range_lo = t0;
        std::int64_t u0 = t0, u_hi = hi + 1;
        while (u0 < u_hi) {  // first tick with excess < 0, or hi+1
            const std::int64_t m = u0 + (u_hi - u0) / 2;
            if (m > hi || excess(m) < 0) u_hi = m;
            else u0 = m + 1;
        }
        range_hi = u0 - 1;
    } else {
        range_lo = t0 - 1;
        range_hi = t0;
    }
    if (mid2) {
        std::int64_t p2 = std::clamp(*mid2, 2 * range_lo, 2 * range_hi);
        if (p2 % 2 != 0) p2 -= 1;
        a.price2 = p2;
    } else {
        a.price2 = range_lo + range_hi;
    }
    return a;
}

struct AllocKey {
    double fee;
    std::int64_t seq;
    std::uint64_t draw;

    bool operator<(const AllocKey& other) const {
        if (fee != other.fee) return fee > other.fee;
        if (seq != other.seq) return seq < other.seq;
        return draw < other.draw;
    }
};

void allocate_side(std::vector<Part*>& side_parts, std::int64_t price2,
                   std::int64_t volume, bool buy_side, std::uint64_t seed) {
    std::int64_t strict_total = 0;
    std::vector<Part*> marginal;
    for (Part* p : side_parts) {
        p->fill = 0;
        const std::int64_t rel = 2 * p->price - price2;
        const bool strict = buy_side ? rel > 0 : rel < 0;
        const bool eligible = buy_side ? rel >= 0 : rel <= 0;
        if (strict) {
            p->fill = p->qty;
            strict_total += p->qty;
        } else if (eligible) {
            marginal.push_back(p);
        }
    }
    if (strict_total > volume)
        throw NumericError("auction: inframarginal demand exceeds cleared volume");
    std::sort(marginal.begin(), marginal.end(), [&](const Part* a, const Part* b) {
        return AllocKey{a->fee, a->seq, Rng::mix(seed, static_cast<std::uint64_t>(a->id))} <
               AllocKey{b->fee, b->seq, Rng::mix(seed, static_cast<std::uint64_t>(b->id))};
    });
    std::int64_t budget = volume - strict_total;
    for (Part* p : marginal) {
        const std::int64_t take = std::min(budget, p->qty);
        p->fill = take;
        budget -= take;
    }
    if (budget != 0)
        throw NumericError("auction: cleared volume not absorbed at the margin");
}

std::vector<Trade> pair_fills(std::vector<Part*> buys, std::vector<Part*> sells,
                              double price) {
    auto by_aggression = [](bool buy_side) {
        return [buy_side](const Part* a, const Part* b) {
            if (a->price != b->price) return buy_side ? a->price > b->price : a->price < b->price;
            if (a->fee != b->fee) return a->fee > b->fee;
            return a->seq < b->seq;
        };
    };
    std::erase_if(buys, [](const Part* p) { return p->fill == 0; });
    std::erase_if(sells, [](const Part* p) { return p->fill == 0; });
    std::sort(buys.begin(), buys.end(), by_aggression(true));
    std::sort(sells.begin(), sells.end(), by_aggression(false));

    std::vector<Trade> trades;
    std::size_t bi = 0, si = 0;
    std::int64_t brem = buys.empty() ? 0 : buys[0]->fill;
    std::int64_t srem = sells.empty() ? 0 : sells[0]->fill;
    while (bi < buys.size() && si < sells.size()) {
        const std::int64_t take = std::min(brem, srem);
        const Part* b = buys[bi];
        const Part* s = sells[si];
        const bool buyer_takes = b->seq > s->seq || (b->seq == s->seq && b->id > s->id);
        trades.push_back({buyer_takes ? s->id : b->id, buyer_takes ? b->id : s->id,
                          price, take, buyer_takes});
        brem -= take;
        srem -= take;
        if (brem == 0 && ++bi < buys.size()) brem = buys[bi]->fill;
        if (srem == 0 && ++si < sells.size()) srem = sells[si]->fill;
    }
    return trades;
}

ClearingResult finish_clearing(std::vector<Part>& parts, const Auction& auction) {
    ClearingResult result;
    result.volume = auction.volume;
    result.uniform_price = auction.volume > 0
                               ? auction.price2 / 2.0
                               : std::numeric_limits<double>::quiet_NaN();
    if (auction.volume > 0) {
        std::vector<Part*> buys, sells;
        for (Part& p : parts)
            if (p.active) (p.side == Side::Buy ? buys : sells).push_back(&p);
        result.trades = pair_fills(buys, sells, result.uniform_price);
    }
    for (const Part& p : parts) {
        if (!p.active) continue;
        const std::int64_t remaining = p.qty - p.fill;
        if (remaining > 0 && p.kind == OrderKind::Limit)
            result.residual.insert({p.id, p.side, p.price, remaining, p.fee, p.seq,
                                    p.owner});
    }
    return result;
}

// Re-clears after withdrawing a partially filled all-or-nothing order; the
// victim is the lowest-priority one so survivors keep their place.
bool drop_partial_fok(std::vector<Part>& parts) {
    Part* victim = nullptr;
    for (Part& p : parts) {
        if (!p.active || p.kind != OrderKind::Fok) continue;
        if (p.fill == 0 || p.fill == p.qty) continue;
        if (!victim || priority_before(victim->fee, victim->seq, p.fee, p.seq))
            victim = &p;
    }
    if (!victim) return false;
    victim->active = false;
    return true;
}

}  // namespace

ClearingResult fba_clear(const Book& book, const std::vector<Order>& batch,
                         std::uint64_t seed) {
    std::vector<Part> parts = collect_participants(book, batch);
    const std::optional<std::int64_t> mid2 = book.midpoint_half_ticks();

    while (true) {
        std::vector<Part> active;
        for (const Part& p : parts)
            if (p.active) active.push_back(p);
        const Curve demand = build_curve(active, Side::Buy);
        const Curve supply = build_curve(active, Side::Sell);

        auto d_at = [&](std::int64_t p) { return demand.at_or_beyond(p, true); };
        auto s_at = [&](std::int64_t p) { return supply.at_or_beyond(p, false); };

        std::vector<std::int64_t> candidates;
        for (const Part& p : active)
            for (std::int64_t c : {p.price - 1, p.price, p.price + 1})
                candidates.push_back(c);
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()),
                         candidates.end());

        std::int64_t best_volume = 0;
        for (std::int64_t c : candidates)
            best_volume = std::max(best_volume, std::min(d_at(c), s_at(c)));

        Auction auction;
        if (best_volume > 0) {
            std::int64_t lo = 0, hi = 0;
            bool found = false;
            for (std::size_t i = 0; i < candidates.size(); ++i) {
                if (std::min(d_at(candidates[i]), s_at(candidates[i])) != best_volume)
                    continue;
                if (!found) {
                    lo = candidates[i];
                    found = true;
                }
                hi = i + 1 < candidates.size() ? candidates[i + 1] - 1 : candidates[i];
            }
            auction = clear_on_interval(
                lo, hi, best_volume,
                [&](std::int64_t p) { return d_at(p) - s_at(p); }, mid2);

            std::vector<Part*> buys, sells;
            for (Part& p : parts)
                if (p.active) (p.side == Side::Buy ? buys : sells).push_back(&p);
            allocate_side(buys, auction.price2, best_volume, true, seed);
            allocate_side(sells, auction.price2, best_volume, false, seed);
            if (drop_partial_fok(parts)) continue;
        } else {
            for (Part& p : parts) p.fill = 0;
        }
        return finish_clearing(parts, auction);
    }
}

ClearingResult brute_force_clear(const Book& book, const std::vector<Order>& batch,
                                 std::uint64_t seed) {
    std::vector<Part> parts = collect_participants(book, batch);
    if (parts.size() > 12)
        throw ConfigError("brute_force_clear: instance too large (orders)");
    const std::optional<std::int64_t> mid2 = book.midpoint_half_ticks();

    std::int64_t pmin = std::numeric_limits<std::int64_t>::max();
    std::int64_t pmax = std::numeric_limits<std::int64_t>::min();
    for (const Part& p : parts) {
        pmin = std::min(pmin, p.price);
        pmax = std::max(pmax, p.price);
    }
    if (!parts.empty() && pmax - pmin + 3 > 64)
        throw ConfigError("brute_force_clear: instance too large (price grid)");

    while (true) {
        auto d_at = [&](std::int64_t at) {
            std::int64_t total = 0;
            for (const Part& p : parts)
                if (p.active && p.side == Side::Buy && p.price >= at) total += p.qty;
            return total;
        };
        auto s_at = [&](std::int64_t at) {
            std::int64_t total = 0;
            for (const Part& p : parts)
                if (p.active && p.side == Side::Sell && p.price <= at) total += p.qty;
            return total;
        };

        Auction auction;
        std::int64_t best_volume = 0;
        if (!parts.empty()) {
            std::int64_t lo = 0, hi = 0;
            for (std::int64_t t = pmin - 1; t <= pmax + 1; ++t) {
                const std::int64_t v = std::min(d_at(t), s_at(t));
                if (v > best_volume) {
                    best_volume = v;
                    lo = hi = t;
                } else if (v == best_volume && best_volume > 0) {
                    hi = t;
                }
            }
            if (best_volume > 0) {
                auction = clear_on_interval(
                    lo, hi, best_volume,
                    [&](std::int64_t p) { return d_at(p) - s_at(p); }, mid2);
                std::vector<Part*> buys, sells;
                for (Part& p : parts)
                    if (p.active) (p.side == Side::Buy ? buys : sells).push_back(&p);
                allocate_side(buys, auction.price2, best_volume, true, seed);
                allocate_side(sells, auction.price2, best_volume, false, seed);
                if (drop_partial_fok(parts)) continue;
            }
        }
        if (best_volume == 0)
            for (Part& p : parts) p.fill = 0;
        return finish_clearing(parts, auction);
    }
}

}  // namespace dexsim
