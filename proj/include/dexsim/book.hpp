#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

#include "dexsim/errors.hpp"

namespace dexsim {

enum class Side { Buy, Sell };
enum class OwnerClass { Investor, Trader, Arbitrageur };
enum class OrderKind { Limit, Ioc, Fok, Withdraw, Update };

// Prices are integer ticks, quantities integer units. arrival_seq is the
// position in the committed order stream and is the time-priority key.
struct Order {
    std::int64_t id = 0;
    Side side = Side::Buy;
    std::int64_t price = 0;
    std::int64_t qty = 0;
    OrderKind kind = OrderKind::Limit;
    double fee = 0.0;
    std::int64_t seq = 0;
    OwnerClass owner = OwnerClass::Investor;
    // Withdraw/Update only.
    std::int64_t target_id = 0;
    std::int64_t new_price = 0;
    std::int64_t new_qty = 0;
};

struct Trade {
    std::int64_t maker_id = 0;
    std::int64_t taker_id = 0;
    double price = 0.0;
    std::int64_t qty = 0;
    bool taker_is_buy = false;
};

// Resting side of the market. Levels are price-keyed; within a level orders
// sit in execution priority: descending fee, then ascending arrival_seq.
class Book {
public:
    struct Resting {
        std::int64_t id;
        Side side;
        std::int64_t price;
        std::int64_t qty;
        double fee;
        std::int64_t seq;
        OwnerClass owner;
    };

    void insert(const Resting& order);
    bool erase(std::int64_t id);
    const Resting* find(std::int64_t id) const;
    void reduce(std::int64_t id, std::int64_t by);

    std::optional<std::int64_t> best_bid() const;
    std::optional<std::int64_t> best_ask() const;
    bool two_sided() const { return best_bid() && best_ask(); }
    // Midpoint in half-ticks (best_bid + best_ask), exact in integers.
    std::optional<std::int64_t> midpoint_half_ticks() const;

    std::size_t order_count() const { return index_.size(); }
    std::vector<Resting> all_orders() const;

    // Highest-priority resting order at the best opposite price for an
    // incoming order of the given side, if any level crosses the limit.
    const Resting* best_match(Side incoming, std::int64_t limit) const;
    // Total opposite-side quantity priced within the limit.
    std::int64_t matchable_qty(Side incoming, std::int64_t limit) const;

    // Enforces: no crossed resting book, positive quantities, index
    // consistency. Throws NumericError on violation; test hook.
    void check() const;

private:
    using Level = std::vector<Resting>;
    std::map<std::int64_t, Level, std::greater<>> bids_;
    std::map<std::int64_t, Level> asks_;
    std::unordered_map<std::int64_t, std::pair<Side, std::int64_t>> index_;

    friend struct BookMutator;
};

// Applies one committed order to a continuous book: the marketable portion
// executes against resting orders at their prices in priority order, an IOC
// remainder is dropped, a limit remainder rests, and a fill-or-kill executes
// only when the whole quantity is matchable. Withdraw/Update must name a
// resting order of the same owner class; otherwise the order is rejected and
// the book is left untouched. An update re-enters the queue with the
// updating order's arrival_seq.
std::vector<Trade> clob_apply(Book& book, const Order& order);

struct ClearingResult {
    // Half-tick resolution: a balanced auction can print between two ticks.
    double uniform_price = 0.0;
    std::int64_t volume = 0;
    std::vector<Trade> trades;
    Book residual;
};

// Uniform-price call auction over the resting book plus one batch of
// committed orders. Withdrawals and updates apply first in sequence order;
// the auction then clears the maximal volume V* = max_p min(D(p), S(p)).
// Within the max-volume price interval the side with residual imbalance
// pins the price (excess demand -> top, excess supply -> bottom); a balanced
// interval prints at the tick nearest the pre-batch midpoint when the book
// was two-sided, else at the interval midpoint. Orders priced strictly
// inside the print fill in full; marginal orders are rationed by descending
// fee, then arrival_seq, then a seeded per-order draw. Unfilled non-IOC
// remainders rest in the residual book; a partially fillable fill-or-kill is
// withdrawn and the auction re-clears.
ClearingResult fba_clear(const Book& book, const std::vector<Order>& batch,
                         std::uint64_t seed);

// Same contract as fba_clear, evaluated by scanning every tick of the price
// grid. Refuses more than 12 participating orders or a grid wider than 64
// ticks. Test oracle only.
ClearingResult brute_force_clear(const Book& book, const std::vector<Order>& batch,
                                 std::uint64_t seed);

}  // namespace dexsim
