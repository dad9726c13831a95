#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dexsim/book.hpp"

namespace dexsim {

enum class TickAction { Place, Cancel, Update };

// One row of the tick CSV:
//   timestamp_ns,id,action,side,price,qty,kind,fee
// Cancels ignore side/price/qty/kind; updates reuse price and qty as the new
// values for the referenced order. A missing fee field reads as zero.
struct TickEvent {
    std::int64_t timestamp_ns = 0;
    std::int64_t id = 0;
    TickAction action = TickAction::Place;
    Side side = Side::Buy;
    std::int64_t price = 0;
    std::int64_t qty = 0;
    OrderKind kind = OrderKind::Limit;
    double fee = 0.0;
};

// Strict parser: every malformed row, out-of-order timestamp, zero quantity,
// duplicate placement, or dangling cancel/update reference raises ConfigError
// naming the 1-based line.
std::vector<TickEvent> parse_ticks(std::istream& in);

void write_ticks_csv(std::ostream& out, const std::vector<TickEvent>& events);

// Prices and mids are in ticks; uniform-price prints and midpoints can land on
// half ticks. `posted_price` is the liquidity taker's own limit, so
// direction * (posted - exec) is the taker's surplus with respect to what they
// committed to ("clearing-price improvement"). Continuous executions happen at
// the resting price, where that surplus is identically zero.
struct ReplayTrade {
    double t = 0.0;  // seconds
    int direction = 0;
    double exec_price = 0.0;
    double posted_price = 0.0;
    std::int64_t qty = 0;
};

struct MidPoint {
    double t = 0.0;
    double mid = 0.0;
};

struct ReplayResult {
    std::vector<ReplayTrade> trades;
    std::vector<MidPoint> mids;
};

// Sequential continuous-book execution: events feed the matching engine in
// file order; the mid-quote series samples the book after every event that
// leaves it two-sided.
ReplayResult replay_clob(const std::vector<TickEvent>& events);

// Batched execution: events group into [k*freq, (k+1)*freq) windows anchored
// at the first timestamp, each window clearing as one uniform-price auction
// seeded from the window index. Residual orders rest into later windows. The
// taker of an auction trade is the side whose limit beats the uniform price
// strictly; when both or neither do, the later window arrival takes. Each
// window contributes one mid-quote sampled from the post-clearing book.
ReplayResult replay_fba(const std::vector<TickEvent>& events, double freq_s,
                        std::uint64_t seed);

// freq_s == 0 dispatches to the continuous path.
ReplayResult replay(const std::vector<TickEvent>& events, double freq_s,
                    std::uint64_t seed);

struct SpreadSeries {
    std::vector<double> values;
    std::int64_t dropped = 0;  // trades with no mid at or after t + horizon
};

// Per-trade 2 * d * (p - m_{t+h}) against the first mid at or after t + h.
SpreadSeries realized_spread(const std::vector<ReplayTrade>& trades,
                             const std::vector<MidPoint>& mids, double horizon_s);

// Iterates "drop x with |x - median| > k * MAD" to its fixed point, so one
// application is idempotent by construction. A zero MAD degenerates to
// keeping only the median value itself.
std::vector<double> mad_trim(const std::vector<double>& values, double k = 3.0);

struct RealizedSpreadStats {
    std::string mode;
    double auction_freq = 0.0;  // seconds; 0 for the continuous book
    bool present = false;       // false when no spread values survived
    double raw_mean = 0.0;
    double raw_median = 0.0;
    double trimmed_mean = 0.0;
    double trimmed_median = 0.0;
    std::int64_t kept = 0;
    std::int64_t dropped = 0;  // horizon drops plus trimmed outliers
    double mean_improvement = 0.0;
};

struct ModeSeries {
    std::string label;
    double freq_s = 0.0;
    SpreadSeries spreads;
    std::vector<double> improvements;
};

struct SpreadSummary {
    std::vector<RealizedSpreadStats> rows;
    // Percentage by which the continuous-book trimmed mean exceeds each row's
    // trimmed mean; NaN on the continuous row itself and wherever undefined.
    std::vector<double> clob_excess_pct;
};

SpreadSummary summarize(const std::vector<ModeSeries>& modes, double mad_k = 3.0);

// Deterministic synthetic order stream exercising places, cancels, updates,
// fee tie-breaks, and both order kinds across several hundred seconds.
std::vector<TickEvent> builtin_fixture();

// Hand-checked eight-event stream: window one clears two units at 100 against
// posted prices 105/103 and 95/97 (taker improvements 5 and 3), window two
// leaves a 99/101 book, so the post-clearing mid is 100 in both windows.
std::vector<TickEvent> improvement_fixture();

}  // namespace dexsim
