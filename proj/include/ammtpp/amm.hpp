#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace ammtpp {
namespace amm {

struct DivisionByZero : std::domain_error {
    using std::domain_error::domain_error;
};

struct InsufficientLiquidity : std::domain_error {
    using std::domain_error::domain_error;
};

struct InvalidState : std::domain_error {
    using std::domain_error::domain_error;
};

// Constant-product pool over real-valued reserves. invariant_k is kept in
// sync by every state transition.
struct PoolState {
    double reserve_x = 0.0;
    double reserve_y = 0.0;
    double invariant_k = 0.0;

    static PoolState make(double x, double y) {
        if (x <= 0.0 || y <= 0.0) throw InvalidState("reserves must be positive");
        return PoolState{x, y, x * y};
    }
};

// Price of X in units of Y: P_x = y / x.
inline double spot_price(const PoolState& pool) {
    if (pool.reserve_x <= 0.0) throw DivisionByZero("spot_price with zero reserve_x");
    return pool.reserve_y / pool.reserve_x;
}

struct SwapQuote {
    double input_amount = 0.0;   // Y deposited
    double output_amount = 0.0;  // X withdrawn
    double spot_before = 0.0;
    double spot_after = 0.0;
    double effective_price = 0.0;  // input / output
    double slippage_abs = 0.0;     // effective - spot_before
    double slippage_pct = 0.0;
};

// Buys delta_x of X from the pool along (x - dx)(y + dy) = k.
inline std::pair<PoolState, SwapQuote> execute_swap_cpmm(const PoolState& pool, double delta_x) {
    if (!(delta_x > 0.0)) throw InsufficientLiquidity("trade size must be positive");
    if (delta_x >= pool.reserve_x) throw InsufficientLiquidity("trade exceeds reserve_x");
    const double k = pool.reserve_x * pool.reserve_y;
    const double new_x = pool.reserve_x - delta_x;
    const double new_y = k / new_x;
    const double delta_y = new_y - pool.reserve_y;

    SwapQuote quote;
    quote.input_amount = delta_y;
    quote.output_amount = delta_x;
    quote.spot_before = spot_price(pool);
    quote.effective_price = delta_y / delta_x;
    quote.slippage_abs = quote.effective_price - quote.spot_before;
    quote.slippage_pct = quote.slippage_abs / quote.spot_before * 100.0;

    PoolState next{new_x, new_y, new_x * new_y};
    quote.spot_after = spot_price(next);
    return {next, quote};
}

// Additive reserve update used for event replay; not invariant-preserving.
inline PoolState apply_reserve_delta(const PoolState& pool, double dx, double dy) {
    const double new_x = pool.reserve_x + dx;
    const double new_y = pool.reserve_y + dy;
    if (new_x <= 0.0 || new_y <= 0.0) throw InvalidState("reserve delta empties the pool");
    return PoolState{new_x, new_y, new_x * new_y};
}

// Scales both reserves by (1 + lp_fraction); the spot price is unchanged.
inline PoolState mint_burn_proportional(const PoolState& pool, double lp_fraction) {
    const double scale = 1.0 + lp_fraction;
    if (scale <= 0.0) throw InvalidState("burn of 100% or more");
    const double new_x = pool.reserve_x * scale;
    const double new_y = pool.reserve_y * scale;
    return PoolState{new_x, new_y, new_x * new_y};
}

enum class ArbDirection { BuyExternalSellPool, BuyPoolSellExternal, None };

struct ArbResult {
    ArbDirection direction = ArbDirection::None;
    double profit = 0.0;
};

// Price-taking arbitrage: both venues quote fixed prices, fees excluded.
inline ArbResult arbitrage_profit(double pool_price, double external_price, double qty) {
    if (!(pool_price > 0.0) || !(external_price > 0.0)) {
        throw InvalidState("prices must be positive");
    }
    if (!(qty > 0.0)) throw InvalidState("quantity must be positive");
    if (external_price < pool_price) {
        return {ArbDirection::BuyExternalSellPool, qty * (pool_price - external_price)};
    }
    if (pool_price < external_price) {
        return {ArbDirection::BuyPoolSellExternal, qty * (external_price - pool_price)};
    }
    return {ArbDirection::None, 0.0};
}

enum class RatioSignal { ImpliedYieldUp, ImpliedYieldDown, Neutral };

// PT/SY reserve ratio rising means each PT is worth less SY, i.e. a higher
// implied yield.
inline RatioSignal pendle_ratio_signal(const PoolState& before, const PoolState& after) {
    if (before.reserve_x <= 0.0 || before.reserve_y <= 0.0 || after.reserve_x <= 0.0 ||
        after.reserve_y <= 0.0) {
        throw InvalidState("reserves must be positive");
    }
    const double r0 = before.reserve_x / before.reserve_y;
    const double r1 = after.reserve_x / after.reserve_y;
    if (r1 > r0) return RatioSignal::ImpliedYieldUp;
    if (r1 < r0) return RatioSignal::ImpliedYieldDown;
    return RatioSignal::Neutral;
}

}  // namespace amm
}  // namespace ammtpp
