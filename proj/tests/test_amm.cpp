#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ammtpp/amm.hpp"
#include "ammtpp/rng.hpp"

using namespace ammtpp;
using namespace ammtpp::amm;
using Catch::Approx;

TEST_CASE("spot price is the reserve ratio") {
    CHECK(spot_price(PoolState::make(100.0, 40000.0)) == Approx(400.0));
    CHECK(spot_price(PoolState::make(100.0, 100.0)) == Approx(1.0));
    CHECK(spot_price(PoolState::make(1000.0, 2000.0)) == Approx(2.0));  // PT priced in SY

    PoolState degenerate{0.0, 10.0, 0.0};
    CHECK_THROWS_AS(spot_price(degenerate), DivisionByZero);
}

TEST_CASE("constant-product swap reproduces the worked slippage example") {
    auto [next, quote] = execute_swap_cpmm(PoolState::make(100.0, 40000.0), 10.0);
    CHECK(quote.input_amount == Approx(40000.0 / 9.0).epsilon(1e-12));
    CHECK(quote.effective_price == Approx(4000.0 / 9.0).epsilon(1e-12));
    CHECK(quote.slippage_abs == Approx(400.0 / 9.0).epsilon(1e-12));
    CHECK(quote.slippage_pct == Approx(100.0 / 9.0).epsilon(1e-12));
    CHECK(next.reserve_x == Approx(90.0));
    CHECK(next.reserve_y == Approx(40000.0 + 40000.0 / 9.0).epsilon(1e-12));

    // effective price tends to spot for a vanishing trade
    auto [_, tiny] = execute_swap_cpmm(PoolState::make(100.0, 40000.0), 1e-6);
    CHECK(tiny.effective_price == Approx(400.0).epsilon(1e-5));

    auto [half, q] = execute_swap_cpmm(PoolState::make(200.0, 200.0), 100.0);
    CHECK(q.input_amount == Approx(200.0));
    CHECK(half.reserve_x == Approx(100.0));
    CHECK(half.reserve_y == Approx(400.0));

    CHECK_THROWS_AS(execute_swap_cpmm(PoolState::make(100.0, 100.0), 100.0),
                    InsufficientLiquidity);
}

TEST_CASE("swap preserves the product invariant", "[property]") {
    Rng rng(2019);
    for (int trial = 0; trial < 200; ++trial) {
        const double x = rng.uniform(0.1, 1e6);
        const double y = rng.uniform(0.1, 1e6);
        const double dx = x * rng.uniform(1e-6, 0.99);
        auto [next, quote] = execute_swap_cpmm(PoolState::make(x, y), dx);
        CHECK(std::abs(next.reserve_x * next.reserve_y - x * y) <= 1e-12 * x * y);
        // convex invariant: buying always costs more than spot
        CHECK(quote.effective_price > quote.spot_before);
    }
}

TEST_CASE("reserve deltas replay the state-evolution table") {
    PoolState pool = PoolState::make(200.0, 200.0);
    PoolState after = apply_reserve_delta(pool, 20.0, -20.0);
    CHECK(after.reserve_x == Approx(220.0));
    CHECK(after.reserve_y == Approx(180.0));
    CHECK(spot_price(after) == Approx(180.0 / 220.0));              // P_A ~ 0.82
    CHECK(1.0 / spot_price(after) == Approx(220.0 / 180.0));        // P_B ~ 1.22
    CHECK(std::round(spot_price(after) * 100.0) / 100.0 == Approx(0.82));
    CHECK(std::round(100.0 / spot_price(after)) / 100.0 == Approx(1.22));

    PoolState doubled = apply_reserve_delta(PoolState::make(100.0, 100.0), 100.0, 100.0);
    CHECK(spot_price(doubled) == Approx(1.0));

    PoolState pendle = apply_reserve_delta(PoolState::make(1000.0, 2000.0), 200.0, -400.0);
    CHECK(pendle.reserve_x == Approx(1200.0));
    CHECK(pendle.reserve_y == Approx(1600.0));
    CHECK(pendle.reserve_x / pendle.reserve_y == Approx(0.75));
    CHECK(spot_price(pendle) == Approx(1600.0 / 1200.0));

    CHECK_THROWS_AS(apply_reserve_delta(pool, -200.0, 0.0), InvalidState);
}

TEST_CASE("proportional mint and burn keep the spot price") {
    PoolState doubled = mint_burn_proportional(PoolState::make(100.0, 100.0), 1.0);
    CHECK(doubled.reserve_x == Approx(200.0));
    CHECK(spot_price(doubled) == Approx(1.0));

    PoolState halved = mint_burn_proportional(PoolState::make(200.0, 200.0), -0.5);
    CHECK(halved.reserve_x == Approx(100.0));
    CHECK(spot_price(halved) == Approx(1.0));

    PoolState grown = mint_burn_proportional(PoolState::make(100.0, 40000.0), 0.25);
    CHECK(grown.reserve_x == Approx(125.0));
    CHECK(grown.reserve_y == Approx(50000.0));
    CHECK(spot_price(grown) == Approx(400.0));

    CHECK_THROWS_AS(mint_burn_proportional(PoolState::make(1.0, 1.0), -1.0), InvalidState);
}

TEST_CASE("mint/burn price neutrality", "[property]") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const double x = rng.uniform(0.5, 1e5);
        const double y = rng.uniform(0.5, 1e5);
        const double f = rng.uniform(-0.95, 3.0);
        PoolState p = PoolState::make(x, y);
        CHECK(spot_price(mint_burn_proportional(p, f)) ==
              Approx(spot_price(p)).epsilon(1e-12));
    }
}

TEST_CASE("price-taking arbitrage matches the case study") {
    auto before = arbitrage_profit(2.0, 1.5, 100.0);
    CHECK(before.direction == ArbDirection::BuyExternalSellPool);
    CHECK(before.profit == Approx(50.0));

    auto after = arbitrage_profit(1600.0 / 1200.0, 1.5, 100.0);
    CHECK(after.direction == ArbDirection::BuyPoolSellExternal);
    CHECK(after.profit == Approx(16.6666667).epsilon(1e-6));

    auto flat = arbitrage_profit(1.5, 1.5, 100.0);
    CHECK(flat.direction == ArbDirection::None);
    CHECK(flat.profit == 0.0);
}

TEST_CASE("arbitrage profit is antisymmetric in the two prices", "[property]") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const double a = rng.uniform(0.01, 100.0);
        const double b = rng.uniform(0.01, 100.0);
        const double q = rng.uniform(0.1, 1000.0);
        auto fwd = arbitrage_profit(a, b, q);
        auto rev = arbitrage_profit(b, a, q);
        CHECK(fwd.profit == Approx(rev.profit).margin(1e-12));
        if (fwd.direction == ArbDirection::BuyExternalSellPool) {
            CHECK(rev.direction == ArbDirection::BuyPoolSellExternal);
        }
    }
}

TEST_CASE("pendle ratio signal tracks implied yield direction") {
    PoolState before = PoolState::make(1000.0, 2000.0);
    PoolState after = PoolState::make(1200.0, 1600.0);
    CHECK(pendle_ratio_signal(before, after) == RatioSignal::ImpliedYieldUp);
    CHECK(pendle_ratio_signal(after, before) == RatioSignal::ImpliedYieldDown);
    CHECK(pendle_ratio_signal(before, before) == RatioSignal::Neutral);
}
