#pragma once

#include <span>
#include <vector>

// Technical indicators over daily bars. Every function returns one value per
// input day; days before the indicator is defined hold NaN.
namespace netpred::indicators {

std::vector<double> sma(std::span<const double> x, std::size_t period);

/// Exponential moving average seeded with the first input value,
/// alpha = 2 / (period + 1). Defined from day 0.
std::vector<double> ema(std::span<const double> x, std::size_t period);

/// Wilder RSI: first averages are simple means of the first `period` changes,
/// then avg = (prev * (period - 1) + current) / period. First value at day `period`.
std::vector<double> rsi(std::span<const double> close, std::size_t period = 14);

/// Commodity channel index on the typical price, constant 0.015.
std::vector<double> cci(std::span<const double> high, std::span<const double> low,
                        std::span<const double> close, std::size_t period = 20);

/// Wilder ADX. First value at day 2 * period - 1.
std::vector<double> adx(std::span<const double> high, std::span<const double> low,
                        std::span<const double> close, std::size_t period = 14);

/// Money flow index. First value at day `period`.
std::vector<double> mfi(std::span<const double> high, std::span<const double> low,
                        std::span<const double> close, std::span<const double> volume,
                        std::size_t period = 14);

/// Wilder parabolic stop-and-reverse. First value at day 1.
std::vector<double> parabolic_sar(std::span<const double> high, std::span<const double> low,
                                  std::span<const double> close, double step = 0.02,
                                  double max_step = 0.2);

struct Stochastic {
  std::vector<double> slow_k;
  std::vector<double> slow_d;
};

/// Slow stochastic: fast %K over `period` days, slow %K = SMA(fast %K, smooth),
/// slow %D = SMA(slow %K, smooth).
Stochastic slow_stochastic(std::span<const double> high, std::span<const double> low,
                           std::span<const double> close, std::size_t period = 14,
                           std::size_t smooth = 3);

struct Bands {
  std::vector<double> middle;
  std::vector<double> upper;
  std::vector<double> lower;
};

/// Bollinger bands with population standard deviation.
Bands bollinger(std::span<const double> close, std::size_t period = 20, double width = 2.0);

struct Macd {
  std::vector<double> line;
  std::vector<double> signal;
};

Macd macd(std::span<const double> close, std::size_t fast = 12, std::size_t slow = 26,
          std::size_t signal = 9);

}  // namespace netpred::indicators
