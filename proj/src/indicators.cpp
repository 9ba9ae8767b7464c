#include "netpred/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace netpred::indicators {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> typical_price(std::span<const double> high, std::span<const double> low,
                                  std::span<const double> close) {
  std::vector<double> tp(close.size());
  for (std::size_t t = 0; t < close.size(); ++t) tp[t] = (high[t] + low[t] + close[t]) / 3.0;
  return tp;
}

}  // namespace

std::vector<double> sma(std::span<const double> x, std::size_t period) {
  std::vector<double> out(x.size(), kNaN);
  if (period == 0) return out;
  std::size_t run = 0;  // consecutive finite values ending at t
  for (std::size_t t = 0; t < x.size(); ++t) {
    run = std::isfinite(x[t]) ? run + 1 : 0;
    if (run < period) continue;
    double sum = 0.0;
    for (std::size_t k = t + 1 - period; k <= t; ++k) sum += x[k];
    out[t] = sum / static_cast<double>(period);
  }
  return out;
}

std::vector<double> ema(std::span<const double> x, std::size_t period) {
  std::vector<double> out(x.size(), kNaN);
  if (x.empty()) return out;
  const double alpha = 2.0 / (static_cast<double>(period) + 1.0);
  out[0] = x[0];
  for (std::size_t t = 1; t < x.size(); ++t) out[t] = alpha * x[t] + (1.0 - alpha) * out[t - 1];
  return out;
}

std::vector<double> rsi(std::span<const double> close, std::size_t period) {
  std::vector<double> out(close.size(), kNaN);
  if (period == 0 || close.size() <= period) return out;
  const double p = static_cast<double>(period);
  auto value = [](double gain, double loss) {
    if (loss == 0.0) return gain == 0.0 ? 50.0 : 100.0;
    return 100.0 - 100.0 / (1.0 + gain / loss);
  };
  double gain = 0.0, loss = 0.0;
  for (std::size_t t = 1; t <= period; ++t) {
    const double change = close[t] - close[t - 1];
    if (change > 0) gain += change;
    else loss -= change;
  }
  gain /= p;
  loss /= p;
  out[period] = value(gain, loss);
  for (std::size_t t = period + 1; t < close.size(); ++t) {
    const double change = close[t] - close[t - 1];
    gain = (gain * (p - 1.0) + std::max(change, 0.0)) / p;
    loss = (loss * (p - 1.0) + std::max(-change, 0.0)) / p;
    out[t] = value(gain, loss);
  }
  return out;
}

std::vector<double> cci(std::span<const double> high, std::span<const double> low,
                        std::span<const double> close, std::size_t period) {
  const auto tp = typical_price(high, low, close);
  const auto mean = sma(tp, period);
  std::vector<double> out(close.size(), kNaN);
  for (std::size_t t = 0; t < close.size(); ++t) {
    if (!std::isfinite(mean[t])) continue;
    double deviation = 0.0;
    for (std::size_t k = t + 1 - period; k <= t; ++k) deviation += std::abs(tp[k] - mean[t]);
    deviation /= static_cast<double>(period);
    out[t] = deviation == 0.0 ? 0.0 : (tp[t] - mean[t]) / (0.015 * deviation);
  }
  return out;
}

std::vector<double> adx(std::span<const double> high, std::span<const double> low,
                        std::span<const double> close, std::size_t period) {
  const std::size_t n = close.size();
  std::vector<double> out(n, kNaN);
  if (period == 0 || n < 2 * period) return out;
  const double p = static_cast<double>(period);

  std::vector<double> tr(n, 0.0), plus_dm(n, 0.0), minus_dm(n, 0.0);
  for (std::size_t t = 1; t < n; ++t) {
    tr[t] = std::max({high[t] - low[t], std::abs(high[t] - close[t - 1]),
                      std::abs(low[t] - close[t - 1])});
    const double up = high[t] - high[t - 1];
    const double down = low[t - 1] - low[t];
    plus_dm[t] = (up > down && up > 0) ? up : 0.0;
    minus_dm[t] = (down > up && down > 0) ? down : 0.0;
  }

  double tr_s = 0.0, plus_s = 0.0, minus_s = 0.0;
  for (std::size_t t = 1; t <= period; ++t) {
    tr_s += tr[t];
    plus_s += plus_dm[t];
    minus_s += minus_dm[t];
  }
  auto dx = [&] {
    if (tr_s == 0.0) return 0.0;
    const double plus_di = 100.0 * plus_s / tr_s;
    const double minus_di = 100.0 * minus_s / tr_s;
    const double total = plus_di + minus_di;
    return total == 0.0 ? 0.0 : 100.0 * std::abs(plus_di - minus_di) / total;
  };

  std::vector<double> dx_values(n, kNaN);
  dx_values[period] = dx();
  for (std::size_t t = period + 1; t < n; ++t) {
    tr_s = tr_s - tr_s / p + tr[t];
    plus_s = plus_s - plus_s / p + plus_dm[t];
    minus_s = minus_s - minus_s / p + minus_dm[t];
    dx_values[t] = dx();
  }

  const std::size_t first = 2 * period - 1;
  double value = 0.0;
  for (std::size_t t = period; t <= first; ++t) value += dx_values[t];
  value /= p;
  out[first] = value;
  for (std::size_t t = first + 1; t < n; ++t) {
    value = (value * (p - 1.0) + dx_values[t]) / p;
    out[t] = value;
  }
  return out;
}

std::vector<double> mfi(std::span<const double> high, std::span<const double> low,
                        std::span<const double> close, std::span<const double> volume,
                        std::size_t period) {
  const std::size_t n = close.size();
  std::vector<double> out(n, kNaN);
  if (period == 0 || n <= period) return out;
  const auto tp = typical_price(high, low, close);
  std::vector<double> positive(n, 0.0), negative(n, 0.0);
  for (std::size_t t = 1; t < n; ++t) {
    const double flow = tp[t] * volume[t];
    if (tp[t] > tp[t - 1]) positive[t] = flow;
    else if (tp[t] < tp[t - 1]) negative[t] = flow;
  }
  for (std::size_t t = period; t < n; ++t) {
    double pos = 0.0, neg = 0.0;
    for (std::size_t k = t + 1 - period; k <= t; ++k) {
      pos += positive[k];
      neg += negative[k];
    }
    if (neg == 0.0) out[t] = pos == 0.0 ? 50.0 : 100.0;
    else out[t] = 100.0 - 100.0 / (1.0 + pos / neg);
  }
  return out;
}

std::vector<double> parabolic_sar(std::span<const double> high, std::span<const double> low,
                                  std::span<const double> close, double step, double max_step) {
  const std::size_t n = close.size();
  std::vector<double> out(n, kNaN);
  if (n < 2) return out;
  bool rising = close[1] >= close[0];
  double sar = rising ? std::min(low[0], low[1]) : std::max(high[0], high[1]);
  double extreme = rising ? high[1] : low[1];
  double factor = step;
  out[1] = sar;
  for (std::size_t t = 2; t < n; ++t) {
    double next = sar + factor * (extreme - sar);
    if (rising) {
      next = std::min({next, low[t - 1], low[t - 2]});
      if (low[t] < next) {
        rising = false;
        next = extreme;
        extreme = low[t];
        factor = step;
      } else if (high[t] > extreme) {
        extreme = high[t];
        factor = std::min(factor + step, max_step);
      }
    } else {
      next = std::max({next, high[t - 1], high[t - 2]});
      if (high[t] > next) {
        rising = true;
        next = extreme;
        extreme = high[t];
        factor = step;
      } else if (low[t] < extreme) {
        extreme = low[t];
        factor = std::min(factor + step, max_step);
      }
    }
    sar = next;
    out[t] = sar;
  }
  return out;
}

Stochastic slow_stochastic(std::span<const double> high, std::span<const double> low,
                           std::span<const double> close, std::size_t period,
                           std::size_t smooth) {
  const std::size_t n = close.size();
  std::vector<double> fast(n, kNaN);
  for (std::size_t t = period > 0 ? period - 1 : n; t < n; ++t) {
    double hh = high[t], ll = low[t];
    for (std::size_t k = t + 1 - period; k <= t; ++k) {
      hh = std::max(hh, high[k]);
      ll = std::min(ll, low[k]);
    }
    fast[t] = hh == ll ? 50.0 : 100.0 * (close[t] - ll) / (hh - ll);
  }
  Stochastic out;
  out.slow_k = sma(fast, smooth);
  out.slow_d = sma(out.slow_k, smooth);
  return out;
}

Bands bollinger(std::span<const double> close, std::size_t period, double width) {
  Bands out;
  out.middle = sma(close, period);
  out.upper.assign(close.size(), kNaN);
  out.lower.assign(close.size(), kNaN);
  for (std::size_t t = 0; t < close.size(); ++t) {
    if (!std::isfinite(out.middle[t])) continue;
    double var = 0.0;
    for (std::size_t k = t + 1 - period; k <= t; ++k) {
      const double d = close[k] - out.middle[t];
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(period));
    out.upper[t] = out.middle[t] + width * sd;
    out.lower[t] = out.middle[t] - width * sd;
  }
  return out;
}

Macd macd(std::span<const double> close, std::size_t fast, std::size_t slow, std::size_t signal) {
  const auto fast_ema = ema(close, fast);
  const auto slow_ema = ema(close, slow);
  Macd out;
  out.line.resize(close.size());
  for (std::size_t t = 0; t < close.size(); ++t) out.line[t] = fast_ema[t] - slow_ema[t];
  out.signal = ema(out.line, signal);
  return out;
}

}  // namespace netpred::indicators
