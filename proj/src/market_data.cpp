#include "netpred/market_data.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "netpred/errors.hpp"
#include "netpred/indicators.hpp"

namespace netpred {

// ---------------------------------------------------------------------------
// Dates and calendar

Date::Date(int year, unsigned month, unsigned day) {
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                        std::chrono::day{day}};
  if (!ymd.ok()) throw InputError("invalid date");
  days_ = std::chrono::sys_days{ymd};
}

Date Date::parse(std::string_view iso) {
  auto fail = [&] { return ParseError("invalid date '" + std::string(iso) + "'", 0); };
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') throw fail();
  int year = 0;
  unsigned month = 0, day = 0;
  auto read = [&](std::size_t pos, std::size_t len, auto& out) {
    const auto* first = iso.data() + pos;
    const auto [ptr, ec] = std::from_chars(first, first + len, out);
    if (ec != std::errc{} || ptr != first + len) throw fail();
  };
  read(0, 4, year);
  read(5, 2, month);
  read(8, 2, day);
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                        std::chrono::day{day}};
  if (!ymd.ok()) throw fail();
  return Date(std::chrono::sys_days{ymd});
}

std::string Date::iso() const {
  const std::chrono::year_month_day ymd{days_};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

Calendar::Calendar(std::vector<Date> days) : days_(std::move(days)) {
  for (std::size_t i = 1; i < days_.size(); ++i)
    if (!(days_[i - 1] < days_[i])) throw InputError("calendar dates must be strictly increasing");
}

std::optional<DayIndex> Calendar::find(const Date& d) const {
  const auto it = std::lower_bound(days_.begin(), days_.end(), d);
  if (it == days_.end() || *it != d) return std::nullopt;
  return static_cast<DayIndex>(it - days_.begin());
}

DayIndex Calendar::index_of(const Date& d) const {
  if (auto i = find(d)) return *i;
  throw InputError(d.iso() + " is not a trading day of the calendar");
}

// ---------------------------------------------------------------------------
// Bars

void BarSeries::validate() const {
  const std::size_t n = dates.size();
  if (open.size() != n || high.size() != n || low.size() != n || close.size() != n ||
      volume.size() != n)
    throw InputError(symbol + ": column lengths differ");
  for (std::size_t t = 0; t < n; ++t) {
    const std::string where = symbol + " " + dates[t].iso() + ": ";
    if (t > 0 && !(dates[t - 1] < dates[t]))
      throw InputError(where + "dates not strictly increasing");
    if (!(high[t] >= std::max(open[t], close[t])))
      throw InputError(where + "high below open/close");
    if (!(low[t] <= std::min(open[t], close[t]))) throw InputError(where + "low above open/close");
    if (!(volume[t] >= 0.0)) throw InputError(where + "negative volume");
  }
}

const BarSeries* BarSet::find(std::string_view symbol) const {
  const auto it = std::lower_bound(series.begin(), series.end(), symbol,
                                   [](const BarSeries& s, std::string_view v) { return s.symbol < v; });
  if (it == series.end() || it->symbol != symbol) return nullptr;
  return &*it;
}

const BarSeries& BarSet::at(std::string_view symbol) const {
  if (const auto* s = find(symbol)) return *s;
  throw InputError("no bars for symbol '" + std::string(symbol) + "'");
}

namespace {

struct Bar {
  double open, high, low, close, volume;
};

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

double parse_number(std::string_view field, std::size_t line, const char* column) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(value))
    throw ParseError(std::string("invalid ") + column + " '" + std::string(field) + "'", line);
  return value;
}

}  // namespace

BarSet parse_bars(std::istream& in, const std::optional<std::vector<Date>>& calendar_filter,
                  std::size_t max_fill) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty bars file", 0);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "symbol,date,open,high,low,close,volume")
    throw ParseError("expected header 'symbol,date,open,high,low,close,volume'", line_no);

  std::map<std::string, std::map<Date, Bar>> raw;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 7)
      throw ParseError("expected 7 fields, found " + std::to_string(fields.size()), line_no);
    if (fields[0].empty()) throw ParseError("empty symbol", line_no);
    Date date;
    try {
      date = Date::parse(fields[1]);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
    const Bar bar{parse_number(fields[2], line_no, "open"), parse_number(fields[3], line_no, "high"),
                  parse_number(fields[4], line_no, "low"), parse_number(fields[5], line_no, "close"),
                  parse_number(fields[6], line_no, "volume")};
    if (bar.high < std::max(bar.open, bar.close))
      throw ParseError("high below max(open, close)", line_no);
    if (bar.low > std::min(bar.open, bar.close))
      throw ParseError("low above min(open, close)", line_no);
    if (bar.volume < 0) throw ParseError("negative volume", line_no);
    if (bar.close <= 0 || bar.open <= 0 || bar.low <= 0)
      throw ParseError("prices must be positive", line_no);
    auto& by_date = raw[std::string(fields[0])];
    if (!by_date.emplace(date, bar).second)
      throw ParseError("duplicate row for " + std::string(fields[0]) + " " + date.iso(), line_no);
  }
  if (raw.empty()) throw ParseError("no data rows", line_no);

  Date first = raw.begin()->second.begin()->first;
  Date last = raw.begin()->second.rbegin()->first;
  for (const auto& [symbol, rows] : raw) {
    first = std::max(first, rows.begin()->first);
    last = std::min(last, rows.rbegin()->first);
  }
  std::set<Date> all;
  for (const auto& [symbol, rows] : raw)
    for (const auto& [d, bar] : rows)
      if (d >= first && d <= last) all.insert(d);
  if (calendar_filter) {
    const std::set<Date> allowed(calendar_filter->begin(), calendar_filter->end());
    std::erase_if(all, [&](const Date& d) { return !allowed.contains(d); });
  }

  BarSet out;
  out.calendar = Calendar(std::vector<Date>(all.begin(), all.end()));
  for (const auto& [symbol, rows] : raw) {
    BarSeries s;
    s.symbol = symbol;
    std::optional<Bar> previous;
    if (!out.calendar.days().empty()) {
      auto it = rows.lower_bound(out.calendar[0]);
      if (it != rows.begin()) previous = std::prev(it)->second;
    }
    std::size_t gap = 0;
    for (const Date& d : out.calendar.days()) {
      const auto it = rows.find(d);
      Bar bar;
      if (it != rows.end()) {
        bar = it->second;
        gap = 0;
      } else {
        if (++gap > max_fill || !previous)
          throw CoverageError(symbol, "more than " + std::to_string(max_fill) +
                                          " consecutive missing days ending " + d.iso());
        const double c = previous->close;
        bar = Bar{c, c, c, c, 0.0};
      }
      s.dates.push_back(d);
      s.open.push_back(bar.open);
      s.high.push_back(bar.high);
      s.low.push_back(bar.low);
      s.close.push_back(bar.close);
      s.volume.push_back(bar.volume);
      previous = bar;
    }
    out.series.push_back(std::move(s));
  }
  return out;
}

BarSet load_bars(const std::filesystem::path& path,
                 const std::optional<std::vector<Date>>& calendar_filter, std::size_t max_fill) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open bars file " + path.string());
  return parse_bars(in, calendar_filter, max_fill);
}

void write_bars_csv(std::ostream& out, const BarSet& bars) {
  out << "symbol,date,open,high,low,close,volume\n";
  out << std::setprecision(17);
  for (const auto& s : bars.series)
    for (std::size_t t = 0; t < s.size(); ++t)
      out << s.symbol << ',' << s.dates[t].iso() << ',' << s.open[t] << ',' << s.high[t] << ','
          << s.low[t] << ',' << s.close[t] << ',' << s.volume[t] << '\n';
}

// ---------------------------------------------------------------------------
// Manifest

void UniverseManifest::validate(std::size_t constituents_per_index) const {
  std::set<std::string> ids;
  for (const auto& index : indices) {
    if (index.id.empty()) throw InputError("index with empty id");
    if (!ids.insert(index.id).second) throw InputError("duplicate index id " + index.id);
    if (index.constituents.empty()) throw InputError(index.id + ": no constituents");
    std::set<std::string> seen;
    for (const auto& s : index.constituents)
      if (!seen.insert(s).second) throw InputError(index.id + ": duplicate constituent " + s);
    if (constituents_per_index && index.constituents.size() != constituents_per_index)
      throw InputError(index.id + ": expected " + std::to_string(constituents_per_index) +
                       " constituents, found " + std::to_string(index.constituents.size()));
    if (index.weighting == Weighting::CapWeighted)
      for (const auto& s : index.constituents) {
        const auto it = market_caps.find(s);
        if (it == market_caps.end() || !(it->second > 0))
          throw InputError(index.id + ": missing or non-positive market cap for " + s);
      }
  }
}

std::vector<std::string> UniverseManifest::stocks() const {
  std::set<std::string> all;
  for (const auto& index : indices) all.insert(index.constituents.begin(), index.constituents.end());
  return {all.begin(), all.end()};
}

const IndexSpec& UniverseManifest::index(std::string_view id) const {
  for (const auto& i : indices)
    if (i.id == id) return i;
  throw InputError("unknown index '" + std::string(id) + "'");
}

UniverseManifest parse_manifest(std::string_view json_text) {
  UniverseManifest m;
  try {
    const auto doc = nlohmann::json::parse(json_text);
    for (const auto& entry : doc.at("indices")) {
      IndexSpec spec;
      spec.id = entry.at("id").get<std::string>();
      const auto weighting = entry.at("weighting").get<std::string>();
      if (weighting == "cap") spec.weighting = Weighting::CapWeighted;
      else if (weighting == "price") spec.weighting = Weighting::PriceWeighted;
      else throw InputError(spec.id + ": unknown weighting '" + weighting + "'");
      spec.constituents = entry.at("constituents").get<std::vector<std::string>>();
      m.indices.push_back(std::move(spec));
    }
    if (doc.contains("market_caps"))
      m.market_caps = doc.at("market_caps").get<std::map<std::string, double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what(), 0);
  }
  return m;
}

UniverseManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

std::string manifest_to_json(const UniverseManifest& manifest) {
  nlohmann::json doc;
  doc["indices"] = nlohmann::json::array();
  for (const auto& index : manifest.indices)
    doc["indices"].push_back({{"id", index.id},
                              {"weighting", index.weighting == Weighting::CapWeighted ? "cap" : "price"},
                              {"constituents", index.constituents}});
  doc["market_caps"] = manifest.market_caps;
  return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Labels and features

Movement movement_label(const BarSeries& bars, DayIndex day) {
  if (day == 0) throw InputError(bars.symbol + ": no predecessor for the first day");
  if (day >= bars.size()) throw InputError(bars.symbol + ": day outside series");
  return movement_of(bars.close[day] - bars.close[day - 1]);
}

namespace {

constexpr std::array<std::string_view, 23> kClassicNames = {
    "OP",    "HP",    "LP",  "CP",    "Volume", "CCI",  "CCI-S", "ADX",    "ADX-S",
    "MFI",   "MFI-S", "RSI", "RSI-S", "SAR",    "SAR-S", "SD",   "SK",     "BB-S",
    "V-S",   "S-S",   "CPOP-S", "MACD-S", "CPCPY-S"};

constexpr std::array<std::string_view, 11> kSignalNames = {
    "CCI-S", "ADX-S", "MFI-S", "RSI-S", "SAR-S", "BB-S", "V-S", "S-S", "CPOP-S", "MACD-S", "CPCPY-S"};

double sign_of(double change) { return change >= 0.0 ? 1.0 : -1.0; }

}  // namespace

std::span<const std::string_view> feature_names(FeatureProfile profile) {
  if (profile == FeatureProfile::Classic) return kClassicNames;
  return kSignalNames;
}

std::string_view profile_name(FeatureProfile profile) {
  return profile == FeatureProfile::Classic ? "classic" : "signal";
}

FeatureFrame::FeatureFrame(std::string symbol, FeatureProfile profile, DayIndex first_day,
                           Matrix values)
    : symbol_(std::move(symbol)), profile_(profile), first_day_(first_day), values_(std::move(values)) {
  if (values_.cols() != static_cast<Eigen::Index>(feature_names(profile_).size()))
    throw InputError("feature matrix width does not match profile");
}

std::span<const double> FeatureFrame::row(DayIndex d) const {
  if (!covers(d)) throw InputError(symbol_ + ": no features for day " + std::to_string(d));
  return {values_.data() + (d - first_day_) * dimension(), dimension()};
}

double FeatureFrame::value(DayIndex d, std::string_view feature) const {
  const auto names = feature_names(profile_);
  const auto it = std::find(names.begin(), names.end(), feature);
  if (it == names.end()) throw InputError("unknown feature " + std::string(feature));
  return row(d)[static_cast<std::size_t>(it - names.begin())];
}

bool FeatureFrame::operator==(const FeatureFrame& other) const {
  return symbol_ == other.symbol_ && profile_ == other.profile_ && first_day_ == other.first_day_ &&
         values_.rows() == other.values_.rows() && values_.cols() == other.values_.cols() &&
         std::equal(values_.data(), values_.data() + values_.size(), other.values_.data());
}

FeatureFrame compute_features(const BarSeries& bars, FeatureProfile profile) {
  const std::size_t n = bars.size();
  if (n < kMinFeatureHistory)
    throw InsufficientHistoryError(bars.symbol + ": " + std::to_string(n) +
                                   " trading days, need at least " +
                                   std::to_string(kMinFeatureHistory));
  namespace ind = indicators;
  const auto cci = ind::cci(bars.high, bars.low, bars.close, 20);
  const auto adx = ind::adx(bars.high, bars.low, bars.close, 14);
  const auto mfi = ind::mfi(bars.high, bars.low, bars.close, bars.volume, 14);
  const auto rsi = ind::rsi(bars.close, 14);
  const auto sar = ind::parabolic_sar(bars.high, bars.low, bars.close, 0.02, 0.2);
  const auto stoch = ind::slow_stochastic(bars.high, bars.low, bars.close, 14, 3);
  const auto bands = ind::bollinger(bars.close, 20, 2.0);
  const auto macd = ind::macd(bars.close, 12, 26, 9);

  const std::size_t width = feature_names(profile).size();
  FeatureFrame::Matrix values(static_cast<Eigen::Index>(n - kFeatureWarmup),
                              static_cast<Eigen::Index>(width));
  for (std::size_t t = kFeatureWarmup; t < n; ++t) {
    double volume_avg = 0.0;
    for (std::size_t k = t - 5; k < t; ++k) volume_avg += bars.volume[k];
    volume_avg /= 5.0;

    const double cci_s = sign_of(cci[t]);
    const double adx_s = sign_of(adx[t] - adx[t - 1]);
    const double mfi_s = sign_of(mfi[t] - 50.0);
    const double rsi_s = sign_of(rsi[t] - 50.0);
    const double sar_s = sign_of(bars.close[t] - sar[t]);
    const double bb_s = sign_of(bars.close[t] - bands.middle[t]);
    const double v_s = sign_of(bars.volume[t] - volume_avg);
    const double s_s = sign_of(stoch.slow_k[t] - stoch.slow_d[t]);
    const double cpop_s = sign_of(bars.close[t] - bars.open[t]);
    const double macd_s = sign_of(macd.line[t] - macd.signal[t]);
    const double cpcpy_s = sign_of(bars.close[t] - bars.close[t - 1]);

    auto row = values.row(static_cast<Eigen::Index>(t - kFeatureWarmup));
    if (profile == FeatureProfile::Classic) {
      row << bars.open[t], bars.high[t], bars.low[t], bars.close[t], bars.volume[t], cci[t], cci_s,
          adx[t], adx_s, mfi[t], mfi_s, rsi[t], rsi_s, sar[t], sar_s, stoch.slow_d[t],
          stoch.slow_k[t], bb_s, v_s, s_s, cpop_s, macd_s, cpcpy_s;
    } else {
      row << cci_s, adx_s, mfi_s, rsi_s, sar_s, bb_s, v_s, s_s, cpop_s, macd_s, cpcpy_s;
    }
  }
  if (!values.allFinite()) throw InputError(bars.symbol + ": non-finite feature value");
  return FeatureFrame(bars.symbol, profile, kFeatureWarmup, std::move(values));
}

// ---------------------------------------------------------------------------
// Audited access

void AccessAudit::record(DayIndex day, bool is_label) {
  auto& reads = is_label ? label_reads_ : feature_reads_;
  auto& latest = is_label ? latest_label_day_ : latest_feature_day_;
  reads.fetch_add(1, std::memory_order_relaxed);
  const auto d = static_cast<std::int64_t>(day);
  auto current = latest.load(std::memory_order_relaxed);
  while (current < d && !latest.compare_exchange_weak(current, d, std::memory_order_relaxed)) {
  }
}

std::span<const double> FeatureView::row(DayIndex d) const {
  if (d >= horizon_) {
    if (audit_) audit_->record_violation();
    throw LookaheadError(frame_->symbol() + ": feature read for day " + std::to_string(d) +
                         " at or after horizon " + std::to_string(horizon_));
  }
  auto r = frame_->row(d);
  if (audit_) audit_->record(d, false);
  return r;
}

LabelSeries LabelSeries::from_bars(const BarSeries& bars) {
  LabelSeries out;
  out.symbol = bars.symbol;
  out.values.assign(bars.size(), Movement::Rise);
  for (DayIndex d = 1; d < bars.size(); ++d) out.values[d] = movement_label(bars, d);
  return out;
}

Movement LabelView::at(DayIndex d) const {
  if (d >= horizon_) {
    if (audit_) audit_->record_violation();
    throw LookaheadError(labels_->symbol + ": label read for day " + std::to_string(d) +
                         " at or after horizon " + std::to_string(horizon_));
  }
  if (d == 0 || d >= labels_->values.size())
    throw InputError(labels_->symbol + ": no label for day " + std::to_string(d));
  if (audit_) audit_->record(d, true);
  return labels_->values[d];
}

// ---------------------------------------------------------------------------
// Windows and datasets

WindowSplit rolling_windows(const Calendar& calendar, DayIndex anchor, std::size_t train_len,
                            std::size_t validation_len) {
  if (train_len == 0 || validation_len == 0)
    throw InputError("train and validation lengths must be positive");
  if (anchor > calendar.size())
    throw WindowError("anchor day beyond calendar end", anchor, calendar.size());
  const std::size_t required = train_len + validation_len;
  if (anchor < required) throw WindowError("insufficient history before anchor day", required, anchor);
  WindowSplit split;
  split.validation = {anchor - validation_len, anchor};
  split.train = {anchor - required, anchor - validation_len};
  return split;
}

bool Dataset::has_both_classes(std::size_t min_each) const {
  std::size_t pos = 0, neg = 0;
  for (int v : y) (v > 0 ? pos : neg)++;
  return pos >= min_each && neg >= min_each;
}

Dataset next_day_dataset(const FeatureView& features, const LabelView& labels, DayRange targets) {
  Dataset out;
  const auto n = static_cast<Eigen::Index>(targets.size());
  out.X.resize(n, static_cast<Eigen::Index>(features.frame().dimension()));
  out.y.reserve(targets.size());
  Eigen::Index k = 0;
  for (DayIndex d = targets.begin; d < targets.end; ++d, ++k) {
    if (d == 0) throw InputError("target day 0 has no preceding features");
    const auto row = features.row(d - 1);
    for (std::size_t j = 0; j < row.size(); ++j) out.X(k, static_cast<Eigen::Index>(j)) = row[j];
    out.y.push_back(sign_value(labels.at(d)));
  }
  return out;
}

}  // namespace netpred
