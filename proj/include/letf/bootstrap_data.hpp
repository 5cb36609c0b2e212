#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "letf/market_models.hpp"

namespace letf {

using Date = std::chrono::year_month_day;

enum class Frequency { daily, monthly };

std::string format_date(const Date& d);
std::string format_month(const Date& d);

struct ReturnSeries {
  Frequency frequency = Frequency::monthly;
  std::string label;
  std::vector<Date> dates;      // monthly series use month-end dates
  std::vector<double> returns;  // simple returns per period

  std::size_t size() const { return returns.size(); }
};

// Reads a `date,return` CSV. Monthly dates may be YYYY-MM or YYYY-MM-DD and are
// moved to month end. Throws ParseError with the offending line number.
ReturnSeries load_series(const std::string& path, Frequency freq, const std::string& label = "");
ReturnSeries parse_series(std::istream& in, const std::string& source, Frequency freq,
                          const std::string& label = "");
void write_series(std::ostream& out, const ReturnSeries& s);

// Daily to monthly by compounding within each calendar month.
ReturnSeries compound_monthly(const ReturnSeries& daily);
// (1 + nominal) / (1 + inflation) - 1, matched by month.
ReturnSeries deflate(const ReturnSeries& nominal, const ReturnSeries& inflation);

// Monthly real return of a fund that delivers beta times the daily index
// return, pays (beta - 1) times the T-bill rate on the borrowed part and the
// expense ratio, and cannot lose more than everything on any day.
ReturnSeries build_proxy_etf(const ReturnSeries& index_daily, const ReturnSeries& tbill,
                             const EtfSpec& spec, const ReturnSeries& inflation);

// Monthly returns of several assets on one calendar.
struct AlignedSource {
  std::vector<std::string> labels;
  std::vector<Date> months;
  std::vector<double> returns;  // [month][asset]

  std::size_t n_assets() const { return labels.size(); }
  std::size_t n_months() const { return months.size(); }
  double at(std::size_t month, std::size_t asset) const {
    return returns[month * labels.size() + asset];
  }
  std::size_t asset_index(const std::string& label) const;
  std::vector<double> column(std::size_t asset) const;
  // Months of calendar years first..last inclusive; ConfigError if not covered.
  AlignedSource slice(int first_year, int last_year) const;
};

// All series must be monthly on identical dates.
AlignedSource align(const std::vector<ReturnSeries>& series);

// Five-asset real-return source: T30, B10, Market, VETF, LETF.
AlignedSource build_source_panel(const ReturnSeries& index_daily, const ReturnSeries& t30,
                                 const ReturnSeries& b10, const ReturnSeries& inflation,
                                 const EtfSpec& vetf, const EtfSpec& letf);

struct BootstrapConfig {
  double expected_block_size = 3.0;  // months
  std::size_t n_paths = 1000;
  double horizon = 10.0;             // years
  double rebalance_interval = 0.25;  // years
  std::uint64_t seed = 0;
  std::optional<std::size_t> forced_start;  // first source month of every path
  bool keep_provenance = false;

  void validate() const;
  std::size_t months_per_step() const;
  std::size_t n_steps() const;
};

// Joint gross returns per rebalancing interval.
struct ReturnsPanel {
  std::vector<std::string> labels;
  std::size_t n_paths = 0;
  std::size_t n_steps = 0;
  double dt = 0.25;
  std::vector<double> gross;               // [path][step][asset]
  std::vector<std::uint32_t> provenance;   // [path][month] source month, if kept

  std::size_t n_assets() const { return labels.size(); }
  double at(std::size_t path, std::size_t step, std::size_t asset) const {
    return gross[(path * n_steps + step) * labels.size() + asset];
  }
  const double* path_data(std::size_t path) const {
    return gross.data() + path * n_steps * labels.size();
  }
  std::size_t asset_index(const std::string& label) const;
  // Paths [begin, end) as a new panel.
  ReturnsPanel slice_paths(std::size_t begin, std::size_t end) const;
};

ReturnsPanel stationary_block_bootstrap(const AlignedSource& source, const BootstrapConfig& cfg);

// One path made of the source months in order, compounded per interval.
ReturnsPanel contiguous_panel(const AlignedSource& source, double rebalance_interval);

double apply_borrowing_premium(double tbill_return, double b, bool shorted);

void write_panel(std::ostream& out, const ReturnsPanel& panel);
ReturnsPanel read_panel(std::istream& in);

struct SyntheticConfig {
  KouParams model = KouParams::calibrated_kou();
  double t30_noise_sd = 0.0005;  // monthly AR(1) innovation sd
  double t30_ar = 0.9;
  double b10_term_premium = 0.02;  // annual
  double b10_noise_sd = 0.02;      // monthly
  double inflation = 0.0;          // annual; returns are treated as real when 0
  int years = 98;
  int start_year = 1926;
};

struct SyntheticSource {
  ReturnSeries index_daily;
  ReturnSeries t30;
  ReturnSeries b10;
  ReturnSeries inflation;
};

// Weekday trading calendar; each month spans 1/12 year split evenly over its days.
SyntheticSource synthetic_source(const SyntheticConfig& cfg, std::uint64_t seed);

// Panel drawn directly from the model: T30 (e^{r dt}), Market, VETF, LETF.
// Each interval uses the exact index law; ETF returns follow from it.
ReturnsPanel model_panel(const KouParams& p, const EtfSpec& vetf, const EtfSpec& letf,
                         std::size_t n_paths, double horizon, double dt, std::uint64_t seed);

struct HistoricalWindow {
  std::string name;
  int first_year;
  int last_year;
};

std::vector<HistoricalWindow> replay_windows();

}  // namespace letf
