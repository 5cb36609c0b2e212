#include "letf/bootstrap_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include <boost/random/normal_distribution.hpp>

#include "letf/error.hpp"

namespace letf {

using namespace std::chrono;

namespace {

Date month_end(const Date& d) { return Date{d.year() / d.month() / last}; }

int month_key(const Date& d) {
  return static_cast<int>(d.year()) * 12 + static_cast<int>(static_cast<unsigned>(d.month())) - 1;
}

Date month_from_key(int key) {
  return month_end(Date{year{key / 12}, month{static_cast<unsigned>(key % 12 + 1)}, day{1}});
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_int(const std::string& s, int& out) {
  if (s.empty()) return false;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

std::optional<Date> parse_date(const std::string& s, Frequency freq) {
  const auto parts_end = std::count(s.begin(), s.end(), '-');
  int y = 0, m = 0, d = 1;
  if (parts_end == 2) {
    const auto a = s.find('-'), b = s.find('-', a + 1);
    if (!parse_int(s.substr(0, a), y) || !parse_int(s.substr(a + 1, b - a - 1), m) ||
        !parse_int(s.substr(b + 1), d))
      return std::nullopt;
  } else if (parts_end == 1 && freq == Frequency::monthly) {
    const auto a = s.find('-');
    if (!parse_int(s.substr(0, a), y) || !parse_int(s.substr(a + 1), m)) return std::nullopt;
  } else {
    return std::nullopt;
  }
  if (m < 1 || m > 12 || d < 1 || d > 31) return std::nullopt;
  Date out{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!out.ok()) return std::nullopt;
  return freq == Frequency::monthly ? month_end(out) : out;
}

std::map<int, std::size_t> index_by_month(const ReturnSeries& s) {
  std::map<int, std::size_t> idx;
  for (std::size_t i = 0; i < s.size(); ++i) idx[month_key(s.dates[i])] = i;
  return idx;
}

void require_monthly(const ReturnSeries& s, const char* what) {
  if (s.frequency != Frequency::monthly)
    throw ConfigError(std::string(what) + " series must be monthly");
}

constexpr char kPanelMagic[8] = {'L', 'E', 'T', 'F', 'P', 'N', 'L', '1'};

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ConfigError("truncated panel file");
  return v;
}

}  // namespace

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

std::string format_month(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()));
  return buf;
}

ReturnSeries parse_series(std::istream& in, const std::string& source, Frequency freq,
                          const std::string& label) {
  ReturnSeries s;
  s.frequency = freq;
  s.label = label;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!header) {
      std::string h = t;
      h.erase(std::remove(h.begin(), h.end(), ' '), h.end());
      std::transform(h.begin(), h.end(), h.begin(), [](unsigned char c) { return std::tolower(c); });
      if (h != "date,return") throw ParseError(source, line_no, "expected header 'date,return'");
      header = true;
      continue;
    }
    const auto comma = t.find(',');
    if (comma == std::string::npos || t.find(',', comma + 1) != std::string::npos)
      throw ParseError(source, line_no, "expected two fields 'date,return'");
    const std::string ds = trim(t.substr(0, comma));
    const std::string rs = trim(t.substr(comma + 1));
    const auto date = parse_date(ds, freq);
    if (!date) throw ParseError(source, line_no, "bad date '" + ds + "'");
    double r = 0.0;
    const char* first = rs.data();
    if (!rs.empty() && rs.front() == '+') ++first;
    const auto res = std::from_chars(first, rs.data() + rs.size(), r);
    if (rs.empty() || res.ec != std::errc() || res.ptr != rs.data() + rs.size() || !std::isfinite(r))
      throw ParseError(source, line_no, "bad return '" + rs + "'");
    if (!(r > -1.0)) throw ParseError(source, line_no, "return " + rs + " is not above -1");
    if (!s.dates.empty()) {
      const Date& prev = s.dates.back();
      if (!(*date > prev)) throw ParseError(source, line_no, "dates not strictly increasing");
      if (freq == Frequency::monthly) {
        const int gap = month_key(*date) - month_key(prev);
        if (gap != 1)
          throw ParseError(source, line_no,
                           "gap: missing month " + format_month(month_from_key(month_key(prev) + 1)));
      } else {
        const auto days_apart = (sys_days{*date} - sys_days{prev}).count();
        if (days_apart > 10)
          throw ParseError(source, line_no, "gap: no observations between " + format_date(prev) +
                                                " and " + format_date(*date));
      }
    }
    s.dates.push_back(*date);
    s.returns.push_back(r);
  }
  if (!header) throw ParseError(source, line_no, "empty file, expected header 'date,return'");
  return s;
}

ReturnSeries load_series(const std::string& path, Frequency freq, const std::string& label) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return parse_series(in, path, freq, label);
}

void write_series(std::ostream& out, const ReturnSeries& s) {
  out << "date,return\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, s.returns[i]);
    out << format_date(s.dates[i]) << ',' << std::string_view(buf, static_cast<std::size_t>(r.ptr - buf))
        << '\n';
  }
}

ReturnSeries compound_monthly(const ReturnSeries& daily) {
  ReturnSeries out;
  out.frequency = Frequency::monthly;
  out.label = daily.label;
  int cur = std::numeric_limits<int>::min();
  double g = 1.0;
  for (std::size_t i = 0; i < daily.size(); ++i) {
    const int k = month_key(daily.dates[i]);
    if (k != cur) {
      if (cur != std::numeric_limits<int>::min()) {
        out.dates.push_back(month_from_key(cur));
        out.returns.push_back(g - 1.0);
      }
      cur = k;
      g = 1.0;
    }
    g *= 1.0 + daily.returns[i];
  }
  if (cur != std::numeric_limits<int>::min()) {
    out.dates.push_back(month_from_key(cur));
    out.returns.push_back(g - 1.0);
  }
  return out;
}

ReturnSeries deflate(const ReturnSeries& nominal, const ReturnSeries& inflation) {
  require_monthly(nominal, "nominal");
  require_monthly(inflation, "inflation");
  const auto idx = index_by_month(inflation);
  ReturnSeries out = nominal;
  for (std::size_t i = 0; i < nominal.size(); ++i) {
    const auto it = idx.find(month_key(nominal.dates[i]));
    if (it == idx.end())
      throw AlignmentError("no inflation observation for " + format_month(nominal.dates[i]));
    out.returns[i] = (1.0 + nominal.returns[i]) / (1.0 + inflation.returns[it->second]) - 1.0;
  }
  return out;
}

ReturnSeries build_proxy_etf(const ReturnSeries& index_daily, const ReturnSeries& tbill,
                             const EtfSpec& spec, const ReturnSeries& inflation) {
  spec.validate();
  if (index_daily.frequency != Frequency::daily) throw ConfigError("index series must be daily");
  require_monthly(tbill, "T-bill");
  require_monthly(inflation, "inflation");
  const auto bill_idx = index_by_month(tbill);
  const auto infl_idx = index_by_month(inflation);
  const double beta = spec.beta;

  ReturnSeries out;
  out.frequency = Frequency::monthly;
  std::size_t i = 0;
  while (i < index_daily.size()) {
    const int key = month_key(index_daily.dates[i]);
    std::size_t end = i;
    while (end < index_daily.size() && month_key(index_daily.dates[end]) == key) ++end;
    const auto b = bill_idx.find(key);
    const auto f = infl_idx.find(key);
    if (b == bill_idx.end())
      throw AlignmentError("no T-bill observation for " + format_month(month_from_key(key)));
    if (f == infl_idx.end())
      throw AlignmentError("no inflation observation for " + format_month(month_from_key(key)));
    const double n_days = static_cast<double>(end - i);
    const double bill_daily = std::pow(1.0 + tbill.returns[b->second], 1.0 / n_days) - 1.0;
    const double cost_daily = spec.expense_ratio / (12.0 * n_days);
    double g = 1.0;
    for (std::size_t d = i; d < end; ++d) {
      const double r =
          beta * index_daily.returns[d] - (beta - 1.0) * bill_daily - cost_daily;
      g *= 1.0 + std::max(-1.0, r);
    }
    out.dates.push_back(month_from_key(key));
    out.returns.push_back(g / (1.0 + inflation.returns[f->second]) - 1.0);
    i = end;
  }
  return out;
}

std::size_t AlignedSource::asset_index(const std::string& label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw ConfigError("unknown asset '" + label + "'");
  return static_cast<std::size_t>(it - labels.begin());
}

std::vector<double> AlignedSource::column(std::size_t asset) const {
  std::vector<double> c(n_months());
  for (std::size_t m = 0; m < n_months(); ++m) c[m] = at(m, asset);
  return c;
}

AlignedSource AlignedSource::slice(int first_year, int last_year) const {
  AlignedSource out;
  out.labels = labels;
  for (std::size_t m = 0; m < n_months(); ++m) {
    const int y = static_cast<int>(months[m].year());
    if (y < first_year || y > last_year) continue;
    out.months.push_back(months[m]);
    out.returns.insert(out.returns.end(), returns.begin() + static_cast<std::ptrdiff_t>(m * n_assets()),
                       returns.begin() + static_cast<std::ptrdiff_t>((m + 1) * n_assets()));
  }
  const auto want = static_cast<std::size_t>(last_year - first_year + 1) * 12;
  if (out.n_months() != want)
    throw ConfigError("source does not cover " + std::to_string(first_year) + "-" +
                      std::to_string(last_year));
  return out;
}

AlignedSource align(const std::vector<ReturnSeries>& series) {
  if (series.empty()) throw ConfigError("no series to align");
  AlignedSource out;
  for (const auto& s : series) {
    require_monthly(s, s.label.c_str());
    out.labels.push_back(s.label);
  }
  out.months = series.front().dates;
  for (const auto& s : series) {
    if (s.dates != out.months) {
      const std::size_t n = std::min(s.size(), out.months.size());
      std::size_t k = 0;
      while (k < n && s.dates[k] == out.months[k]) ++k;
      const std::string where = k < n ? format_month(out.months[k]) : "end of series";
      throw AlignmentError("series '" + s.label + "' is not aligned with '" +
                           series.front().label + "' at " + where);
    }
  }
  out.returns.resize(out.months.size() * series.size());
  for (std::size_t m = 0; m < out.months.size(); ++m)
    for (std::size_t a = 0; a < series.size(); ++a)
      out.returns[m * series.size() + a] = series[a].returns[m];
  return out;
}

AlignedSource build_source_panel(const ReturnSeries& index_daily, const ReturnSeries& t30,
                                 const ReturnSeries& b10, const ReturnSeries& inflation,
                                 const EtfSpec& vetf, const EtfSpec& letf) {
  ReturnSeries market = deflate(compound_monthly(index_daily), inflation);
  ReturnSeries v = build_proxy_etf(index_daily, t30, vetf, inflation);
  ReturnSeries l = build_proxy_etf(index_daily, t30, letf, inflation);
  // Restrict the bonds to the months covered by the index.
  auto restrict = [&](const ReturnSeries& s, const char* name) {
    const auto idx = index_by_month(s);
    ReturnSeries out;
    out.frequency = Frequency::monthly;
    for (const Date& d : market.dates) {
      const auto it = idx.find(month_key(d));
      if (it == idx.end())
        throw AlignmentError(std::string("no ") + name + " observation for " + format_month(d));
      out.dates.push_back(d);
      out.returns.push_back(s.returns[it->second]);
    }
    return deflate(out, inflation);
  };
  ReturnSeries t = restrict(t30, "T30");
  ReturnSeries b = restrict(b10, "B10");
  t.label = "T30";
  b.label = "B10";
  market.label = "Market";
  v.label = "VETF";
  l.label = "LETF";
  return align({t, b, market, v, l});
}

void BootstrapConfig::validate() const {
  if (!(expected_block_size >= 1.0)) throw ConfigError("expected block size must be >= 1 month");
  if (n_paths < 1) throw ConfigError("bootstrap needs at least one path");
  if (!(horizon > 0.0) || !(rebalance_interval > 0.0))
    throw ConfigError("horizon and rebalance interval must be positive");
  const double mps = rebalance_interval * 12.0;
  if (std::abs(mps - std::round(mps)) > 1e-9 || std::round(mps) < 1.0)
    throw ConfigError("rebalance interval must be a whole number of months");
  const double steps = horizon / rebalance_interval;
  if (std::abs(steps - std::round(steps)) > 1e-9)
    throw ConfigError("horizon must be a whole number of rebalance intervals");
  const double months = std::round(steps) * std::round(mps);
  if (months > static_cast<double>(std::numeric_limits<std::uint32_t>::max()))
    throw ConfigError("horizon exceeds representable path length");
}

std::size_t BootstrapConfig::months_per_step() const {
  return static_cast<std::size_t>(std::llround(rebalance_interval * 12.0));
}

std::size_t BootstrapConfig::n_steps() const {
  return static_cast<std::size_t>(std::llround(horizon / rebalance_interval));
}

std::size_t ReturnsPanel::asset_index(const std::string& label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw ConfigError("panel has no asset '" + label + "'");
  return static_cast<std::size_t>(it - labels.begin());
}

ReturnsPanel ReturnsPanel::slice_paths(std::size_t begin, std::size_t end) const {
  if (begin > end || end > n_paths) throw ConfigError("path slice out of range");
  ReturnsPanel out;
  out.labels = labels;
  out.n_paths = end - begin;
  out.n_steps = n_steps;
  out.dt = dt;
  const std::size_t row = n_steps * n_assets();
  out.gross.assign(gross.begin() + static_cast<std::ptrdiff_t>(begin * row),
                   gross.begin() + static_cast<std::ptrdiff_t>(end * row));
  if (!provenance.empty()) {
    const std::size_t pm = provenance.size() / n_paths;
    out.provenance.assign(provenance.begin() + static_cast<std::ptrdiff_t>(begin * pm),
                          provenance.begin() + static_cast<std::ptrdiff_t>(end * pm));
  }
  return out;
}

ReturnsPanel stationary_block_bootstrap(const AlignedSource& source, const BootstrapConfig& cfg) {
  cfg.validate();
  const std::size_t n_src = source.n_months();
  if (n_src == 0) throw ConfigError("bootstrap source is empty");
  if (cfg.forced_start && *cfg.forced_start >= n_src)
    throw ConfigError("forced start is outside the source");
  const std::size_t na = source.n_assets();
  const std::size_t mps = cfg.months_per_step();
  const std::size_t steps = cfg.n_steps();
  const std::size_t months = steps * mps;
  const double max_elems = static_cast<double>(std::numeric_limits<std::size_t>::max()) / 16.0;
  if (static_cast<double>(cfg.n_paths) * static_cast<double>(steps) * static_cast<double>(na) > max_elems)
    throw ConfigError("panel too large to represent");

  ReturnsPanel panel;
  panel.labels = source.labels;
  panel.n_paths = cfg.n_paths;
  panel.n_steps = steps;
  panel.dt = cfg.rebalance_interval;
  panel.gross.assign(cfg.n_paths * steps * na, 1.0);
  if (cfg.keep_provenance) panel.provenance.assign(cfg.n_paths * months, 0);

  // A block as long as the source never restarts.
  const bool restarts = cfg.expected_block_size < static_cast<double>(n_src);
  const double p_restart = 1.0 / cfg.expected_block_size;

  parallel_for(cfg.n_paths, [&](std::size_t j) {
    Rng rng = substream(cfg.seed, Stream::bootstrap, j);
    std::uniform_int_distribution<std::size_t> pick(0, n_src - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t idx = cfg.forced_start ? *cfg.forced_start : pick(rng);
    double* out = &panel.gross[j * steps * na];
    for (std::size_t m = 0; m < months; ++m) {
      if (m > 0) {
        if (restarts && u(rng) < p_restart)
          idx = pick(rng);
        else
          idx = (idx + 1) % n_src;
      }
      if (cfg.keep_provenance) panel.provenance[j * months + m] = static_cast<std::uint32_t>(idx);
      double* cell = out + (m / mps) * na;
      for (std::size_t a = 0; a < na; ++a) cell[a] *= 1.0 + source.at(idx, a);
    }
  });
  return panel;
}

ReturnsPanel contiguous_panel(const AlignedSource& source, double rebalance_interval) {
  BootstrapConfig cfg;
  cfg.rebalance_interval = rebalance_interval;
  cfg.n_paths = 1;
  const double mps = rebalance_interval * 12.0;
  cfg.horizon = std::floor(static_cast<double>(source.n_months()) / std::round(mps)) * rebalance_interval;
  cfg.expected_block_size = static_cast<double>(source.n_months());
  cfg.forced_start = 0;
  cfg.keep_provenance = true;
  return stationary_block_bootstrap(source, cfg);
}

double apply_borrowing_premium(double tbill_return, double b, bool shorted) {
  return shorted ? tbill_return + b : tbill_return;
}

void write_panel(std::ostream& out, const ReturnsPanel& p) {
  out.write(kPanelMagic, sizeof kPanelMagic);
  put<std::uint64_t>(out, p.n_paths);
  put<std::uint64_t>(out, p.n_steps);
  put<std::uint64_t>(out, p.n_assets());
  put<double>(out, p.dt);
  for (const auto& l : p.labels) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.size()));
    out.write(l.data(), static_cast<std::streamsize>(l.size()));
  }
  out.write(reinterpret_cast<const char*>(p.gross.data()),
            static_cast<std::streamsize>(p.gross.size() * sizeof(double)));
}

ReturnsPanel read_panel(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kPanelMagic, sizeof magic) != 0)
    throw ConfigError("not a returns panel file");
  ReturnsPanel p;
  p.n_paths = get<std::uint64_t>(in);
  p.n_steps = get<std::uint64_t>(in);
  const auto na = get<std::uint64_t>(in);
  p.dt = get<double>(in);
  for (std::uint64_t a = 0; a < na; ++a) {
    const auto len = get<std::uint32_t>(in);
    std::string l(len, '\0');
    in.read(l.data(), len);
    p.labels.push_back(l);
  }
  p.gross.resize(p.n_paths * p.n_steps * na);
  in.read(reinterpret_cast<char*>(p.gross.data()),
          static_cast<std::streamsize>(p.gross.size() * sizeof(double)));
  if (!in) throw ConfigError("truncated panel file");
  return p;
}

SyntheticSource synthetic_source(const SyntheticConfig& cfg, std::uint64_t seed) {
  if (cfg.years < 1) throw ConfigError("synthetic history needs at least one year");
  Rng rng = substream(seed, Stream::synthetic, 0);
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  SyntheticSource s;
  s.index_daily.frequency = Frequency::daily;
  s.index_daily.label = "Market";
  s.t30.label = "T30";
  s.b10.label = "B10";
  s.inflation.label = "CPI";
  const double r = cfg.model.r;
  double ar = 0.0;
  for (int y = cfg.start_year; y < cfg.start_year + cfg.years; ++y) {
    for (unsigned mo = 1; mo <= 12; ++mo) {
      const year_month ym{year{y}, month{mo}};
      const Date last_day{ym / last};
      std::vector<Date> days;
      for (unsigned d = 1; d <= static_cast<unsigned>(last_day.day()); ++d) {
        const Date date{ym / day{d}};
        const weekday wd{sys_days{date}};
        if (wd != Saturday && wd != Sunday) days.push_back(date);
      }
      const double dt = 1.0 / (12.0 * static_cast<double>(days.size()));
      for (const Date& d : days) {
        s.index_daily.dates.push_back(d);
        s.index_daily.returns.push_back(simulate_interval(cfg.model, dt, 1.0, rng).index_gross - 1.0);
      }
      ar = cfg.t30_ar * ar + cfg.t30_noise_sd * normal(rng);
      const double b_noise = cfg.b10_noise_sd * normal(rng);
      s.t30.dates.push_back(last_day);
      s.t30.returns.push_back(std::expm1(r / 12.0) + ar);
      s.b10.dates.push_back(last_day);
      s.b10.returns.push_back(std::expm1((r + cfg.b10_term_premium) / 12.0) + b_noise);
      s.inflation.dates.push_back(last_day);
      s.inflation.returns.push_back(std::expm1(cfg.inflation / 12.0));
    }
  }
  return s;
}

std::vector<HistoricalWindow> replay_windows() {
  return {{"2000-2009", 2000, 2009},
          {"2005-2014", 2005, 2014},
          {"2010-2019", 2010, 2019},
          {"2014-2023", 2014, 2023}};
}

ReturnsPanel model_panel(const KouParams& p, const EtfSpec& vetf, const EtfSpec& letf,
                         std::size_t n_paths, double horizon, double dt, std::uint64_t seed) {
  p.validate();
  vetf.validate();
  letf.validate();
  if (n_paths == 0) throw ConfigError("model panel needs at least one path");
  if (!(dt > 0.0) || !(horizon > 0.0)) throw ConfigError("horizon and interval must be positive");
  const double ratio = horizon / dt;
  const auto steps = static_cast<std::size_t>(std::llround(ratio));
  if (steps == 0 || std::abs(ratio - static_cast<double>(steps)) > 1e-9)
    throw ConfigError("horizon must be a whole number of intervals");
  ReturnsPanel out;
  out.labels = {"T30", "Market", "VETF", "LETF"};
  out.n_paths = n_paths;
  out.n_steps = steps;
  out.dt = dt;
  out.gross.resize(n_paths * steps * 4);
  const double cash = std::exp(p.r * dt);
  parallel_for(n_paths, [&](std::size_t j) {
    Rng rng = substream(seed, Stream::index_paths, j);
    double* row = out.gross.data() + j * steps * 4;
    for (std::size_t n = 0; n < steps; ++n, row += 4) {
      const IntervalDraw d = simulate_interval(p, dt, letf.beta, rng);
      row[0] = cash;
      row[1] = d.index_gross;
      row[2] = vetf_gross_return(d.index_gross, dt, vetf);
      row[3] = letf_gross_return(d.index_gross, d.jumps, dt, letf, p);
    }
  });
  return out;
}

}  // namespace letf
