#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "letf/bootstrap_data.hpp"
#include "letf/error.hpp"

using namespace letf;
using namespace std::chrono;

namespace {

ReturnSeries parse(const std::string& text, Frequency f = Frequency::monthly) {
  std::istringstream in(text);
  return parse_series(in, "mem.csv", f);
}

ReturnSeries monthly_const(int y0, int n, double r, const std::string& label) {
  ReturnSeries s;
  s.label = label;
  for (int k = 0; k < n; ++k) {
    const int y = y0 + k / 12;
    const unsigned m = static_cast<unsigned>(k % 12 + 1);
    s.dates.push_back(Date{year{y} / month{m} / last});
    s.returns.push_back(r);
  }
  return s;
}

// Daily series of weekdays for one month with the given returns (padded with 0).
ReturnSeries one_month_daily(int y, unsigned m, const std::vector<double>& head) {
  ReturnSeries s;
  s.frequency = Frequency::daily;
  const Date last_day{year{y} / month{m} / last};
  for (unsigned d = 1; d <= static_cast<unsigned>(last_day.day()); ++d) {
    const Date date{year{y} / month{m} / day{d}};
    const weekday wd{sys_days{date}};
    if (wd == Saturday || wd == Sunday) continue;
    s.dates.push_back(date);
    const std::size_t k = s.returns.size();
    s.returns.push_back(k < head.size() ? head[k] : 0.0);
  }
  return s;
}

AlignedSource small_source(std::uint64_t seed, int years = 98) {
  SyntheticConfig cfg;
  cfg.years = years;
  const auto syn = synthetic_source(cfg, seed);
  return build_source_panel(syn.index_daily, syn.t30, syn.b10, syn.inflation, {1.0, 0.0006},
                            {2.0, 0.0089});
}

}  // namespace

TEST(LoadSeries, WellFormed) {
  const auto s = parse("date,return\n2001-01-31,0.01\n2001-02,-0.02\n");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(format_date(s.dates[1]), "2001-02-28");
  EXPECT_DOUBLE_EQ(s.returns[1], -0.02);
}

TEST(LoadSeries, ReturnBelowMinusOne) {
  try {
    parse("date,return\n2001-01-31,0.01\n2001-02-28,-1.5\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos);
  }
  EXPECT_THROW(parse("date,return\n2001-01-31,-1\n"), ParseError);
}

TEST(LoadSeries, MissingMonthNamed) {
  try {
    parse("date,return\n2001-01-31,0.01\n2001-02-28,0.01\n2001-04-30,0.01\n");
    FAIL() << "expected a gap error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("2001-03"), std::string::npos) << e.what();
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(LoadSeries, OtherMalformedInput) {
  EXPECT_THROW(parse(""), ParseError);
  EXPECT_THROW(parse("when,value\n2001-01-31,0.01\n"), ParseError);
  EXPECT_THROW(parse("date,return\n2001-01-31\n"), ParseError);
  EXPECT_THROW(parse("date,return\n2001-13-31,0.01\n"), ParseError);
  EXPECT_THROW(parse("date,return\n2001-01-31,abc\n"), ParseError);
  EXPECT_THROW(parse("date,return\n2001-02-28,0.01\n2001-01-31,0.01\n"), ParseError);
  EXPECT_THROW(parse("date,return\n2001-01-02,0.01\n2001-01-30,0.01\n", Frequency::daily),
               ParseError);
  EXPECT_NO_THROW(parse("date,return\n2001-01-02,0.01\n2001-01-05,0.01\n", Frequency::daily));
  EXPECT_THROW(load_series("/nonexistent/file.csv", Frequency::monthly), ConfigError);
}

TEST(LoadSeries, RoundTrip) {
  const auto s = parse("date,return\n2001-01-31,0.1\n2001-02-28,-0.0123456789012345\n");
  std::ostringstream out;
  write_series(out, s);
  const auto t = parse(out.str());
  EXPECT_EQ(t.returns, s.returns);
  EXPECT_EQ(t.dates, s.dates);
}

TEST(Proxy, IdentityForUnitBeta) {
  SyntheticConfig cfg;
  cfg.years = 3;
  const auto syn = synthetic_source(cfg, 4);
  const auto proxy = build_proxy_etf(syn.index_daily, syn.t30, {1.0, 0.0}, syn.inflation);
  const auto direct = compound_monthly(syn.index_daily);
  ASSERT_EQ(proxy.size(), 36u);
  EXPECT_EQ(proxy.returns, direct.returns);
  EXPECT_EQ(proxy.dates, direct.dates);
}

TEST(Proxy, FinancingDragOnFlatMonth) {
  const double r = 0.03, c = 0.0089;
  const auto idx = one_month_daily(2010, 3, {});
  const auto bill = monthly_const(2010, 12, std::expm1(r / 12.0), "T30");
  const auto infl = monthly_const(2010, 12, 0.0, "CPI");
  const auto p = build_proxy_etf(idx, bill, {2.0, c}, infl);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_NEAR(p.returns[0], -(r + c) / 12.0, 2e-5);
}

TEST(Proxy, DailyLimitedLiability) {
  const auto idx = one_month_daily(2010, 3, {0.01, -0.6, 0.05});
  const auto bill = monthly_const(2010, 12, 0.001, "T30");
  const auto infl = monthly_const(2010, 12, 0.0, "CPI");
  const auto p = build_proxy_etf(idx, bill, {2.0, 0.0089}, infl);
  EXPECT_EQ(p.returns[0], -1.0);
  const auto v = build_proxy_etf(idx, bill, {1.0, 0.0}, infl);
  EXPECT_GT(v.returns[0], -1.0);
}

TEST(Proxy, Misalignment) {
  const auto idx = one_month_daily(2010, 3, {});
  const auto bill = monthly_const(2011, 12, 0.001, "T30");
  const auto infl = monthly_const(2010, 12, 0.0, "CPI");
  EXPECT_THROW(build_proxy_etf(idx, bill, {2.0, 0.0}, infl), AlignmentError);
  EXPECT_THROW(build_proxy_etf(idx, infl, {2.0, 0.0}, bill), AlignmentError);
}

TEST(Deflate, RealReturn) {
  const auto nom = monthly_const(2000, 2, 0.02, "X");
  const auto infl = monthly_const(2000, 2, 0.01, "CPI");
  const auto real = deflate(nom, infl);
  EXPECT_DOUBLE_EQ(real.returns[0], 1.02 / 1.01 - 1.0);
}

TEST(Align, RequiresIdenticalCalendars) {
  const auto a = monthly_const(2000, 24, 0.01, "A");
  const auto b = monthly_const(2000, 24, 0.02, "B");
  const auto src = align({a, b});
  EXPECT_EQ(src.n_months(), 24u);
  EXPECT_EQ(src.at(5, 1), 0.02);
  EXPECT_THROW(align({a, monthly_const(2001, 24, 0.0, "C")}), AlignmentError);
}

TEST(Bootstrap, UnitBlockIsIid) {
  const auto src = small_source(1);
  BootstrapConfig cfg;
  cfg.expected_block_size = 1.0;
  cfg.n_paths = 100000;
  cfg.rebalance_interval = 1.0 / 12.0;
  cfg.seed = 3;
  const auto panel = stationary_block_bootstrap(src, cfg);
  ASSERT_EQ(panel.n_steps, 120u);
  for (std::size_t a = 0; a < src.n_assets(); ++a) {
    const auto col = src.column(a);
    double m = 0, v = 0;
    for (double x : col) m += x;
    m /= static_cast<double>(col.size());
    for (double x : col) v += (x - m) * (x - m);
    v /= static_cast<double>(col.size());
    double s = 0;
    for (std::size_t j = 0; j < panel.n_paths; ++j)
      for (std::size_t k = 0; k < panel.n_steps; ++k) s += panel.at(j, k, a) - 1.0;
    const double n = static_cast<double>(panel.n_paths * panel.n_steps);
    EXPECT_LT(std::abs(s / n - m), 3.0 * std::sqrt(v / n)) << src.labels[a];
  }
}

TEST(Bootstrap, FullBlockReproducesSource) {
  const auto src = small_source(2, 10);
  BootstrapConfig cfg;
  cfg.expected_block_size = static_cast<double>(src.n_months());
  cfg.n_paths = 1;
  cfg.horizon = 10.0;
  cfg.rebalance_interval = 1.0 / 12.0;
  cfg.forced_start = 0;
  const auto panel = stationary_block_bootstrap(src, cfg);
  ASSERT_EQ(panel.n_steps, src.n_months());
  for (std::size_t m = 0; m < src.n_months(); ++m)
    for (std::size_t a = 0; a < src.n_assets(); ++a)
      EXPECT_EQ(panel.at(0, m, a), 1.0 + src.at(m, a));
}

TEST(Bootstrap, FullScaleShape) {
  const auto full = small_source(3);
  AlignedSource one;
  one.labels = {"Market"};
  one.months = full.months;
  one.returns = full.column(full.asset_index("Market"));
  BootstrapConfig cfg;
  cfg.expected_block_size = 3.0;
  cfg.n_paths = 500000;
  cfg.horizon = 10.0;
  cfg.rebalance_interval = 0.25;
  const auto panel = stationary_block_bootstrap(one, cfg);
  EXPECT_EQ(panel.n_paths, 500000u);
  EXPECT_EQ(panel.n_steps, 40u);
  EXPECT_EQ(panel.gross.size(), 500000u * 40u);
}

TEST(Bootstrap, JointResamplingAndProvenance) {
  const auto src = small_source(4);
  BootstrapConfig cfg;
  cfg.n_paths = 200;
  cfg.keep_provenance = true;
  cfg.seed = 8;
  const auto panel = stationary_block_bootstrap(src, cfg);
  const std::size_t months = panel.n_steps * 3;
  for (std::size_t j = 0; j < panel.n_paths; ++j)
    for (std::size_t k = 0; k < panel.n_steps; ++k)
      for (std::size_t a = 0; a < src.n_assets(); ++a) {
        double g = 1.0;
        for (std::size_t m = 3 * k; m < 3 * k + 3; ++m)
          g *= 1.0 + src.at(panel.provenance[j * months + m], a);
        EXPECT_EQ(panel.at(j, k, a), g);
      }
}

TEST(Bootstrap, PreservesMeanAndVariance) {
  const auto src = small_source(5);
  BootstrapConfig cfg;
  cfg.expected_block_size = 3.0;
  cfg.n_paths = 10000;
  cfg.rebalance_interval = 1.0 / 12.0;
  cfg.seed = 21;
  const auto panel = stationary_block_bootstrap(src, cfg);
  for (std::size_t a = 0; a < src.n_assets(); ++a) {
    const auto col = src.column(a);
    double m = 0, v = 0;
    for (double x : col) m += x;
    m /= static_cast<double>(col.size());
    for (double x : col) v += (x - m) * (x - m);
    v /= static_cast<double>(col.size());
    // Path averages are independent, so their spread gives honest errors.
    std::vector<double> pm(panel.n_paths), pv(panel.n_paths);
    for (std::size_t j = 0; j < panel.n_paths; ++j) {
      double s = 0, q = 0;
      for (std::size_t k = 0; k < panel.n_steps; ++k) {
        const double x = panel.at(j, k, a) - 1.0;
        s += x;
        q += (x - m) * (x - m);
      }
      pm[j] = s / static_cast<double>(panel.n_steps);
      pv[j] = q / static_cast<double>(panel.n_steps);
    }
    auto mean_se = [](const std::vector<double>& x) {
      double mu = 0, var = 0;
      for (double y : x) mu += y;
      mu /= static_cast<double>(x.size());
      for (double y : x) var += (y - mu) * (y - mu);
      var /= static_cast<double>(x.size() - 1);
      return std::pair{mu, std::sqrt(var / static_cast<double>(x.size()))};
    };
    const auto [bm, bse] = mean_se(pm);
    const auto [bv, vse] = mean_se(pv);
    EXPECT_LT(std::abs(bm - m), 3.0 * bse) << src.labels[a];
    EXPECT_LT(std::abs(bv - v), 3.0 * vse) << src.labels[a];
  }
}

TEST(Bootstrap, DeterministicBytes) {
  const auto src = small_source(6);
  BootstrapConfig cfg;
  cfg.n_paths = 500;
  cfg.seed = 99;
  std::ostringstream a, b;
  write_panel(a, stationary_block_bootstrap(src, cfg));
  write_panel(b, stationary_block_bootstrap(src, cfg));
  EXPECT_EQ(a.str(), b.str());
  cfg.seed = 100;
  std::ostringstream c;
  write_panel(c, stationary_block_bootstrap(src, cfg));
  EXPECT_NE(a.str(), c.str());
}

TEST(Bootstrap, NoPathCopiesHistory) {
  const auto src = small_source(7);
  BootstrapConfig cfg;
  cfg.n_paths = 10000;
  cfg.keep_provenance = true;
  const auto panel = stationary_block_bootstrap(src, cfg);
  const std::size_t months = panel.n_steps * 3;
  std::size_t copies = 0;
  for (std::size_t j = 0; j < panel.n_paths; ++j) {
    bool contiguous = true;
    for (std::size_t m = 1; m < months && contiguous; ++m)
      contiguous = panel.provenance[j * months + m] ==
                   (panel.provenance[j * months + m - 1] + 1) % src.n_months();
    copies += contiguous;
  }
  EXPECT_EQ(copies, 0u);
}

TEST(Bootstrap, ConfigErrors) {
  const auto src = small_source(8, 5);
  BootstrapConfig cfg;
  cfg.expected_block_size = 0.5;
  EXPECT_THROW(stationary_block_bootstrap(src, cfg), ConfigError);
  cfg = {};
  cfg.rebalance_interval = 0.1;
  EXPECT_THROW(stationary_block_bootstrap(src, cfg), ConfigError);
  cfg = {};
  cfg.horizon = 1e12;
  EXPECT_THROW(stationary_block_bootstrap(src, cfg), ConfigError);
  cfg = {};
  cfg.forced_start = 100000;
  EXPECT_THROW(stationary_block_bootstrap(src, cfg), ConfigError);
}

TEST(Panel, IoRoundTripAndSlice) {
  const auto src = small_source(9, 20);
  BootstrapConfig cfg;
  cfg.n_paths = 10;
  const auto panel = stationary_block_bootstrap(src, cfg);
  std::stringstream io;
  write_panel(io, panel);
  const auto back = read_panel(io);
  EXPECT_EQ(back.gross, panel.gross);
  EXPECT_EQ(back.labels, panel.labels);
  EXPECT_EQ(back.dt, panel.dt);
  const auto part = panel.slice_paths(3, 5);
  EXPECT_EQ(part.n_paths, 2u);
  EXPECT_EQ(part.at(1, 7, 2), panel.at(4, 7, 2));
  std::istringstream junk("nonsense");
  EXPECT_THROW(read_panel(junk), ConfigError);
}

TEST(Premium, Cases) {
  EXPECT_DOUBLE_EQ(apply_borrowing_premium(0.01, 0.03, true), 0.04);
  EXPECT_DOUBLE_EQ(apply_borrowing_premium(0.01, 0.03, false), 0.01);
  EXPECT_DOUBLE_EQ(apply_borrowing_premium(0.017, 0.0, true), 0.017);
}

TEST(Synthetic, ZeroNoiseBillsAndCount) {
  SyntheticConfig cfg;
  cfg.t30_noise_sd = 0.0;
  const auto s = synthetic_source(cfg, 1);
  ASSERT_EQ(s.t30.size(), 1176u);
  EXPECT_EQ(s.b10.size(), 1176u);
  EXPECT_EQ(compound_monthly(s.index_daily).size(), 1176u);
  for (double r : s.t30.returns) EXPECT_EQ(r, std::expm1(cfg.model.r / 12.0));
  EXPECT_EQ(format_date(s.t30.dates.front()), "1926-01-31");
  EXPECT_EQ(format_date(s.t30.dates.back()), "2023-12-31");
}

TEST(Synthetic, IndexMomentsMatchModel) {
  SyntheticConfig cfg;
  cfg.years = 3000;
  const auto s = synthetic_source(cfg, 12);
  const auto m = compound_monthly(s.index_daily);
  const KouParams& p = cfg.model;
  const double n = static_cast<double>(m.size());
  double mg = 0, vg = 0, ml = 0, vl = 0;
  for (double r : m.returns) {
    mg += 1.0 + r;
    ml += std::log1p(r);
  }
  mg /= n;
  ml /= n;
  for (double r : m.returns) {
    vg += (1.0 + r - mg) * (1.0 + r - mg);
    vl += (std::log1p(r) - ml) * (std::log1p(r) - ml);
  }
  vg /= n - 1;
  vl /= n - 1;
  EXPECT_LT(std::abs(mg - std::exp(p.mu / 12.0)), 3.0 * std::sqrt(vg / n));
  const double ey2 = 2.0 * p.p_up / (p.eta1 * p.eta1) + 2.0 * (1.0 - p.p_up) / (p.eta2 * p.eta2);
  const double want_var = p.sigma * p.sigma / 12.0 + p.lambda / 12.0 * ey2;
  // Variance standard error from the fourth central moment.
  double m4 = 0;
  for (double r : m.returns) m4 += std::pow(std::log1p(r) - ml, 4);
  m4 /= n;
  EXPECT_LT(std::abs(vl - want_var), 3.0 * std::sqrt((m4 - vl * vl) / n));
}

TEST(Windows, NamedSlices) {
  const auto src = small_source(10);
  const auto w = replay_windows();
  ASSERT_EQ(w.size(), 4u);
  for (const auto& win : w) {
    const auto slice = src.slice(win.first_year, win.last_year);
    EXPECT_EQ(slice.n_months(), 120u) << win.name;
    const auto path = contiguous_panel(slice, 0.25);
    EXPECT_EQ(path.n_steps, 40u);
    EXPECT_EQ(path.n_paths, 1u);
  }
  EXPECT_THROW(src.slice(1900, 1930), ConfigError);
}
