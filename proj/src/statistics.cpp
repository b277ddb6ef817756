#include "sideband/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "sideband/output.hpp"
#include "sideband/random.hpp"

namespace sideband::stats {

ShotSeries::ShotSeries(std::vector<double> values, std::string label, std::optional<std::uint64_t> seed)
    : values_(std::move(values)), label_(std::move(label)), seed_(seed) {
  if (values_.size() < 2) {
    throw std::invalid_argument(fmt::format("series '{}' needs at least 2 shots, got {}", label_, values_.size()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]) || values_[i] < 0.0) {
      throw std::invalid_argument(
          fmt::format("series '{}' shot {} has invalid value {}", label_, i, values_[i]));
    }
  }
}

double ShotSeries::mean() const {
  return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

double g2_single_detector(std::span<const double> counts) {
  if (counts.empty()) throw std::invalid_argument("g2 of an empty series");
  double s1 = 0.0, s2 = 0.0;
  for (const double n : counts) {
    s1 += n;
    s2 += n * n;
  }
  const double len = static_cast<double>(counts.size());
  const double m1 = s1 / len, m2 = s2 / len;
  if (!(m1 > 0.0)) throw std::domain_error("g2(0) is undefined for a zero-mean series");
  return m2 / (m1 * m1) - 1.0 / m1;
}

double g2_single_detector(const ShotSeries& series) { return g2_single_detector(series.values()); }

BlockG2 block_g2(std::span<const double> counts, std::size_t n_blocks) {
  if (n_blocks < 2) throw std::invalid_argument(fmt::format("need at least 2 blocks, got {}", n_blocks));
  if (counts.size() < 2 * n_blocks) {
    throw std::invalid_argument(
        fmt::format("{} shots cannot fill {} blocks of at least 2 shots", counts.size(), n_blocks));
  }
  const std::size_t block = counts.size() / n_blocks;
  BlockG2 out;
  out.blocks.reserve(n_blocks);
  std::vector<double> valid;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const auto chunk = counts.subspan(b * block, block);
    const double sum = std::accumulate(chunk.begin(), chunk.end(), 0.0);
    if (sum > 0.0) {
      const double v = g2_single_detector(chunk);
      out.blocks.emplace_back(v);
      valid.push_back(v);
    } else {
      out.blocks.emplace_back(std::nullopt);
    }
  }
  if (valid.size() < 2) {
    throw std::domain_error(fmt::format("only {} of {} blocks have nonzero mean", valid.size(), n_blocks));
  }
  const double k = static_cast<double>(valid.size());
  const double mean = std::accumulate(valid.begin(), valid.end(), 0.0) / k;
  double ss = 0.0;
  for (const double v : valid) ss += (v - mean) * (v - mean);
  out.pooled.value = mean;
  out.pooled.std_error = std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
  out.pooled.n_blocks = valid.size();
  out.pooled.n_shots = valid.size() * block;
  return out;
}

BlockG2 block_g2(const ShotSeries& series, std::size_t n_blocks) { return block_g2(series.values(), n_blocks); }

ShotSeries sample_poisson(double mean, std::size_t n_shots, std::uint64_t seed) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw std::invalid_argument(fmt::format("Poisson mean {}", mean));
  std::vector<double> v(n_shots, 0.0);
  if (mean > 0.0) {
    fill_chunked(v, seed, [mean](Engine& e, std::span<double> out) {
      std::poisson_distribution<long long> dist(mean);
      for (auto& x : out) x = static_cast<double>(dist(e));
    });
  }
  return ShotSeries(std::move(v), "poisson", seed);
}

ShotSeries sample_thermal(double mean, std::size_t n_shots, std::uint64_t seed) {
  if (!(mean > 0.0) || !std::isfinite(mean)) throw std::invalid_argument(fmt::format("thermal mean {}", mean));
  std::vector<double> v(n_shots);
  fill_chunked(v, seed, [mean](Engine& e, std::span<double> out) {
    std::geometric_distribution<long long> dist(1.0 / (1.0 + mean));
    for (auto& x : out) x = static_cast<double>(dist(e));
  });
  return ShotSeries(std::move(v), "thermal", seed);
}

// ---------------------------------------------------------------------------

SqueezedVacuumTable::SqueezedVacuumTable(double r, double tail) : r_(r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument(fmt::format("squeezing r must be > 0, got {}", r));
  const double t2 = std::tanh(r) * std::tanh(r);
  // P(2m) = P(2m-2) tanh^2 r (2m-1)/(2m); successive ratios stay below tanh^2 r,
  // so the remaining tail is bounded by P t2 / (1 - t2).
  const double one_minus_t2 = 1.0 / (std::cosh(r) * std::cosh(r));
  double p = 1.0 / std::cosh(r);
  long double total = 0.0L;
  for (std::size_t m = 0;; ++m) {
    pmf_.push_back(p);
    total += p;
    cdf_.push_back(static_cast<double>(total));
    if (p * t2 / one_minus_t2 < tail && m > 0) break;
    if (pmf_.size() > 200'000'000) throw std::length_error("squeezed-vacuum table too large");
    const double next_m = static_cast<double>(m + 1);
    p *= t2 * (2.0 * next_m - 1.0) / (2.0 * next_m);
  }
  const double norm = static_cast<double>(total);
  for (auto& c : cdf_) c /= norm;
  for (auto& q : pmf_) q /= norm;
  cdf_.back() = 1.0;
}

double SqueezedVacuumTable::probability(std::size_t n) const {
  if (n % 2 == 1 || n / 2 >= pmf_.size()) return 0.0;
  return pmf_[n / 2];
}

std::size_t SqueezedVacuumTable::draw(double u) const {
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  return 2 * m;
}

namespace {

auto squeezed_draw(const SqueezedVacuumTable& table, std::size_t modes) {
  return [&table, modes](Engine& e, std::span<double> out) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& x : out) {
      std::size_t n = 0;
      for (std::size_t k = 0; k < modes; ++k) n += table.draw(u(e));
      x = static_cast<double>(n);
    }
  };
}

void check_modes(std::size_t modes) {
  if (modes < 1) throw std::invalid_argument("mode count must be >= 1");
}

}  // namespace

ShotSeries sample_squeezed_vacuum_counts(double r, std::size_t modes, std::size_t n_shots, std::uint64_t seed) {
  check_modes(modes);
  const SqueezedVacuumTable table(r);
  std::vector<double> v(n_shots);
  fill_chunked(v, seed, squeezed_draw(table, modes));
  return ShotSeries(std::move(v), "squeezed_vacuum", seed);
}

ShotSeries sample_squeezed_vacuum_counts_serial(double r, std::size_t modes, std::size_t n_shots,
                                                std::uint64_t seed) {
  check_modes(modes);
  const SqueezedVacuumTable table(r);
  std::vector<double> v(n_shots);
  fill_chunked_serial(v, seed, squeezed_draw(table, modes));
  return ShotSeries(std::move(v), "squeezed_vacuum", seed);
}

ShotSeries sample_multimode_squeezed_vacuum(double sinh2_r, double modes, std::size_t n_shots, std::uint64_t seed) {
  if (!(sinh2_r > 0.0) || !std::isfinite(sinh2_r)) {
    throw std::invalid_argument(fmt::format("sinh^2 r must be > 0, got {}", sinh2_r));
  }
  if (!(modes > 0.0) || !std::isfinite(modes)) throw std::invalid_argument(fmt::format("mode count {}", modes));
  std::vector<double> v(n_shots);
  fill_chunked(v, seed, [sinh2_r, modes](Engine& e, std::span<double> out) {
    std::gamma_distribution<double> rate(0.5 * modes, sinh2_r);
    for (auto& x : out) {
      const double lambda = rate(e);
      x = 0.0;
      if (lambda > 0.0) {
        std::poisson_distribution<long long> pairs(lambda);
        x = 2.0 * static_cast<double>(pairs(e));
      }
    }
  });
  return ShotSeries(std::move(v), "squeezed_vacuum", seed);
}

double effective_mode_count(double g2, double n_per_mode) {
  if (!(g2 > 1.0)) throw std::invalid_argument(fmt::format("mode count needs g2 > 1, got {}", g2));
  if (!(n_per_mode > 0.0)) throw std::invalid_argument(fmt::format("photons per mode must be > 0, got {}", n_per_mode));
  return (2.0 + 1.0 / n_per_mode) / (g2 - 1.0);
}

// ---------------------------------------------------------------------------

namespace {

Histogram bin_values(std::span<const double> values, double lo, double width, std::size_t bins) {
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = lo + static_cast<double>(i) * width;
  h.counts.assign(bins, 0);
  for (const double x : values) {
    auto idx = static_cast<std::ptrdiff_t>(std::floor((x - lo) / width));
    idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    // fix rounding at bin boundaries so that edges[i] <= x < edges[i + 1]
    while (idx > 0 && x < h.edges[static_cast<std::size_t>(idx)]) --idx;
    while (idx + 1 < static_cast<std::ptrdiff_t>(bins) && x >= h.edges[static_cast<std::size_t>(idx) + 1]) ++idx;
    ++h.counts[static_cast<std::size_t>(idx)];
  }
  return h;
}

void check_values(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("histogram of an empty series");
  for (const double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("histogram of non-finite values");
  }
}

}  // namespace

Histogram histogram(std::span<const double> values, std::size_t bins) {
  if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
  check_values(values);
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi == lo) return bin_values(values, lo, 1.0, bins);
  const double top = std::nextafter(hi, std::numeric_limits<double>::infinity());
  Histogram h = bin_values(values, lo, (top - lo) / static_cast<double>(bins), bins);
  h.edges.back() = std::max(h.edges.back(), top);
  return h;
}

Histogram histogram_width(std::span<const double> values, double width) {
  if (!(width > 0.0) || !std::isfinite(width)) throw std::invalid_argument(fmt::format("bin width {}", width));
  check_values(values);
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double start = std::floor(*lo_it / width) * width;
  auto bins = static_cast<std::size_t>(std::floor((*hi_it - start) / width)) + 1;
  while (start + static_cast<double>(bins) * width <= *hi_it) ++bins;
  return bin_values(values, start, width, bins);
}

void write_histogram_csv(std::ostream& os, const Histogram& h) {
  os << "left_edge,right_edge,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    os << out::number(h.edges[i]) << ',' << out::number(h.edges[i + 1]) << ',' << h.counts[i] << '\n';
  }
}

std::string g2_json(const G2Estimate& g2) {
  return out::JsonObject()
      .add("value", g2.value)
      .add("stderr", g2.std_error)
      .add("n_shots", static_cast<std::uint64_t>(g2.n_shots))
      .add("n_blocks", static_cast<std::uint64_t>(g2.n_blocks))
      .str();
}

}  // namespace sideband::stats
