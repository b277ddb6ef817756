#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sideband::stats {

/// Per-shot photon numbers (or pulse energies) of one channel.
class ShotSeries {
 public:
  /// Throws std::invalid_argument for fewer than two shots or negative/non-finite values.
  ShotSeries(std::vector<double> values, std::string label, std::optional<std::uint64_t> seed = std::nullopt);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  const std::string& label() const { return label_; }
  std::optional<std::uint64_t> seed() const { return seed_; }
  double mean() const;

 private:
  std::vector<double> values_;
  std::string label_;
  std::optional<std::uint64_t> seed_;
};

struct G2Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_shots = 0;
  std::size_t n_blocks = 0;
};

/// <n^2>/<n>^2 - 1/<n> over sample means. Throws std::domain_error when <n> = 0.
double g2_single_detector(std::span<const double> counts);
double g2_single_detector(const ShotSeries& series);

struct BlockG2 {
  std::vector<std::optional<double>> blocks;  // nullopt: block with zero mean
  G2Estimate pooled;
};

/// Contiguous equal blocks (tail remainder dropped); pooled value is the mean
/// of the block values, its error the block scatter / sqrt(blocks).
BlockG2 block_g2(const ShotSeries& series, std::size_t n_blocks);
BlockG2 block_g2(std::span<const double> counts, std::size_t n_blocks);

ShotSeries sample_poisson(double mean, std::size_t n_shots, std::uint64_t seed);
/// Bose-Einstein (geometric) photon numbers, g2 = 2.
ShotSeries sample_thermal(double mean, std::size_t n_shots, std::uint64_t seed);

/// Photon-number distribution P(n) of one squeezed-vacuum mode as a CDF
/// table (odd n carry zero weight), truncated once the tail is below 1e-12.
class SqueezedVacuumTable {
 public:
  explicit SqueezedVacuumTable(double r, double tail = 1e-12);

  double r() const { return r_; }
  std::size_t size() const { return cdf_.size(); }
  double probability(std::size_t n) const;
  /// Inverse CDF; u in [0, 1).
  std::size_t draw(double u) const;

 private:
  double r_;
  std::vector<double> pmf_;
  std::vector<double> cdf_;
};

/// Each shot sums `modes` independent single-mode squeezed-vacuum counts.
ShotSeries sample_squeezed_vacuum_counts(double r, std::size_t modes, std::size_t n_shots, std::uint64_t seed);
ShotSeries sample_squeezed_vacuum_counts_serial(double r, std::size_t modes, std::size_t n_shots,
                                                std::uint64_t seed);

/// K-mode squeezed-vacuum photon numbers for real K > 0: twice a negative
/// binomial pair count (shape K/2, mean K sinh^2 r / 2), drawn as a
/// gamma-Poisson mixture. Coincides in law with the integer-K sampler above.
ShotSeries sample_multimode_squeezed_vacuum(double sinh2_r, double modes, std::size_t n_shots,
                                           std::uint64_t seed);

/// K = (2 + 1/n_per_mode) / (g2 - 1); n_per_mode = infinity gives the bright limit.
double effective_mode_count(double g2, double n_per_mode);

struct Histogram {
  std::vector<double> edges;           // size = counts.size() + 1
  std::vector<std::uint64_t> counts;
};

/// `bins` equal bins spanning [min, max] with left-closed, right-open bins.
Histogram histogram(std::span<const double> values, std::size_t bins);
/// Bins of the given width aligned to multiples of width.
Histogram histogram_width(std::span<const double> values, double width);

void write_histogram_csv(std::ostream& os, const Histogram& h);
std::string g2_json(const G2Estimate& g2);

}  // namespace sideband::stats
