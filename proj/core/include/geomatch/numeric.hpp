#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace geomatch {

/// Neumaier-compensated accumulator for order-insensitive currency totals.
class CompensatedSum {
 public:
  void add(double value) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

double compensated_sum(std::span<const double> values) noexcept;
double mean(std::span<const double> values) noexcept;
/// Sample variance (n - 1 denominator); 0 for fewer than two values.
double sample_variance(std::span<const double> values) noexcept;

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits by `hash_hex`.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;
std::string hash_hex(std::uint64_t hash);

/// Shortest text that parses back to the identical double.
std::string format_double(double value);

}  // namespace geomatch
