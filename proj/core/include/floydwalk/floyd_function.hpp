#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace floydwalk {

enum class FloydFamily { Geometric, Polynomial, CustomTable, GreenScaledTable };

const char* floyd_family_name(FloydFamily f);

// Partial tail sum together with a certified remainder cap. `value` is the
// exactly-known part; value + error_bound is an upper bound on the true sum,
// value a lower bound. analytic == true means the remainder came from a closed
// form rather than a table-extension bound.
struct TailSum {
  std::uint32_t n = 0;
  double value = 0.0;
  double error_bound = 0.0;
  bool analytic = false;

  double upper() const { return value + error_bound; }
};

// Certifies f(i) <= coeff * i^{-exponent} for i past the stored table.
struct PowerTailBound {
  double coeff = 0.0;
  double exponent = 0.0;
};

struct FloydAxiomReport {
  bool positive = true;
  bool non_increasing = true;
  bool lambda_lower = true;
  bool summable_evidence = true;  // partial sums Cauchy over the checked range
  double worst_ratio = 1.0;       // min f(n+1)/f(n) observed
  std::int64_t first_violation = -1;
  std::string detail;

  bool ok() const { return positive && non_increasing && lambda_lower && summable_evidence; }
};

// A scale function n -> f(n): positive, non-increasing, summable, and
// lambda-controlled from below: lambda * f(n) <= f(n+1). Analytic families
// evaluate everywhere; table families evaluate on [0, table_size) and extend
// only through an optional power tail bound.
class FloydFunction {
 public:
  static FloydFunction geometric(double a);   // f(n) = a^n, lambda = a
  static FloydFunction polynomial(double s);  // f(n) = (n+1)^{-s}, s > 1, lambda = 2^{-s}
  static FloydFunction custom_table(std::vector<double> values, double lambda,
                                    std::optional<PowerTailBound> tail = std::nullopt);
  // table produced by the inverse-Green scaling construction; the power bound
  // certifies the decay past the stored range
  static FloydFunction green_scaled_table(std::vector<double> values, double lambda,
                                          PowerTailBound tail);

  FloydFamily family() const { return family_; }
  double lambda() const { return lambda_; }
  double param() const { return param_; }  // a or s; 0 for tables
  std::size_t table_size() const { return table_.size(); }
  bool has_tail_control() const;
  bool n_f_summable() const;
  std::string describe() const;

  // smallest n with no stored/closed-form value (UINT32_MAX when analytic)
  std::uint32_t support_end() const;

  double eval(std::uint32_t n) const;      // throws Range past support
  double eval_log(std::uint32_t n) const;  // log f(n), safe against underflow
  // upper bound on f(n) valid for every n (uses the power tail past support)
  double eval_upper(std::uint32_t n) const;
  // f(n+1)/f(n) computed in ratio space (no underflow at large n)
  double ratio(std::uint32_t n) const;

  TailSum tail_sum(std::uint32_t n) const;  // sum_{i>=n} f(i)
  // comparison functions; tails enter through their certified upper bounds so
  // every reported inequality stays one-sided
  double nu(std::uint32_t n) const;   // 4 n f(n) + 2 tail_sum(n).upper()
  double tau(std::uint32_t n) const;  // 10 tail_sum(floor(n/2)+1).upper()
  // lower variants for exactness checks (analytic families: equal to the above)
  double nu_lower(std::uint32_t n) const;
  double tau_lower(std::uint32_t n) const;

  // certified upper bound on sum_{i>=m} tau(i); requires n_f_summable()
  double tau_tail_upper(std::uint32_t m) const;

  FloydAxiomReport check_axioms(std::uint32_t n_max) const;

 private:
  FloydFunction() = default;

  FloydFamily family_ = FloydFamily::Geometric;
  double lambda_ = 0.0;
  double param_ = 0.0;
  std::vector<double> table_;
  std::vector<double> suffix_;  // suffix_[i] = sum_{j>=i} table_[j], size +1
  std::optional<PowerTailBound> tail_bound_;
};

}  // namespace floydwalk
