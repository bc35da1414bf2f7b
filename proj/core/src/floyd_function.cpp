#include "floydwalk/floyd_function.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "floydwalk/error.hpp"

namespace floydwalk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// sum_{i>=N} i^{-e} <= N^{-e} + N^{1-e}/(e-1), valid for e > 1, N >= 1
double zeta_tail_upper(double N, double e) {
  return std::pow(N, -e) + std::pow(N, 1.0 - e) / (e - 1.0);
}

// Euler-Maclaurin tail for sum_{j>=N} j^{-s}: direct terms to M-1, then
// M^{1-s}/(s-1) + M^{-s}/2 + s M^{-s-1}/12 with remainder below the B4 term.
struct EmTail {
  double value;
  double error;
};

// Euler–Maclaurin for sum_{j>=N} j^{-s}: the remainder after each Bernoulli
// term is bounded by the first omitted term (the integrand is completely
// monotone), so a short direct window suffices.
EmTail power_tail(double N, double s) {
  const double M = N + 32.0;
  long double acc = 0.0L;
  for (double j = N; j < M; j += 1.0) acc += std::pow(static_cast<long double>(j), -s);
  acc += std::pow(static_cast<long double>(M), 1.0 - s) / (s - 1.0);
  acc += std::pow(static_cast<long double>(M), -s) / 2.0;
  acc += s * std::pow(static_cast<long double>(M), -s - 1.0) / 12.0;
  acc -= s * (s + 1.0) * (s + 2.0) * std::pow(static_cast<long double>(M), -s - 3.0) / 720.0;
  double value = static_cast<double>(acc);
  double error = s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * std::pow(M, -s - 5.0) / 30240.0 +
                 4e-16 * value;
  return {value, error};
}

}  // namespace

const char* floyd_family_name(FloydFamily f) {
  switch (f) {
    case FloydFamily::Geometric: return "geometric";
    case FloydFamily::Polynomial: return "polynomial";
    case FloydFamily::CustomTable: return "custom_table";
    case FloydFamily::GreenScaledTable: return "lemma1";
  }
  return "?";
}

FloydFunction FloydFunction::geometric(double a) {
  if (!(a > 0.0 && a < 1.0)) throw_config("geometric Floyd function needs a in (0,1)");
  FloydFunction f;
  f.family_ = FloydFamily::Geometric;
  f.lambda_ = a;
  f.param_ = a;
  return f;
}

FloydFunction FloydFunction::polynomial(double s) {
  if (!(s > 1.0)) throw_config("polynomial Floyd function needs s > 1");
  FloydFunction f;
  f.family_ = FloydFamily::Polynomial;
  f.lambda_ = std::pow(0.5, s);
  f.param_ = s;
  return f;
}

static void validate_table(const std::vector<double>& values, double lambda,
                           const std::optional<PowerTailBound>& tail) {
  if (values.empty()) throw_config("table Floyd function needs at least one value");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw_config("table Floyd function needs lambda in (0,1]");
  for (double v : values)
    if (!std::isfinite(v)) throw_config("table Floyd function has a non-finite entry");
  if (tail) {
    if (!(tail->coeff > 0.0) || !std::isfinite(tail->coeff))
      throw_config("power tail bound needs positive finite coeff");
    if (!(tail->exponent > 1.0)) throw_config("power tail bound needs exponent > 1");
  }
}

FloydFunction FloydFunction::custom_table(std::vector<double> values, double lambda,
                                          std::optional<PowerTailBound> tail) {
  validate_table(values, lambda, tail);
  FloydFunction f;
  f.family_ = FloydFamily::CustomTable;
  f.lambda_ = lambda;
  f.table_ = std::move(values);
  f.tail_bound_ = tail;
  f.suffix_.assign(f.table_.size() + 1, 0.0);
  long double acc = 0.0L;
  for (std::size_t i = f.table_.size(); i-- > 0;) {
    acc += f.table_[i];
    f.suffix_[i] = static_cast<double>(acc);
  }
  return f;
}

FloydFunction FloydFunction::green_scaled_table(std::vector<double> values, double lambda,
                                                PowerTailBound tail) {
  FloydFunction f = custom_table(std::move(values), lambda, tail);
  f.family_ = FloydFamily::GreenScaledTable;
  return f;
}

bool FloydFunction::has_tail_control() const {
  return table_.empty() || tail_bound_.has_value();
}

bool FloydFunction::n_f_summable() const {
  switch (family_) {
    case FloydFamily::Geometric: return true;
    case FloydFamily::Polynomial: return param_ > 2.0;
    default: return tail_bound_ && tail_bound_->exponent > 2.0;
  }
}

std::string FloydFunction::describe() const {
  std::ostringstream os;
  os << floyd_family_name(family_);
  switch (family_) {
    case FloydFamily::Geometric: os << "(a=" << param_ << ")"; break;
    case FloydFamily::Polynomial: os << "(s=" << param_ << ")"; break;
    default: os << "(table_size=" << table_.size() << ", lambda=" << lambda_ << ")"; break;
  }
  return os.str();
}

std::uint32_t FloydFunction::support_end() const {
  if (table_.empty()) return std::numeric_limits<std::uint32_t>::max();
  return static_cast<std::uint32_t>(table_.size());
}

double FloydFunction::eval(std::uint32_t n) const {
  switch (family_) {
    case FloydFamily::Geometric: return std::pow(param_, static_cast<double>(n));
    case FloydFamily::Polynomial: return std::pow(static_cast<double>(n) + 1.0, -param_);
    default:
      if (n >= table_.size()) throw_range("Floyd table evaluated past its stored range");
      return table_[n];
  }
}

double FloydFunction::eval_log(std::uint32_t n) const {
  switch (family_) {
    case FloydFamily::Geometric: return static_cast<double>(n) * std::log(param_);
    case FloydFamily::Polynomial: return -param_ * std::log1p(static_cast<double>(n));
    default:
      if (n >= table_.size()) throw_range("Floyd table evaluated past its stored range");
      return std::log(table_[n]);
  }
}

double FloydFunction::eval_upper(std::uint32_t n) const {
  if (table_.empty() || n < table_.size()) return eval(n);
  if (!tail_bound_) throw_numeric("Floyd table has no tail control past its stored range");
  return tail_bound_->coeff * std::pow(static_cast<double>(n), -tail_bound_->exponent);
}

double FloydFunction::ratio(std::uint32_t n) const {
  switch (family_) {
    case FloydFamily::Geometric: return param_;
    case FloydFamily::Polynomial:
      return std::pow((static_cast<double>(n) + 1.0) / (static_cast<double>(n) + 2.0), param_);
    default:
      if (n + 1 >= table_.size()) throw_range("Floyd table ratio past its stored range");
      return table_[n + 1] / table_[n];
  }
}

TailSum FloydFunction::tail_sum(std::uint32_t n) const {
  TailSum t;
  t.n = n;
  switch (family_) {
    case FloydFamily::Geometric: {
      t.value = std::pow(param_, static_cast<double>(n)) / (1.0 - param_);
      t.error_bound = 4e-16 * t.value;
      t.analytic = true;
      return t;
    }
    case FloydFamily::Polynomial: {
      auto em = power_tail(static_cast<double>(n) + 1.0, param_);
      t.value = em.value;
      t.error_bound = em.error;
      t.analytic = true;
      return t;
    }
    default: {
      std::size_t last = table_.size();  // suffix_[last] == 0
      if (n < last) t.value = suffix_[n];
      double from = static_cast<double>(std::max<std::uint64_t>(n, last));
      if (tail_bound_)
        t.error_bound = tail_bound_->coeff * zeta_tail_upper(from, tail_bound_->exponent);
      else
        t.error_bound = kInf;
      t.analytic = false;
      return t;
    }
  }
}

double FloydFunction::nu(std::uint32_t n) const {
  return 4.0 * static_cast<double>(n) * eval(n) + 2.0 * tail_sum(n).upper();
}

double FloydFunction::tau(std::uint32_t n) const { return 10.0 * tail_sum(n / 2 + 1).upper(); }

double FloydFunction::nu_lower(std::uint32_t n) const {
  return 4.0 * static_cast<double>(n) * eval(n) + 2.0 * tail_sum(n).value;
}

double FloydFunction::tau_lower(std::uint32_t n) const {
  return 10.0 * tail_sum(n / 2 + 1).value;
}

double FloydFunction::tau_tail_upper(std::uint32_t m) const {
  if (!n_f_summable())
    throw_numeric("sum of tau(i) requires a function with summable n*f(n)");
  switch (family_) {
    case FloydFamily::Geometric: {
      // tau(i) = 10 a^{floor(i/2)+1}/(1-a); sum the two parity classes
      double a = param_;
      double k_even = std::ceil(static_cast<double>(m) / 2.0);
      double k_odd = std::ceil((static_cast<double>(m) - 1.0) / 2.0);
      double geo = 10.0 / ((1.0 - a) * (1.0 - a));
      return geo * (std::pow(a, k_even + 1.0) + std::pow(a, k_odd + 1.0));
    }
    case FloydFamily::Polynomial: {
      double s = param_;
      long double acc = 0.0L;
      std::uint32_t K = 4096;
      for (std::uint32_t i = m; i < m + K; ++i) {
        TailSum t = tail_sum(i / 2 + 1);
        acc += 10.0 * t.upper();
      }
      // sum_{i>=I} tau(i) <= 10 sum (floor(i/2)+1)^{1-s}/(s-1) <= 20/(s-1) * zeta-tail
      double I = static_cast<double>(m) + static_cast<double>(K);
      acc += 20.0 / (s - 1.0) * zeta_tail_upper(I / 2.0, s - 1.0);
      return static_cast<double>(acc);
    }
    default: {
      const auto& tb = *tail_bound_;
      std::size_t last = table_.size();
      long double acc = 0.0L;
      // while floor(i/2)+1 is inside the table, use stored suffixes plus the
      // constant past-table remainder
      double past = tb.coeff * zeta_tail_upper(static_cast<double>(last), tb.exponent);
      std::uint64_t i = m;
      for (; i / 2 + 1 < last; ++i) acc += 10.0 * (suffix_[i / 2 + 1] + past);
      // beyond: tau(i) <= 10 * coeff * zeta_tail(floor(i/2)+1) <= power sum
      acc += 20.0 * tb.coeff * zeta_tail_upper(static_cast<double>(i) / 2.0, tb.exponent - 1.0) /
             (tb.exponent - 1.0);
      acc += 20.0 * tb.coeff * zeta_tail_upper(static_cast<double>(i) / 2.0, tb.exponent);
      return static_cast<double>(acc);
    }
  }
}

FloydAxiomReport FloydFunction::check_axioms(std::uint32_t n_max) const {
  if (n_max < 1) throw_config("axiom check needs n_max >= 1");
  FloydAxiomReport rep;
  std::uint32_t end = n_max;
  if (!table_.empty()) end = std::min<std::uint32_t>(end, static_cast<std::uint32_t>(table_.size()) - 1);

  auto fail = [&](bool& flag, std::uint32_t n, const std::string& what) {
    if (rep.first_violation < 0) {
      rep.first_violation = static_cast<std::int64_t>(n);
      rep.detail = what;
    }
    flag = false;
  };

  const double tol = 1e-12;
  for (std::uint32_t n = 0; n <= end; ++n) {
    double lf = eval_log(n);
    if (std::isnan(lf) || lf == kInf || (table_.empty() ? false : !(table_[n] > 0.0)))
      fail(rep.positive, n, "f(n) is not positive at n=" + std::to_string(n));
    if (n == end) break;
    double r = ratio(n);
    rep.worst_ratio = std::min(rep.worst_ratio, r);
    if (!(r <= 1.0 + tol))
      fail(rep.non_increasing, n, "f increases at n=" + std::to_string(n));
    if (!(r >= lambda_ * (1.0 - tol)))
      fail(rep.lambda_lower, n, "f(n+1) < lambda*f(n) at n=" + std::to_string(n));
  }

  // Cauchy evidence for summability: tail of the partial sums must be small
  // relative to the head (analytic families certify it; tables are finite)
  if (has_tail_control()) {
    TailSum head = tail_sum(0);
    TailSum deep = tail_sum(end);
    if (!(deep.upper() <= head.upper()) || !std::isfinite(head.upper()))
      fail(rep.summable_evidence, end, "partial sums do not stabilize");
  } else {
    // no control: report evidence from the stored range only
    rep.summable_evidence = true;
  }
  return rep;
}

}  // namespace floydwalk
