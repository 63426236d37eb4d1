#pragma once

// Component gradient codes with cyclic repetition supports, nested gradient
// codes built from them, and online decoding for a given responsive set.
//
// Worker and task indices are 0-based throughout: row i of B_sigma is
// supported on {i, i+1, ..., i+sigma} mod n.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ngc/errors.hpp"
#include "ngc/rng.hpp"

namespace ngc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultDecodeTolerance = 1e-8;
inline constexpr double kDefaultConditionLimit = 1e8;
inline constexpr int kDefaultConstructionAttempts = 32;
inline constexpr int kDefaultVerificationCap = 12;

struct CodeParams {
  int n = 0;
  int k = 0;
  int sigma = 0;

  void validate() const {
    if (n < 1) throw InvalidArgument("n must be positive, got " + std::to_string(n));
    if (k != n) throw InvalidArgument("only k = n is supported");
    if (sigma < 0 || sigma > n - 1)
      throw InvalidArgument("sigma must lie in [0, n-1], got " + std::to_string(sigma));
  }
};

/// Cyclic support {row, row+1, ..., row+sigma} mod n, in that order.
inline std::vector<int> cyclic_support(int n, int sigma, int row) {
  std::vector<int> s(static_cast<std::size_t>(sigma) + 1);
  for (int j = 0; j <= sigma; ++j) s[static_cast<std::size_t>(j)] = (row + j) % n;
  return s;
}

/// The n x n encoding matrix B_sigma of one component code. `check` holds the
/// sigma x n matrix H used during construction (H * B^T = 0); it is empty for
/// the identity component and for matrices built by hand.
class EncodingMatrix {
 public:
  EncodingMatrix() = default;
  EncodingMatrix(int sigma, Matrix entries, Matrix check = Matrix())
      : sigma_(sigma), entries_(std::move(entries)), check_(std::move(check)) {
    if (entries_.rows() != entries_.cols())
      throw InvalidArgument("encoding matrix must be square (k = n)");
    if (sigma_ < 0 || sigma_ >= entries_.rows())
      throw InvalidArgument("sigma out of range for encoding matrix");
  }

  static EncodingMatrix identity(int n) { return EncodingMatrix(0, Matrix::Identity(n, n)); }

  int n() const noexcept { return static_cast<int>(entries_.rows()); }
  int sigma() const noexcept { return sigma_; }
  const Matrix& entries() const noexcept { return entries_; }
  const Matrix& check() const noexcept { return check_; }

  /// Indices of the exactly-nonzero entries of row i, ascending.
  std::vector<int> support(int row) const {
    std::vector<int> s;
    for (int j = 0; j < n(); ++j)
      if (entries_(row, j) != 0.0) s.push_back(j);
    return s;
  }

  friend bool operator==(const EncodingMatrix& a, const EncodingMatrix& b) {
    return a.sigma_ == b.sigma_ && a.entries_.rows() == b.entries_.rows() &&
           a.entries_ == b.entries_ && a.check_.rows() == b.check_.rows() &&
           a.check_.cols() == b.check_.cols() && a.check_ == b.check_;
  }

 private:
  int sigma_ = 0;
  Matrix entries_;
  Matrix check_;
};

/// One decoding row a with a * B_sigma = 1 and supp(a) within `responsive_set`.
struct DecodingRow {
  std::vector<int> responsive_set;
  Vector coefficients;
  double residual = 0.0;
};

namespace detail {

inline double condition_number(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 1.0;
  const double smallest = sv(sv.size() - 1);
  if (smallest == 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smallest;
}

/// Least-squares a over `rows` of B with a_rows^T * B_rows = 1^T; returns the
/// full-length coefficient vector and the infinity-norm residual.
inline std::pair<Vector, double> solve_decoding(const Matrix& b, std::span<const int> rows) {
  const auto n = b.rows();
  const auto r = static_cast<Eigen::Index>(rows.size());
  Matrix sub(r, b.cols());
  for (Eigen::Index i = 0; i < r; ++i) sub.row(i) = b.row(rows[static_cast<std::size_t>(i)]);
  const Vector ones = Vector::Ones(b.cols());
  const Vector a_sub = sub.transpose().colPivHouseholderQr().solve(ones);
  Vector a = Vector::Zero(n);
  for (Eigen::Index i = 0; i < r; ++i) a(rows[static_cast<std::size_t>(i)]) = a_sub(i);
  const double residual = (sub.transpose() * a_sub - ones).lpNorm<Eigen::Infinity>();
  return {std::move(a), std::isfinite(residual) ? residual : std::numeric_limits<double>::infinity()};
}

inline std::vector<int> normalize_index_set(std::span<const int> set, int n) {
  std::vector<int> s(set.begin(), set.end());
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end())
    throw InvalidArgument("responsive set contains duplicate worker indices");
  if (!s.empty() && (s.front() < 0 || s.back() >= n))
    throw InvalidArgument("responsive set contains an out-of-range worker index");
  return s;
}

}  // namespace detail

struct ConstructionOptions {
  double condition_limit = kDefaultConditionLimit;
  int max_attempts = kDefaultConstructionAttempts;
};

/// Single construction attempt from the given seed. Draws a standard-normal
/// sigma x n matrix H with zero row sums and places each row of B in the null
/// space of H on its cyclic support. Throws SingularSystem when one of the
/// sigma x sigma solves is worse conditioned than the limit.
inline EncodingMatrix try_build_cyclic_encoding(int n, int sigma, std::uint64_t seed,
                                                double condition_limit = kDefaultConditionLimit) {
  CodeParams{n, n, sigma}.validate();
  if (sigma < 1) throw InvalidArgument("cyclic construction needs sigma >= 1; use the identity");

  Engine rng = make_engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix h(sigma, n);
  for (int r = 0; r < sigma; ++r)
    for (int c = 0; c < n; ++c) h(r, c) = normal(rng);
  h.col(n - 1) = -h.leftCols(n - 1).rowwise().sum();

  Matrix b = Matrix::Zero(n, n);
  Matrix system(sigma, sigma);
  for (int i = 0; i < n; ++i) {
    const auto support = cyclic_support(n, sigma, i);
    for (int j = 0; j < sigma; ++j) system.col(j) = h.col(support[static_cast<std::size_t>(j) + 1]);
    const double cond = detail::condition_number(system);
    if (!(cond <= condition_limit))
      throw SingularSystem("row " + std::to_string(i) + " has condition number " + std::to_string(cond));
    const Vector x = system.fullPivLu().solve(-h.col(support.front()));
    b(i, support.front()) = 1.0;
    for (int j = 0; j < sigma; ++j) {
      // An exact zero would shrink the support below sigma + 1.
      if (x(j) == 0.0) throw SingularSystem("zero coefficient inside support of row " + std::to_string(i));
      b(i, support[static_cast<std::size_t>(j) + 1]) = x(j);
    }
  }
  return EncodingMatrix(sigma, std::move(b), std::move(h));
}

/// Deterministic in (n, sigma, seed). Retries on derived sub-seeds when an
/// attempt is ill-conditioned and throws ConstructionFailed after the last one.
inline EncodingMatrix build_cyclic_encoding(int n, int sigma, std::uint64_t seed,
                                            const ConstructionOptions& options = {}) {
  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    try {
      return try_build_cyclic_encoding(n, sigma, derive_seed(seed, static_cast<std::uint64_t>(attempt)),
                                       options.condition_limit);
    } catch (const SingularSystem&) {
    }
  }
  throw ConstructionFailed("no well-conditioned (" + std::to_string(n) + ", " + std::to_string(sigma) +
                           ") code after " + std::to_string(options.max_attempts) + " attempts");
}

/// Decoding row for B from the responsive workers. When more than n - sigma
/// workers responded, the n - sigma smallest indices are used.
inline DecodingRow decode_row(const EncodingMatrix& b, std::span<const int> responsive_set,
                              double tol = kDefaultDecodeTolerance) {
  auto set = detail::normalize_index_set(responsive_set, b.n());
  const auto quorum = static_cast<std::size_t>(b.n() - b.sigma());
  if (set.size() < quorum)
    throw NotDecodable(std::to_string(set.size()) + " responders, need " + std::to_string(quorum));
  set.resize(quorum);
  auto [a, residual] = detail::solve_decoding(b.entries(), set);
  if (!(residual <= tol))
    throw NumericalFailure("decoding residual " + std::to_string(residual) + " exceeds " + std::to_string(tol));
  return DecodingRow{std::move(set), std::move(a), residual};
}

/// Ordered family of component codes for sigma = 0..s_max.
class NestedGradientCode {
 public:
  NestedGradientCode() = default;
  NestedGradientCode(int n, std::uint64_t seed, std::vector<EncodingMatrix> components)
      : n_(n), seed_(seed), components_(std::move(components)) {
    if (components_.empty()) throw InvalidArgument("nested code needs at least one component");
    for (const auto& c : components_)
      if (c.n() != n_) throw InvalidArgument("component size does not match n");
  }

  int n() const noexcept { return n_; }
  int s_max() const noexcept { return static_cast<int>(components_.size()) - 1; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<EncodingMatrix>& components() const noexcept { return components_; }
  const EncodingMatrix& component(int sigma) const { return components_.at(static_cast<std::size_t>(sigma)); }

  friend bool operator==(const NestedGradientCode& a, const NestedGradientCode& b) = default;

 private:
  int n_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<EncodingMatrix> components_;
};

inline NestedGradientCode build_ngc(int n, int s_max, std::uint64_t seed, const ConstructionOptions& options = {}) {
  if (n < 1) throw InvalidArgument("n must be positive");
  if (s_max < 0 || s_max > n - 1)
    throw InvalidArgument("s_max must lie in [0, n-1], got " + std::to_string(s_max));
  std::vector<EncodingMatrix> components;
  components.reserve(static_cast<std::size_t>(s_max) + 1);
  components.push_back(EncodingMatrix::identity(n));
  for (int sigma = 1; sigma <= s_max; ++sigma)
    components.push_back(build_cyclic_encoding(n, sigma, derive_seed(seed, 0x100u + static_cast<std::uint64_t>(sigma)), options));
  return NestedGradientCode(n, seed, std::move(components));
}

struct VerificationReport {
  int min_support = 0;
  bool support_ok = false;
  bool all_subsets_decodable = false;
  bool stacked_ok = false;
  std::size_t subsets_checked = 0;
  double max_residual = 0.0;
  std::optional<std::vector<int>> first_failing_set;

  bool passed() const noexcept { return support_ok && all_subsets_decodable && stacked_ok; }
};

/// Exhaustive check of the gradient-code properties over all C(n, sigma)
/// responsive sets of size n - sigma.
inline VerificationReport verify_gradient_code(const EncodingMatrix& b, int sigma, double tol = kDefaultDecodeTolerance,
                                               int cap = kDefaultVerificationCap) {
  const int n = b.n();
  if (n > cap) throw CapExceeded("n = " + std::to_string(n) + " above verification cap " + std::to_string(cap));
  CodeParams{n, n, sigma}.validate();

  VerificationReport report;
  report.min_support = n;
  for (int i = 0; i < n; ++i)
    report.min_support = std::min(report.min_support, static_cast<int>(b.support(i).size()));
  report.support_ok = report.min_support >= sigma + 1;

  // Enumerate (n - sigma)-subsets in lexicographic order.
  const int r = n - sigma;
  std::vector<int> subset(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) subset[static_cast<std::size_t>(i)] = i;
  std::vector<Vector> decoders;
  report.all_subsets_decodable = true;
  while (true) {
    auto [a, residual] = detail::solve_decoding(b.entries(), subset);
    ++report.subsets_checked;
    report.max_residual = std::max(report.max_residual, residual);
    if (!(residual <= tol) && report.all_subsets_decodable) {
      report.all_subsets_decodable = false;
      report.first_failing_set = subset;
    }
    decoders.push_back(std::move(a));

    int pos = r - 1;
    while (pos >= 0 && subset[static_cast<std::size_t>(pos)] == n - r + pos) --pos;
    if (pos < 0) break;
    ++subset[static_cast<std::size_t>(pos)];
    for (int j = pos + 1; j < r; ++j) subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j) - 1] + 1;
  }

  Matrix a_stack(static_cast<Eigen::Index>(decoders.size()), n);
  for (std::size_t i = 0; i < decoders.size(); ++i) a_stack.row(static_cast<Eigen::Index>(i)) = decoders[i].transpose();
  const double stacked_residual = (a_stack * b.entries() - Matrix::Ones(a_stack.rows(), n)).lpNorm<Eigen::Infinity>();
  report.stacked_ok = stacked_residual <= tol;
  return report;
}

struct NestingReport {
  bool nested = true;
  /// (sigma, row) with supp(b_sigma^(row)) not contained in supp(b_{sigma+1}^(row)).
  std::optional<std::pair<int, int>> violation;
};

inline NestingReport verify_nesting(const NestedGradientCode& code) {
  for (int sigma = 0; sigma < code.s_max(); ++sigma) {
    const auto& lower = code.component(sigma);
    const auto& upper = code.component(sigma + 1);
    for (int i = 0; i < code.n(); ++i) {
      const auto inner = lower.support(i);
      const auto outer = upper.support(i);
      if (!std::includes(outer.begin(), outer.end(), inner.begin(), inner.end()))
        return NestingReport{false, std::make_pair(sigma, i)};
    }
  }
  return {};
}

struct StorageParams {
  std::int64_t beta = 0;  // data rows one worker can store
  std::int64_t m = 0;     // total data rows
  std::int64_t c = 0;     // features
  std::int64_t n = 0;
  std::int64_t k = 0;
};

/// min(floor(n*beta*m / (k*c)) - 1, n - 1), floored at 0.
inline int max_tolerable_stragglers(const StorageParams& p) {
  if (p.beta <= 0 || p.m <= 0 || p.c <= 0 || p.n <= 0 || p.k <= 0)
    throw InvalidArgument("storage parameters must be positive");
  const std::int64_t bound = (p.n * p.beta * p.m) / (p.k * p.c) - 1;
  return static_cast<int>(std::clamp<std::int64_t>(bound, 0, p.n - 1));
}

/// Worker response x_i = sum_j b_i[j] g_j. Only gradients on the support of
/// b_i are read; a missing one there raises MissingGradient.
inline Vector encode_response(const Eigen::Ref<const Eigen::RowVectorXd>& b_row,
                              std::span<const std::optional<Vector>> partial_gradients) {
  if (static_cast<Eigen::Index>(partial_gradients.size()) != b_row.size())
    throw InvalidArgument("need one gradient slot per task");
  std::optional<Vector> sum;
  for (Eigen::Index j = 0; j < b_row.size(); ++j) {
    const double coef = b_row(j);
    if (coef == 0.0) continue;
    const auto& g = partial_gradients[static_cast<std::size_t>(j)];
    if (!g) throw MissingGradient("task " + std::to_string(j) + " is in the support but was not computed");
    if (!sum) sum = Vector::Zero(g->size());
    *sum += coef * *g;
  }
  if (!sum) throw InvalidArgument("encoding row has empty support");
  return *sum;
}

/// Rows of G are the partial gradients g_1..g_k.
inline Vector encode_response(const Eigen::Ref<const Eigen::RowVectorXd>& b_row, const Matrix& gradients) {
  std::vector<std::optional<Vector>> slots(static_cast<std::size_t>(gradients.rows()));
  for (Eigen::Index j = 0; j < gradients.rows(); ++j)
    if (b_row(j) != 0.0) slots[static_cast<std::size_t>(j)] = gradients.row(j).transpose();
  return encode_response(b_row, slots);
}

/// sum_i a_i x_i over the responsive set of `row`.
inline Vector decode_sum(const DecodingRow& row, std::span<const std::optional<Vector>> responses) {
  std::optional<Vector> sum;
  for (int i : row.responsive_set) {
    const auto& x = responses[static_cast<std::size_t>(i)];
    if (!x) throw MissingGradient("no response from worker " + std::to_string(i));
    if (!sum) sum = Vector::Zero(x->size());
    *sum += row.coefficients(i) * *x;
  }
  if (!sum) throw InvalidArgument("empty responsive set");
  return *sum;
}

}  // namespace ngc
