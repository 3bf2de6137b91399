#pragma once

// Breadth-first list detection over the Q-ary tree of depth K induced by the
// Gram transform. The weight of a full path d is
//
//   W(d) = sum_k [ Re{y_k d_k} + |sum_{j<=k} t_kj d_j|^2 + N0 (-log p_k(d_k)) + u_k |d_k|^2 ]
//        = ||r - S d||^2 - ||r||^2 - N0 log p(d),
//
// so exp(-W / N0) is proportional to the joint posterior of d.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "mud/constellation.hpp"
#include "mud/error.hpp"
#include "mud/gram.hpp"
#include "mud/probability.hpp"

namespace mud {

inline constexpr double kInfiniteThreshold = std::numeric_limits<double>::infinity();

struct SearchParams {
  double t_threshold = 16.0;  // in multiples of N0; infinity disables pruning by weight
  std::size_t p_max = 512;
  std::size_t p_min = 1;
  std::size_t p_list = 0;  // 0 selects p_max

  [[nodiscard]] std::size_t list_size() const noexcept { return p_list == 0 ? p_max : p_list; }

  bool operator==(const SearchParams&) const = default;

  void validate() const {
    require(p_min >= 1 && p_min <= p_max, ErrorCode::InvalidParameter, "need 1 <= p_min <= p_max");
    require(list_size() <= p_max, ErrorCode::InvalidParameter, "p_list must not exceed p_max");
    require(t_threshold >= 0.0, ErrorCode::InvalidParameter, "threshold must be nonnegative");
  }
};

/// Leaf sequences with total path weights, ascending by weight.
struct DetectorList {
  Eigen::Index users = 0;
  std::vector<std::uint8_t> symbols;  // size() x users, row-major
  std::vector<double> weights;
  std::uint64_t node_expansions = 0;

  [[nodiscard]] std::size_t size() const noexcept { return weights.size(); }
  [[nodiscard]] std::span<const std::uint8_t> sequence(std::size_t i) const {
    return {symbols.data() + i * static_cast<std::size_t>(users), static_cast<std::size_t>(users)};
  }
};

/// -N0 log p, with zero probabilities clamped to the smallest normal double.
inline double prior_cost(double probability, double n0) {
  return -n0 * std::log(std::max(probability, std::numeric_limits<double>::min()));
}

/// Weight added when extending a path to depth `depth` (1-based) whose symbols
/// are partial[0..depth-1].
inline double path_extension_weight(std::size_t depth, std::span<const std::uint8_t> partial,
                                    const MatchedFilterStats& stats, const GramTransform& transform,
                                    const ProbabilityMatrix& priors, const Constellation& c, double n0) {
  const auto k = static_cast<Eigen::Index>(depth) - 1;
  require(depth >= 1 && k < transform.users() && partial.size() >= depth, ErrorCode::InvalidParameter,
          "depth outside the tree");
  const Complex d = c[partial[depth - 1]];
  Complex acc{};
  for (Eigen::Index j = 0; j <= k; ++j) acc += transform.factor()(k, j) * c[partial[static_cast<std::size_t>(j)]];
  return (stats.y(k) * d).real() + std::norm(acc) + prior_cost(priors(partial[depth - 1], k), n0) +
         transform.u()(k) * std::norm(d);
}

namespace detail {

/// Symbol-type specific arithmetic: real constellations run on doubles.
inline double re_product(double y, double d) { return y * d; }
inline double re_product(Complex y, Complex d) { return (y * d).real(); }
inline double energy(double v) { return v * v; }
inline double energy(Complex v) { return std::norm(v); }

}  // namespace detail

/// T-algorithm with reusable scratch space; one instance per worker thread.
class TreeSearcher {
 public:
  DetectorList search(const MatchedFilterStats& stats, const GramTransform& transform, const ProbabilityMatrix& priors,
                      const Constellation& c, const SearchParams& params, double n0) {
    params.validate();
    check_inputs(stats, transform, priors, c);
    if (c.is_real()) return run<double>(stats, transform, priors, c, params, n0);
    return run<Complex>(stats, transform, priors, c, params, n0);
  }

 private:
  struct Candidate {
    double weight;
    std::uint32_t parent;
    std::uint8_t symbol;
  };

  static void check_inputs(const MatchedFilterStats& stats, const GramTransform& transform,
                           const ProbabilityMatrix& priors, const Constellation& c) {
    const Eigen::Index k = transform.users();
    require(stats.y.size() == k, ErrorCode::DimensionMismatch, "statistics length differs from user count");
    require(priors.users() == k && priors.alphabet() == static_cast<Eigen::Index>(c.size()),
            ErrorCode::DimensionMismatch, "prior matrix shape differs from Q x K");
    require(c.size() <= 256, ErrorCode::InvalidParameter, "alphabets above 256 points are not supported");
  }

  template <typename Scalar>
  DetectorList run(const MatchedFilterStats& stats, const GramTransform& transform, const ProbabilityMatrix& priors,
                   const Constellation& c, const SearchParams& params, double n0) {
    const auto users = static_cast<std::size_t>(transform.users());
    const std::size_t q_count = c.size();
    const double slack = params.t_threshold * n0;
    const Eigen::MatrixXd& t = transform.factor();

    std::vector<Scalar> points(q_count);
    for (std::size_t q = 0; q < q_count; ++q) {
      if constexpr (std::is_same_v<Scalar, double>) {
        points[q] = c[q].real();
      } else {
        points[q] = c[q];
      }
    }
    // depth-k terms that do not depend on earlier symbols
    branch_.assign(users * q_count, 0.0);
    for (std::size_t k = 0; k < users; ++k) {
      Scalar y;
      if constexpr (std::is_same_v<Scalar, double>) {
        y = stats.y(static_cast<Eigen::Index>(k)).real();
      } else {
        y = stats.y(static_cast<Eigen::Index>(k));
      }
      for (std::size_t q = 0; q < q_count; ++q) {
        const auto ki = static_cast<Eigen::Index>(k);
        branch_[k * q_count + q] = detail::re_product(y, points[q]) +
                                   prior_cost(priors(static_cast<Eigen::Index>(q), ki), n0) +
                                   transform.u()(ki) * detail::energy(points[q]);
      }
    }

    // survivors: symbol paths (row stride = users) and their weights
    cur_syms_.assign(users, 0);
    cur_weights_.assign(1, 0.0);
    std::size_t alive = 1;
    DetectorList out;
    out.users = transform.users();

    for (std::size_t k = 0; k < users; ++k) {
      cands_.clear();
      const double diag = t(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
      for (std::size_t p = 0; p < alive; ++p) {
        const std::uint8_t* path = &cur_syms_[p * users];
        Scalar partial{};
        for (std::size_t j = 0; j < k; ++j)
          partial += t(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) * points[path[j]];
        for (std::size_t q = 0; q < q_count; ++q) {
          const double w = cur_weights_[p] + detail::energy(partial + diag * points[q]) + branch_[k * q_count + q];
          cands_.push_back({w, static_cast<std::uint32_t>(p), static_cast<std::uint8_t>(q)});
        }
      }
      out.node_expansions += cands_.size();

      const auto keep = select(params, slack, k, users);
      if (k + 1 == users) {
        std::sort(cands_.begin(), cands_.begin() + static_cast<std::ptrdiff_t>(keep), order(k, users));
      }
      next_syms_.resize(keep * users);
      next_weights_.resize(keep);
      for (std::size_t i = 0; i < keep; ++i) {
        const auto& cand = cands_[i];
        std::copy_n(&cur_syms_[cand.parent * users], k, &next_syms_[i * users]);
        next_syms_[i * users + k] = cand.symbol;
        next_weights_[i] = cand.weight;
      }
      std::swap(cur_syms_, next_syms_);
      std::swap(cur_weights_, next_weights_);
      alive = keep;
    }

    const std::size_t listed = std::min(alive, params.list_size());
    out.symbols.assign(cur_syms_.begin(), cur_syms_.begin() + static_cast<std::ptrdiff_t>(listed * users));
    out.weights.assign(cur_weights_.begin(), cur_weights_.begin() + static_cast<std::ptrdiff_t>(listed));
    return out;
  }

  /// Total order: weight, then the new symbol, then the parent path lexicographically.
  auto order(std::size_t depth, std::size_t users) const {
    return [this, depth, users](const Candidate& a, const Candidate& b) {
      if (a.weight != b.weight) return a.weight < b.weight;
      if (a.symbol != b.symbol) return a.symbol < b.symbol;
      return std::lexicographical_compare(&cur_syms_[a.parent * users], &cur_syms_[a.parent * users] + depth,
                                          &cur_syms_[b.parent * users], &cur_syms_[b.parent * users] + depth);
    };
  }

  /// Moves the survivors to the front of cands_ and returns their count.
  /// Keeps everything within `slack` of the best candidate, padded up to p_min
  /// and capped at p_max, always the smallest under order().
  std::size_t select(const SearchParams& params, double slack, std::size_t depth, std::size_t users) {
    const std::size_t n = cands_.size();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& cand : cands_) best = std::min(best, cand.weight);
    std::size_t within = 0;
    const double limit = best + slack;
    for (const auto& cand : cands_) within += cand.weight <= limit ? 1 : 0;
    std::size_t keep = std::max(within, std::min(params.p_min, n));
    keep = std::min(keep, params.p_max);
    if (keep < n) {
      std::nth_element(cands_.begin(), cands_.begin() + static_cast<std::ptrdiff_t>(keep), cands_.end(),
                       order(depth, users));
    }
    return keep;
  }

  std::vector<double> branch_;
  std::vector<Candidate> cands_;
  std::vector<std::uint8_t> cur_syms_, next_syms_;
  std::vector<double> cur_weights_, next_weights_;
};

inline DetectorList t_search(const MatchedFilterStats& stats, const GramTransform& transform,
                             const ProbabilityMatrix& priors, const Constellation& c, const SearchParams& params,
                             double n0) {
  TreeSearcher searcher;
  return searcher.search(stats, transform, priors, c, params, n0);
}

/// Default ceiling on Q^K for full enumeration.
inline constexpr std::uint64_t kDefaultEnumerationCap = std::uint64_t{1} << 20;

/// Every one of the Q^K sequences with its exact path weight, sorted by
/// (weight, lexicographic sequence).
inline DetectorList exhaustive_list(const MatchedFilterStats& stats, const GramTransform& transform,
                                    const ProbabilityMatrix& priors, const Constellation& c, double n0,
                                    std::uint64_t cap = kDefaultEnumerationCap) {
  const auto users = static_cast<std::size_t>(transform.users());
  const std::size_t q_count = c.size();
  require(stats.y.size() == transform.users() && priors.users() == transform.users() &&
              priors.alphabet() == static_cast<Eigen::Index>(q_count),
          ErrorCode::DimensionMismatch, "input shapes disagree");
  std::uint64_t total = 1;
  for (std::size_t k = 0; k < users; ++k) {
    require(total <= cap / q_count, ErrorCode::CapExceeded, "Q^K exceeds the enumeration cap");
    total *= q_count;
  }

  DetectorList out;
  out.users = transform.users();
  out.symbols.reserve(total * users);
  out.weights.reserve(total);
  std::vector<std::uint8_t> path(users, 0);
  std::vector<double> partial_weight(users + 1, 0.0);

  // depth-first over the tree so shared prefixes are evaluated once
  auto descend = [&](auto&& self, std::size_t depth) -> void {
    if (depth == users) {
      out.symbols.insert(out.symbols.end(), path.begin(), path.end());
      out.weights.push_back(partial_weight[users]);
      return;
    }
    for (std::size_t q = 0; q < q_count; ++q) {
      path[depth] = static_cast<std::uint8_t>(q);
      partial_weight[depth + 1] =
          partial_weight[depth] + path_extension_weight(depth + 1, path, stats, transform, priors, c, n0);
      self(self, depth + 1);
    }
  };
  descend(descend, 0);
  out.node_expansions = 0;
  for (std::uint64_t level = 1, width = q_count; level <= users; ++level, width *= q_count)
    out.node_expansions += width;

  std::vector<std::size_t> idx(out.weights.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (out.weights[a] != out.weights[b]) return out.weights[a] < out.weights[b];
    return std::lexicographical_compare(&out.symbols[a * users], &out.symbols[a * users] + users,
                                        &out.symbols[b * users], &out.symbols[b * users] + users);
  });
  DetectorList sorted;
  sorted.users = out.users;
  sorted.node_expansions = out.node_expansions;
  sorted.symbols.resize(out.symbols.size());
  sorted.weights.resize(out.weights.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    sorted.weights[i] = out.weights[idx[i]];
    std::copy_n(&out.symbols[idx[i] * users], users, &sorted.symbols[i * users]);
  }
  return sorted;
}

}  // namespace mud
