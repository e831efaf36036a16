#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls the library's scoring, aggregation or loss code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "quantlearn/explanation.hpp"
#include "quantlearn/model.hpp"
#include "quantlearn/quantifier.hpp"
#include "quantlearn/taskgen.hpp"

namespace oracle {

using quantlearn::ConditionNode;
using quantlearn::Explanation;
using quantlearn::Task;
using quantlearn::Truth;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Logit of label `l` for one explanation, written out label by label.
inline double scalar_logit(double se, double sn, double sc, std::size_t target, std::size_t l, bool negated, double p,
                           std::size_t n_labels, bool complement_split, bool neutral_term) {
  const double e = negated ? sc : se;
  const double c = negated ? se : sc;
  const double n = neutral_term ? sn / static_cast<double>(n_labels) : 0.0;
  if (l == target) return p * e + (1.0 - p) * c + n;
  const double share = complement_split ? 1.0 / static_cast<double>(n_labels - 1) : 1.0;
  return p * c + (1.0 - p) * e * share + n;
}

enum class T3 { F = 0, U = 1, T = 2 };

inline T3 from_truth(Truth t) {
  return t == Truth::True ? T3::T : t == Truth::False ? T3::F : T3::U;
}

// Kleene connectives as lookup tables.
inline T3 k_not(T3 a) {
  static constexpr T3 table[3] = {T3::T, T3::U, T3::F};
  return table[static_cast<int>(a)];
}
inline T3 k_and(T3 a, T3 b) {
  static constexpr T3 table[3][3] = {{T3::F, T3::F, T3::F}, {T3::F, T3::U, T3::U}, {T3::F, T3::U, T3::T}};
  return table[static_cast<int>(a)][static_cast<int>(b)];
}
inline T3 k_or(T3 a, T3 b) {
  static constexpr T3 table[3][3] = {{T3::F, T3::U, T3::T}, {T3::U, T3::U, T3::T}, {T3::T, T3::T, T3::T}};
  return table[static_cast<int>(a)][static_cast<int>(b)];
}

// Truth of a condition node by recursion over the tables; leaves looked up
// through `leaf`.
template <typename LeafFn>
T3 kleene(const ConditionNode& node, LeafFn&& leaf) {
  switch (node.kind) {
    case ConditionNode::Kind::leaf: return leaf(node.comparison);
    case ConditionNode::Kind::negation: return k_not(kleene(node.children.front(), leaf));
    case ConditionNode::Kind::conjunction: {
      T3 acc = T3::T;
      for (const auto& c : node.children) acc = k_and(acc, kleene(c, leaf));
      return acc;
    }
    case ConditionNode::Kind::disjunction: {
      T3 acc = T3::F;
      for (const auto& c : node.children) acc = k_or(acc, kleene(c, leaf));
      return acc;
    }
  }
  return T3::U;
}

inline std::size_t label_position(const Task& task, const std::string& label) {
  return static_cast<std::size_t>(std::find(task.labels.begin(), task.labels.end(), label) - task.labels.begin());
}

// Clean-oracle NLI vertex for a condition truth, with epsilon smearing.
struct Scores {
  double e, n, c;
};
inline Scores vertex(T3 t, double eps) {
  const double hi = 1.0 - eps, lo = eps / 2.0;
  if (t == T3::T) return {hi, lo, lo};
  if (t == T3::F) return {lo, lo, hi};
  return {lo, hi, lo};
}

inline std::vector<double> softmax(const std::vector<double>& z) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  std::vector<double> out;
  double s = 0;
  for (double v : z) {
    out.push_back(std::exp(v - mx));
    s += out.back();
  }
  for (double& v : out) v /= s;
  return out;
}

// Hidden-layer network score from the accessor view of the parameters.
inline double mlp_score(const quantlearn::AttentionNet& net, const quantlearn::PairFeatures& x) {
  double out = net.b2();
  for (std::size_t u = 0; u < net.hidden(); ++u) {
    double a = net.b1(u);
    for (std::size_t i = 0; i < x.size(); ++i) a += net.w1(i, u) * x[i];
    out += net.w2(u) * std::tanh(a);
  }
  return out;
}

// Spearman with average ranks, computed via explicit pairwise rank counting.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (v[j] < v[i]) ++less;
        else if (v[j] == v[i]) ++equal;
      }
      r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += ra[i], mb += rb[i];
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Random condition trees over attributes a0..a{n-1} for round-trip tests.
class TreeSampler {
 public:
  explicit TreeSampler(std::uint64_t seed) : rng_(seed) {}

  ConditionNode tree(int depth) {
    const int pick = static_cast<int>(below(depth <= 1 ? 1 : 4));
    if (pick == 0) return ConditionNode::leaf(comparison());
    if (pick == 1) return ConditionNode::negate(tree(depth - 1));
    std::vector<ConditionNode> kids;
    const std::size_t k = 2 + below(2);
    for (std::size_t i = 0; i < k; ++i) kids.push_back(tree(depth - 1));
    return pick == 2 ? ConditionNode::all_of(std::move(kids)) : ConditionNode::any_of(std::move(kids));
  }

  Explanation explanation(const std::vector<std::string>& labels) {
    Explanation e;
    e.condition = tree(1 + static_cast<int>(below(4)));
    if (below(2)) e.quantifier = std::string(quantlearn::kQuantifierWords[below(quantlearn::kQuantifierCount)]);
    e.label_negated = below(2) == 1;
    e.label = labels[below(labels.size())];
    return e;
  }

 private:
  std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

  quantlearn::Comparison comparison() {
    quantlearn::Comparison c;
    c.attribute = "attr" + std::to_string(below(6));
    const std::size_t kind = below(3);
    if (kind == 0) {
      c.op = static_cast<quantlearn::CompareOp>(below(6));
      c.value = static_cast<std::int64_t>(below(41)) - 20;
    } else if (kind == 1) {
      c.op = static_cast<quantlearn::CompareOp>(below(6));
      c.value = std::uniform_real_distribution<double>(-50.0, 50.0)(rng_);
    } else {
      c.op = below(2) ? quantlearn::CompareOp::equal : quantlearn::CompareOp::not_equal;
      static const char* words[] = {"red", "blue", "green", "tall", "short", "x_1", "Alpha"};
      c.value = std::string(words[below(7)]);
    }
    return c;
  }

  std::mt19937_64 rng_;
};

}  // namespace oracle
