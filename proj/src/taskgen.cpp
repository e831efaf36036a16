#include "quantlearn/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "quantlearn/error.hpp"
#include "quantlearn/random.hpp"

namespace quantlearn {

namespace {

constexpr std::string_view kNonsenseWords[] = {
    "dax",  "wug",  "blick", "fep",  "toma", "zorp", "bab",  "banu", "bap",  "bebi", "bem",  "ber",
    "bige", "bip",  "bivo",  "bola", "bon",  "buk",  "dak",  "def",  "dese", "deti", "dira", "diwo",
    "diz",  "dok",  "dos",   "dubi", "dubu", "duda", "dufi", "duga", "duk",  "duwi", "fab",  "fek",
    "femo", "feso", "fif",   "finu", "fopu", "fowe", "fubu", "gag",  "garu", "gep",  "gid",  "gifo",
    "gof",  "gozi", "kafi",  "kaki", "kasi", "keve", "kew",  "kidu", "kif",  "kivi", "kof",  "kon",
    "kop",  "koz",  "kude",  "kus",  "lem",  "lide", "loge", "lov",  "lul",  "mag",  "mage", "mago",
    "masu", "mebo", "mez",   "mimi", "miru", "mof",  "muli", "nelu", "nif",  "nise", "nome", "nowo",
    "num",  "nup",  "nuz",   "pasu", "pes",  "pigi", "pize", "pol",  "popi", "puv",  "rad",  "rami",
    "repi", "reto", "ril",   "rof",  "ror",  "roti", "rufa", "sab",  "seb",  "sed",  "seg",  "seno",
    "sido", "sok",  "suk",   "tamu", "ted",  "teg",  "tem",  "tife", "tig",  "tuf",  "tus",  "vaw",
    "vaz",  "vede", "vere",  "vevo", "vome", "vozo", "vulo", "vum",  "vumo", "vur",  "wanu", "wat",
    "wef",  "wimu", "wope",  "wufa", "wun",  "wus",  "zada", "zek",  "zive", "ziz",  "zoba", "zod",
    "zoma", "zov",  "zud",   "zuf",  "zugo", "zum",  "zupa", "zuwi"};

constexpr std::size_t kWordCount = std::size(kNonsenseWords);

// Binary rules are redrawn until their condition holds on this share of the
// joint domain, so neither label dominates.
constexpr double kMinFiring = 0.25;
constexpr double kMaxFiring = 0.75;
constexpr int kMaxConditionDraws = 200;
constexpr int kMaxRejections = 100000;

class WordPool {
 public:
  explicit WordPool(Rng& rng) {
    for (std::size_t i = 0; i < kWordCount; ++i) order_.push_back(i);
    shuffle(order_, rng);
  }
  std::string next() {
    if (next_ >= order_.size()) throw DataError("nonsense word pool exhausted");
    return std::string(kNonsenseWords[order_[next_++]]);
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t next_ = 0;
};

bool has_clause(NegationKind n) { return n == NegationKind::clause || n == NegationKind::both; }
bool has_label(NegationKind n) { return n == NegationKind::label || n == NegationKind::both; }

// A non-trivial comparison on one attribute without clause negation.
Comparison random_comparison(const AttributeSpec& attr, Rng& rng) {
  Comparison c;
  c.attribute = attr.name;
  const Domain& d = attr.domain;
  if (d.kind == Domain::Kind::categorical) {
    c.op = CompareOp::equal;
    c.value = d.at(uniform_index(rng, d.size()));
    return c;
  }
  switch (uniform_index(rng, 3)) {
    case 0:
      c.op = CompareOp::equal;
      c.value = static_cast<std::int64_t>(uniform_int(rng, static_cast<int>(d.min), static_cast<int>(d.max)));
      break;
    case 1:
      c.op = CompareOp::greater;
      c.value = static_cast<std::int64_t>(uniform_int(rng, static_cast<int>(d.min), static_cast<int>(d.max) - 1));
      break;
    default:
      c.op = CompareOp::less;
      c.value = static_cast<std::int64_t>(uniform_int(rng, static_cast<int>(d.min) + 1, static_cast<int>(d.max)));
      break;
  }
  return c;
}

// Rewrites a leaf so it carries clause negation: either "not <leaf>" or, for
// equality, "<attr> not equal to <v>".
ConditionNode negate_leaf(Comparison c, Rng& rng) {
  if (c.op == CompareOp::equal && uniform_index(rng, 2) == 0) {
    c.op = CompareOp::not_equal;
    return ConditionNode::leaf(std::move(c));
  }
  return ConditionNode::negate(ConditionNode::leaf(std::move(c)));
}

// "not <attr> not equal to <v>": clause negation that keeps the meaning of
// "<attr> equal to <v>".
ConditionNode double_negated_equality(Comparison c) {
  c.op = CompareOp::not_equal;
  return ConditionNode::negate(ConditionNode::leaf(std::move(c)));
}

std::vector<std::size_t> pick_attributes(std::size_t n_schema, std::size_t k, Rng& rng,
                                         std::optional<std::size_t> exclude = std::nullopt) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n_schema; ++i)
    if (!exclude || i != *exclude) idx.push_back(i);
  shuffle(idx, rng);
  idx.resize(std::min(k, idx.size()));
  return idx;
}

ConditionNode junction(bool conjunction, std::vector<ConditionNode> children) {
  return conjunction ? ConditionNode::all_of(std::move(children)) : ConditionNode::any_of(std::move(children));
}

// Applies clause negation to one randomly chosen non-pivot position.
void insert_clause_negation(ConditionNode& node, Rng& rng, const std::string* pivot) {
  std::vector<ConditionNode*> leaves;
  std::vector<ConditionNode*> junctions;
  auto visit = [&](auto&& self, ConditionNode& n, bool top) -> void {
    if (n.kind == ConditionNode::Kind::leaf) {
      if (!pivot || n.comparison.attribute != *pivot) leaves.push_back(&n);
      return;
    }
    if (n.is_junction() && !top) {
      bool touches_pivot = false;
      for (const auto& a : mentioned_attributes(n)) touches_pivot |= pivot && a == *pivot;
      if (!touches_pivot) junctions.push_back(&n);
    }
    for (auto& c : n.children) self(self, c, false);
  };
  visit(visit, node, true);
  if (!junctions.empty() && uniform_index(rng, 3) == 0) {
    ConditionNode* j = junctions[uniform_index(rng, junctions.size())];
    *j = ConditionNode::negate(std::move(*j));
    return;
  }
  if (leaves.empty()) throw DataError("no position for clause negation");
  ConditionNode* leaf = leaves[uniform_index(rng, leaves.size())];
  *leaf = negate_leaf(leaf->comparison, rng);
}

ConditionNode binary_condition(const std::vector<AttributeSpec>& schema, Structure structure, bool clause, Rng& rng) {
  ConditionNode cond;
  switch (structure) {
    case Structure::simple: {
      const auto& attr = schema[uniform_index(rng, schema.size())];
      Comparison c = random_comparison(attr, rng);
      cond = clause ? negate_leaf(std::move(c), rng) : ConditionNode::leaf(std::move(c));
      return cond;
    }
    case Structure::single_junction: {
      const std::size_t k = 2 + uniform_index(rng, 2);
      std::vector<ConditionNode> kids;
      for (std::size_t i : pick_attributes(schema.size(), k, rng))
        kids.push_back(ConditionNode::leaf(random_comparison(schema[i], rng)));
      cond = junction(uniform_index(rng, 2) == 0, std::move(kids));
      break;
    }
    case Structure::nested: {
      const auto attrs = pick_attributes(schema.size(), 3, rng);
      const bool outer_and = uniform_index(rng, 2) == 0;
      std::vector<ConditionNode> inner;
      inner.push_back(ConditionNode::leaf(random_comparison(schema[attrs[0]], rng)));
      inner.push_back(ConditionNode::leaf(random_comparison(schema[attrs[1]], rng)));
      std::vector<ConditionNode> outer;
      outer.push_back(junction(!outer_and, std::move(inner)));
      outer.push_back(ConditionNode::leaf(random_comparison(schema[attrs[2]], rng)));
      if (uniform_index(rng, 2) == 0) std::swap(outer[0], outer[1]);
      cond = junction(outer_and, std::move(outer));
      break;
    }
  }
  if (clause) insert_clause_negation(cond, rng, nullptr);
  return cond;
}

// Multiclass rules share a pivot attribute and each rule pins the pivot to
// its own values, which makes the rules mutually exclusive.
std::vector<ConditionNode> multiclass_conditions(const std::vector<AttributeSpec>& schema, std::size_t n_rules,
                                                 Structure structure, bool clause, Rng& rng) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < schema.size(); ++i)
    if (schema[i].domain.size() >= n_rules) candidates.push_back(i);
  if (candidates.empty()) throw DataError("no pivot attribute wide enough for multiclass rules");
  const std::size_t pivot = candidates[uniform_index(rng, candidates.size())];
  const AttributeSpec& p = schema[pivot];
  std::vector<std::size_t> values(p.domain.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = i;
  shuffle(values, rng);
  std::size_t spare = n_rules;  // next unassigned pivot value

  auto pivot_eq = [&](std::size_t value_index) {
    return Comparison{p.name, CompareOp::equal, p.domain.at(value_index)};
  };

  std::vector<ConditionNode> out;
  for (std::size_t k = 0; k < n_rules; ++k) {
    const Comparison own = pivot_eq(values[k]);
    ConditionNode cond;
    bool negated = false;
    switch (structure) {
      case Structure::simple:
        cond = clause ? double_negated_equality(own) : ConditionNode::leaf(own);
        negated = clause;
        break;
      case Structure::single_junction: {
        if (spare < values.size() && uniform_index(rng, 2) == 0) {
          std::vector<ConditionNode> kids;
          kids.push_back(clause ? double_negated_equality(own) : ConditionNode::leaf(own));
          kids.push_back(ConditionNode::leaf(pivot_eq(values[spare++])));
          cond = ConditionNode::any_of(std::move(kids));
          negated = clause;
        } else {
          std::vector<ConditionNode> kids;
          kids.push_back(ConditionNode::leaf(own));
          for (std::size_t i : pick_attributes(schema.size(), 1 + uniform_index(rng, 2), rng, pivot))
            kids.push_back(ConditionNode::leaf(random_comparison(schema[i], rng)));
          if (uniform_index(rng, 2) == 0) std::swap(kids[0], kids[1]);
          cond = ConditionNode::all_of(std::move(kids));
        }
        break;
      }
      case Structure::nested: {
        const auto others = pick_attributes(schema.size(), 2, rng, pivot);
        std::vector<ConditionNode> inner;
        for (std::size_t i : others) inner.push_back(ConditionNode::leaf(random_comparison(schema[i], rng)));
        if (uniform_index(rng, 2) == 0) {
          // pivot and (x or y)
          std::vector<ConditionNode> outer;
          outer.push_back(ConditionNode::leaf(own));
          outer.push_back(ConditionNode::any_of(std::move(inner)));
          cond = ConditionNode::all_of(std::move(outer));
        } else {
          // (pivot and x) or (pivot and y)
          std::vector<ConditionNode> outer;
          for (auto& leaf : inner) {
            std::vector<ConditionNode> pair;
            pair.push_back(ConditionNode::leaf(own));
            pair.push_back(std::move(leaf));
            outer.push_back(ConditionNode::all_of(std::move(pair)));
          }
          cond = ConditionNode::any_of(std::move(outer));
        }
        break;
      }
    }
    if (clause && !negated) insert_clause_negation(cond, rng, &p.name);
    out.push_back(std::move(cond));
  }
  return out;
}

// Enumerates the joint domain of the attributes in `attrs`, calling fn with
// each assignment.
void enumerate_assignments(const std::vector<const AttributeSpec*>& attrs,
                           const std::function<void(const Attributes&)>& fn) {
  std::vector<std::size_t> cursor(attrs.size(), 0);
  Attributes a;
  for (const auto* spec : attrs) a.set(spec->name, spec->domain.at(0));
  while (true) {
    fn(a);
    std::size_t i = 0;
    for (; i < attrs.size(); ++i) {
      if (++cursor[i] < attrs[i]->domain.size()) {
        a.set(attrs[i]->name, attrs[i]->domain.at(cursor[i]));
        break;
      }
      cursor[i] = 0;
      a.set(attrs[i]->name, attrs[i]->domain.at(0));
    }
    if (i == attrs.size()) return;
  }
}

std::vector<const AttributeSpec*> specs_for(const std::vector<std::string>& names, const std::vector<AttributeSpec>& schema) {
  std::vector<const AttributeSpec*> out;
  for (const auto& n : names) {
    auto it = std::find_if(schema.begin(), schema.end(), [&](const AttributeSpec& s) { return s.name == n; });
    if (it == schema.end()) throw DataError("condition mentions attribute '" + n + "' outside the schema");
    out.push_back(&*it);
  }
  return out;
}

Attributes draw_attributes(const std::vector<AttributeSpec>& schema, Rng& rng) {
  Attributes a;
  for (const auto& spec : schema) a.set(spec.name, spec.domain.at(uniform_index(rng, spec.domain.size())));
  return a;
}

std::string draw_other(const std::vector<std::string>& labels, std::size_t exclude, Rng& rng) {
  std::size_t k = uniform_index(rng, labels.size() - 1);
  if (k >= exclude) ++k;
  return labels[k];
}

double rule_probability(const Explanation& e, const QuantifierLexicon& truth) {
  return e.quantifier ? truth.probability(*e.quantifier) : 1.0;
}

// Label for an example given which rule fires (binary tasks may fire none).
std::string sample_label(const Task& task, std::optional<std::size_t> fired, const QuantifierLexicon& truth, Rng& rng) {
  const std::size_t rule = fired.value_or(0);
  const Explanation& e = task.explanations.at(rule);
  const double p = rule_probability(e, truth);
  const std::size_t target = task.label_index(e.label);
  // The complement rule asserts the opposite of the task's single rule.
  bool asserts_target = !e.label_negated;
  if (!fired) asserts_target = !asserts_target;
  const bool follows_rule = uniform01(rng) < p;
  const bool give_target = asserts_target == follows_rule;
  return give_target ? task.labels[target] : draw_other(task.labels, target, rng);
}

std::vector<Example> draw_examples(const Task& task, std::size_t count, const QuantifierLexicon& truth, Rng& rng) {
  std::vector<Example> out;
  out.reserve(count);
  const bool binary = task.labels.size() == 2;
  while (out.size() < count) {
    Attributes attrs;
    std::optional<std::size_t> fired;
    int attempts = 0;
    while (true) {
      attrs = draw_attributes(task.schema, rng);
      fired = firing_rule(task, attrs);
      if (binary || fired) break;
      if (++attempts > kMaxRejections) throw DataError("multiclass rules cover too little of the domain");
    }
    std::string label = sample_label(task, fired, truth, rng);
    out.push_back({std::move(attrs), std::move(label)});
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::size_t Domain::size() const noexcept {
  return kind == Kind::integer ? static_cast<std::size_t>(max - min + 1) : values.size();
}

Value Domain::at(std::size_t i) const {
  if (kind == Kind::integer) return static_cast<std::int64_t>(min + static_cast<std::int64_t>(i));
  return values.at(i);
}

bool Domain::contains(const Value& v) const {
  if (kind == Kind::integer) {
    const auto* i = std::get_if<std::int64_t>(&v);
    return i && *i >= min && *i <= max;
  }
  const auto* s = std::get_if<std::string>(&v);
  return s && std::find(values.begin(), values.end(), *s) != values.end();
}

const std::vector<Example>& Task::split(Split s) const {
  switch (s) {
    case Split::train: return train;
    case Split::validation: return validation;
    case Split::test: return test;
  }
  return train;
}

std::size_t Task::label_index(std::string_view label) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return i;
  throw DataError("label '" + std::string(label) + "' is not in task " + name);
}

bool same_task(const Task& a, const Task& b) {
  if (a.explanations.size() != b.explanations.size()) return false;
  for (std::size_t i = 0; i < a.explanations.size(); ++i)
    if (!a.explanations[i].same_structure(b.explanations[i])) return false;
  return a.name == b.name && a.schema == b.schema && a.labels == b.labels && a.train == b.train &&
         a.validation == b.validation && a.test == b.test && a.complexity == b.complexity &&
         a.generator_seed == b.generator_seed && a.truth == b.truth;
}

std::optional<std::size_t> firing_rule(const Task& task, const Attributes& attributes) {
  std::optional<std::size_t> fired;
  for (std::size_t i = 0; i < task.explanations.size(); ++i) {
    if (evaluate_condition(task.explanations[i].condition, attributes) == Truth::True) {
      if (fired) throw DataError("rules " + std::to_string(*fired) + " and " + std::to_string(i) + " overlap in " + task.name);
      fired = i;
    }
  }
  return fired;
}

double firing_fraction(const ConditionNode& condition, const std::vector<AttributeSpec>& schema) {
  const auto specs = specs_for(mentioned_attributes(condition), schema);
  std::size_t total = 0;
  std::size_t hits = 0;
  enumerate_assignments(specs, [&](const Attributes& a) {
    ++total;
    if (evaluate_condition(condition, a) == Truth::True) ++hits;
  });
  return static_cast<double>(hits) / static_cast<double>(total);
}

bool rules_mutually_exclusive(const Task& task) {
  std::vector<std::string> names;
  for (const auto& e : task.explanations)
    for (auto& n : mentioned_attributes(e.condition))
      if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(std::move(n));
  bool exclusive = true;
  enumerate_assignments(specs_for(names, task.schema), [&](const Attributes& a) {
    std::size_t firing = 0;
    for (const auto& e : task.explanations) firing += evaluate_condition(e.condition, a) == Truth::True;
    exclusive &= firing <= 1;
  });
  return exclusive;
}

Task generate_task(const ComplexityDescriptor& complexity, std::uint64_t seed, const ExampleCounts& counts,
                   const QuantifierLexicon& truth, const TaskOptions& options) {
  if (counts.train == 0 || counts.validation == 0 || counts.test == 0)
    throw DataError("every split needs at least one example");
  const bool binary = complexity.classes == ClassCount::binary;
  if (!binary && (options.multiclass_labels < 3 || options.multiclass_labels > 5))
    throw DataError("multiclass tasks use 3 to 5 labels");
  if (options.quantifier && !is_quantifier(*options.quantifier)) throw UnknownQuantifier(*options.quantifier);

  Rng rng(mix_seed(seed, 0x7a5c));
  WordPool words(rng);

  Task task;
  task.complexity = complexity;
  task.generator_seed = seed;
  char name[32];
  std::snprintf(name, sizeof name, "task_%016llx", static_cast<unsigned long long>(seed));
  task.name = name;

  const std::size_t n_attrs = static_cast<std::size_t>(uniform_int(rng, 4, 8));
  for (std::size_t i = 0; i < n_attrs; ++i) {
    AttributeSpec spec;
    spec.name = words.next();
    if (uniform_index(rng, 2) == 0) {
      spec.domain.kind = Domain::Kind::categorical;
      const int k = uniform_int(rng, 3, 5);
      for (int v = 0; v < k; ++v) spec.domain.values.push_back(words.next());
    }
    task.schema.push_back(std::move(spec));
  }
  // Multiclass pivots need a wide attribute; integer domains have 5 values.
  if (std::none_of(task.schema.begin(), task.schema.end(),
                   [](const AttributeSpec& s) { return s.domain.kind == Domain::Kind::integer; })) {
    auto& spec = task.schema[uniform_index(rng, task.schema.size())];
    spec.domain = Domain{};
  }

  const std::size_t n_labels = binary ? 2 : options.multiclass_labels;
  for (std::size_t i = 0; i < n_labels; ++i) task.labels.push_back(words.next());

  const bool clause = has_clause(complexity.negation);
  const bool label_neg = has_label(complexity.negation);
  std::vector<ConditionNode> conditions;
  std::vector<std::size_t> mentioned;
  if (binary) {
    ConditionNode best;
    double best_gap = 2.0;
    for (int attempt = 0; attempt < kMaxConditionDraws; ++attempt) {
      ConditionNode cond = binary_condition(task.schema, complexity.structure, clause, rng);
      const double f = firing_fraction(cond, task.schema);
      const double gap = std::abs(f - 0.5);
      if (gap < best_gap) {
        best_gap = gap;
        best = cond;
      }
      if (f >= kMinFiring && f <= kMaxFiring) break;
    }
    conditions.push_back(std::move(best));
    mentioned.push_back(uniform_index(rng, 2));
  } else {
    conditions = multiclass_conditions(task.schema, n_labels, complexity.structure, clause, rng);
    for (std::size_t i = 0; i < n_labels; ++i) mentioned.push_back(i);
  }

  for (std::size_t i = 0; i < conditions.size(); ++i) {
    Explanation e;
    e.condition = std::move(conditions[i]);
    e.label = task.labels[mentioned[i]];
    e.label_negated = label_neg;
    if (complexity.quantified) {
      if (i == 0 && options.quantifier) e.quantifier = *options.quantifier;
      else e.quantifier = std::string(kQuantifierWords[uniform_index(rng, kQuantifierCount)]);
      task.truth[*e.quantifier] = truth.probability(*e.quantifier);
    }
    e.source_text = render_explanation(e);
    task.explanations.push_back(std::move(e));
  }
  if (!binary && !rules_mutually_exclusive(task)) throw DataError("generated multiclass rules overlap");

  task.train = draw_examples(task, counts.train, truth, rng);
  task.validation = draw_examples(task, counts.validation, truth, rng);
  task.test = draw_examples(task, counts.test, truth, rng);
  return task;
}

TaskSuite generate_suite(std::size_t per_complexity, std::uint64_t seed, const ExampleCounts& counts,
                         const QuantifierLexicon& truth, const SuiteOptions& options) {
  if (per_complexity == 0) throw DataError("per_complexity must be at least 1");
  TaskSuite suite;
  suite.seed = seed;
  suite.per_complexity = per_complexity;
  suite.counts = counts;
  TaskOptions topt;
  topt.multiclass_labels = options.multiclass_labels;
  const std::size_t offset = static_cast<std::size_t>(mix_seed(seed, 0x0ff5e7) % kQuantifierCount);
  std::uint64_t ordinal = 0;
  for (std::size_t c = 0; c < options.complexities.size(); ++c) {
    for (std::size_t k = 0; k < per_complexity; ++k, ++ordinal) {
      topt.quantifier = std::string(kQuantifierWords[(offset + k) % kQuantifierCount]);
      suite.tasks.push_back(generate_task(options.complexities[c], mix_seed(seed, ordinal), counts, truth, topt));
    }
  }
  suite.seen.resize(suite.tasks.size());
  for (std::size_t i = 0; i < suite.seen.size(); ++i) suite.seen[i] = i;
  return suite;
}

TaskSuite split_seen_unseen(TaskSuite suite, double unseen_fraction, std::uint64_t seed) {
  if (!(unseen_fraction > 0.0 && unseen_fraction < 1.0)) throw DataError("unseen fraction must lie in (0, 1)");
  std::map<ComplexityDescriptor, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < suite.tasks.size(); ++i) strata[suite.tasks[i].complexity].push_back(i);
  Rng rng(mix_seed(seed, 0x5917));
  std::vector<bool> unseen(suite.tasks.size(), false);
  for (auto& [desc, members] : strata) {
    if (members.size() < 2)
      throw DataError("stratum " + to_string(desc) + " has fewer than 2 tasks; cannot split");
    auto take = static_cast<std::size_t>(std::ceil(unseen_fraction * static_cast<double>(members.size()) - 1e-9));
    take = std::clamp<std::size_t>(take, 1, members.size() - 1);
    shuffle(members, rng);
    for (std::size_t i = 0; i < take; ++i) unseen[members[i]] = true;
  }
  suite.seen.clear();
  suite.unseen.clear();
  for (std::size_t i = 0; i < suite.tasks.size(); ++i) (unseen[i] ? suite.unseen : suite.seen).push_back(i);
  suite.unseen_fraction = unseen_fraction;
  suite.split_seed = seed;
  return suite;
}

std::string fat_render(const Attributes& attributes) {
  std::string out;
  for (const auto& [name, value] : attributes.items()) {
    if (!out.empty()) out += ' ';
    out += name;
    out += " is ";
    out += render_value(value);
    out += '.';
  }
  return out;
}

}  // namespace quantlearn
