#include "quantlearn/explanation.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "quantlearn/error.hpp"
#include "quantlearn/quantifier.hpp"

namespace quantlearn {

// ---------------------------------------------------------------------------
// Values and attributes

std::string render_value(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&v)) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, *d);
    std::string s(buf, end);
    if (s.find_first_of(".e") == std::string::npos) s += ".0";
    return s;
  }
  return std::get<std::string>(v);
}

bool is_numeric(const Value& v) noexcept { return !std::holds_alternative<std::string>(v); }

void Attributes::set(std::string name, Value value) {
  for (auto& [k, v] : items_) {
    if (k == name) {
      v = std::move(value);
      return;
    }
  }
  items_.emplace_back(std::move(name), std::move(value));
}

const Value* Attributes::find(std::string_view name) const noexcept {
  for (const auto& [k, v] : items_)
    if (k == name) return &v;
  return nullptr;
}

bool is_ordering(CompareOp op) noexcept {
  return op != CompareOp::equal && op != CompareOp::not_equal;
}

// ---------------------------------------------------------------------------
// Tree construction

ConditionNode ConditionNode::leaf(Comparison c) {
  ConditionNode n;
  n.kind = Kind::leaf;
  n.comparison = std::move(c);
  return n;
}

ConditionNode ConditionNode::negate(ConditionNode child) {
  ConditionNode n;
  n.kind = Kind::negation;
  n.children.push_back(std::move(child));
  return n;
}

ConditionNode ConditionNode::all_of(std::vector<ConditionNode> children) {
  if (children.size() < 2) throw DataError("conjunction needs at least two children");
  ConditionNode n;
  n.kind = Kind::conjunction;
  n.children = std::move(children);
  return n;
}

ConditionNode ConditionNode::any_of(std::vector<ConditionNode> children) {
  if (children.size() < 2) throw DataError("disjunction needs at least two children");
  ConditionNode n;
  n.kind = Kind::disjunction;
  n.children = std::move(children);
  return n;
}

bool ConditionNode::operator==(const ConditionNode& other) const {
  if (kind != other.kind) return false;
  if (kind == Kind::leaf) return comparison == other.comparison;
  return children == other.children;
}

bool Explanation::same_structure(const Explanation& other) const {
  return condition == other.condition && quantifier == other.quantifier && label == other.label &&
         label_negated == other.label_negated;
}

std::string_view to_string(Truth t) noexcept {
  switch (t) {
    case Truth::True: return "true";
    case Truth::False: return "false";
    case Truth::Unknown: return "unknown";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Complexity descriptors

std::vector<ComplexityDescriptor> all_complexities() {
  std::vector<ComplexityDescriptor> out;
  for (auto c : {ClassCount::binary, ClassCount::multiclass})
    for (auto n : {NegationKind::none, NegationKind::clause, NegationKind::label, NegationKind::both})
      for (auto s : {Structure::simple, Structure::single_junction, Structure::nested})
        for (bool q : {false, true}) out.push_back({c, n, s, q});
  return out;
}

std::string_view to_string(ClassCount c) noexcept { return c == ClassCount::binary ? "binary" : "multiclass"; }

std::string_view to_string(NegationKind n) noexcept {
  switch (n) {
    case NegationKind::none: return "none";
    case NegationKind::clause: return "clause";
    case NegationKind::label: return "label";
    case NegationKind::both: return "both";
  }
  return "none";
}

std::string_view to_string(Structure s) noexcept {
  switch (s) {
    case Structure::simple: return "simple";
    case Structure::single_junction: return "single-junction";
    case Structure::nested: return "nested";
  }
  return "simple";
}

std::string to_string(const ComplexityDescriptor& d) {
  std::string out(to_string(d.classes));
  out += '/';
  out += to_string(d.negation);
  out += '/';
  out += to_string(d.structure);
  out += d.quantified ? "/quantified" : "/unquantified";
  return out;
}

ComplexityDescriptor parse_complexity(std::string_view text) {
  for (const auto& d : all_complexities())
    if (to_string(d) == text) return d;
  throw DataError("unknown complexity descriptor '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

struct Token {
  std::string text;
  std::size_t pos = 0;
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '(' || c == ')' || c == ',') {
      out.push_back({std::string(1, c), i});
      ++i;
    } else {
      const std::size_t start = i;
      while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])) && text[i] != '(' &&
             text[i] != ')' && text[i] != ',')
        ++i;
      out.push_back({std::string(text.substr(start, i - start)), start});
    }
  }
  return out;
}

constexpr std::string_view kReserved[] = {"If", "if", "then", "and", "or", "not", "equal", "to", "greater", "less", "than"};

bool is_identifier(std::string_view w) {
  if (w.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(w[0])) && w[0] != '_') return false;
  return std::all_of(w.begin(), w.end(), [](char ch) { return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_'; });
}

std::optional<Value> parse_value_token(std::string_view w) {
  if (w.empty()) return std::nullopt;
  const bool numeric_start = std::isdigit(static_cast<unsigned char>(w[0])) ||
                             (w[0] == '-' && w.size() > 1 && std::isdigit(static_cast<unsigned char>(w[1])));
  if (numeric_start) {
    if (w.find_first_of(".eE") == std::string_view::npos) {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
      if (ec == std::errc() && p == w.data() + w.size()) return Value{v};
      return std::nullopt;
    }
    double d = 0;
    auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), d);
    if (ec == std::errc() && p == w.data() + w.size() && std::isfinite(d)) return Value{d};
    return std::nullopt;
  }
  if (is_identifier(w) && !is_reserved_word(w)) return Value{std::string(w)};
  return std::nullopt;
}

class Parser {
 public:
  Parser(std::string_view text, const std::set<std::string>& labels)
      : text_(text), tokens_(tokenize(text)), labels_(labels) {}

  Explanation parse() {
    Explanation exp;
    expect_word("If");
    exp.condition = parse_cond();
    expect(",");
    expect_word("then");
    const std::size_t remaining = tokens_.size() - pos_;
    if (remaining == 0) fail("expected label");
    // A word before the (optional) "not" and label fills the quantifier slot.
    if (remaining >= 2 && peek() != "not") {
      const Token& q = tokens_[pos_];
      if (!is_quantifier(q.text)) throw ParseError("unknown quantifier '" + q.text + "'", q.pos);
      exp.quantifier = q.text;
      ++pos_;
    }
    if (peek() == "not" && tokens_.size() - pos_ >= 2) {
      exp.label_negated = true;
      ++pos_;
    }
    if (at_end()) fail("expected label");
    const Token& label = tokens_[pos_++];
    if (!at_end()) fail("unexpected trailing text");
    if (!labels_.contains(label.text)) throw ParseError("label '" + label.text + "' is not a task label", label.pos);
    exp.label = label.text;
    exp.source_text = std::string(text_);
    return exp;
  }

 private:
  bool at_end() const { return pos_ >= tokens_.size(); }
  std::string_view peek(std::size_t ahead = 0) const {
    return pos_ + ahead < tokens_.size() ? std::string_view(tokens_[pos_ + ahead].text) : std::string_view();
  }
  std::size_t offset() const { return at_end() ? text_.size() : tokens_[pos_].pos; }

  [[noreturn]] void fail(const std::string& msg) const {
    std::string found = at_end() ? "end of input" : "'" + tokens_[pos_].text + "'";
    throw ParseError(msg + ", found " + found, offset());
  }

  void expect(std::string_view tok) {
    if (peek() != tok) fail("expected '" + std::string(tok) + "'");
    ++pos_;
  }
  void expect_word(std::string_view tok) { expect(tok); }

  ConditionNode parse_cond() {
    std::vector<ConditionNode> terms;
    terms.push_back(parse_term());
    std::string_view junction;
    while (peek() == "and" || peek() == "or") {
      if (junction.empty()) {
        junction = peek() == "and" ? "and" : "or";
      } else if (peek() != junction) {
        fail("mixed 'and'/'or' at one level needs parentheses");
      }
      ++pos_;
      terms.push_back(parse_term());
    }
    if (terms.size() == 1) return std::move(terms.front());
    return junction == "and" ? ConditionNode::all_of(std::move(terms)) : ConditionNode::any_of(std::move(terms));
  }

  ConditionNode parse_term() {
    if (peek() == "not") {
      ++pos_;
      return ConditionNode::negate(parse_primary());
    }
    return parse_primary();
  }

  ConditionNode parse_primary() {
    if (peek() == "(") {
      ++pos_;
      ConditionNode inner = parse_cond();
      expect(")");
      return inner;
    }
    return parse_leaf();
  }

  ConditionNode parse_leaf() {
    if (at_end()) fail("expected attribute");
    const Token& attr = tokens_[pos_];
    if (!is_identifier(attr.text) || is_reserved_word(attr.text)) fail("expected attribute name");
    ++pos_;
    Comparison cmp;
    cmp.attribute = attr.text;
    if (peek() == "equal" && peek(1) == "to") {
      cmp.op = CompareOp::equal;
      pos_ += 2;
    } else if (peek() == "not" && peek(1) == "equal" && peek(2) == "to") {
      cmp.op = CompareOp::not_equal;
      pos_ += 3;
    } else if ((peek() == "greater" || peek() == "less") && peek(1) == "than") {
      const bool greater = peek() == "greater";
      pos_ += 2;
      if (peek() == "or" && peek(1) == "equal" && peek(2) == "to") {
        cmp.op = greater ? CompareOp::greater_equal : CompareOp::less_equal;
        pos_ += 3;
      } else {
        cmp.op = greater ? CompareOp::greater : CompareOp::less;
      }
    } else {
      fail("expected comparison operator");
    }
    if (at_end()) fail("expected value");
    const Token& val = tokens_[pos_];
    auto value = parse_value_token(val.text);
    if (!value) fail("expected value");
    if (is_ordering(cmp.op) && !is_numeric(*value)) fail("ordering comparison needs a numeric value");
    ++pos_;
    cmp.value = std::move(*value);
    return ConditionNode::leaf(std::move(cmp));
  }

  std::string_view text_;
  std::vector<Token> tokens_;
  const std::set<std::string>& labels_;
  std::size_t pos_ = 0;
};

std::string_view op_text(CompareOp op) {
  switch (op) {
    case CompareOp::equal: return "equal to";
    case CompareOp::not_equal: return "not equal to";
    case CompareOp::greater: return "greater than";
    case CompareOp::less: return "less than";
    case CompareOp::greater_equal: return "greater than or equal to";
    case CompareOp::less_equal: return "less than or equal to";
  }
  return "equal to";
}

void render_into(const ConditionNode& node, std::string& out);

void render_term(const ConditionNode& node, std::string& out) {
  // Minimal parentheses: only junctions nested under another node, and
  // negations directly under a negation.
  if (node.is_junction()) {
    out += '(';
    render_into(node, out);
    out += ')';
  } else {
    render_into(node, out);
  }
}

void render_into(const ConditionNode& node, std::string& out) {
  switch (node.kind) {
    case ConditionNode::Kind::leaf:
      out += node.comparison.attribute;
      out += ' ';
      out += op_text(node.comparison.op);
      out += ' ';
      out += render_value(node.comparison.value);
      break;
    case ConditionNode::Kind::negation: {
      out += "not ";
      const ConditionNode& child = node.children.front();
      if (child.kind == ConditionNode::Kind::negation) {
        out += '(';
        render_into(child, out);
        out += ')';
      } else {
        render_term(child, out);
      }
      break;
    }
    case ConditionNode::Kind::conjunction:
    case ConditionNode::Kind::disjunction: {
      const std::string_view sep = node.kind == ConditionNode::Kind::conjunction ? " and " : " or ";
      for (std::size_t i = 0; i < node.children.size(); ++i) {
        if (i) out += sep;
        render_term(node.children[i], out);
      }
      break;
    }
  }
}

bool values_equal(const Value& a, const Value& b) {
  if (is_numeric(a) && is_numeric(b)) {
    if (std::holds_alternative<std::int64_t>(a) && std::holds_alternative<std::int64_t>(b))
      return std::get<std::int64_t>(a) == std::get<std::int64_t>(b);
    const double x = std::holds_alternative<double>(a) ? std::get<double>(a) : static_cast<double>(std::get<std::int64_t>(a));
    const double y = std::holds_alternative<double>(b) ? std::get<double>(b) : static_cast<double>(std::get<std::int64_t>(b));
    return x == y;
  }
  if (!is_numeric(a) && !is_numeric(b)) return std::get<std::string>(a) == std::get<std::string>(b);
  return false;
}

double as_double(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}

Truth from_bool(bool b) { return b ? Truth::True : Truth::False; }

Truth evaluate_leaf(const Comparison& cmp, const Attributes& example) {
  const Value* actual = example.find(cmp.attribute);
  if (!actual) return Truth::Unknown;
  switch (cmp.op) {
    case CompareOp::equal: return from_bool(values_equal(*actual, cmp.value));
    case CompareOp::not_equal: return from_bool(!values_equal(*actual, cmp.value));
    default: break;
  }
  if (!is_numeric(*actual) || !is_numeric(cmp.value))
    throw TypeMismatch("ordering comparison on categorical value of '" + cmp.attribute + "'");
  if (std::holds_alternative<std::int64_t>(*actual) && std::holds_alternative<std::int64_t>(cmp.value)) {
    const auto x = std::get<std::int64_t>(*actual);
    const auto y = std::get<std::int64_t>(cmp.value);
    switch (cmp.op) {
      case CompareOp::greater: return from_bool(x > y);
      case CompareOp::less: return from_bool(x < y);
      case CompareOp::greater_equal: return from_bool(x >= y);
      case CompareOp::less_equal: return from_bool(x <= y);
      default: break;
    }
  }
  const double x = as_double(*actual);
  const double y = as_double(cmp.value);
  switch (cmp.op) {
    case CompareOp::greater: return from_bool(x > y);
    case CompareOp::less: return from_bool(x < y);
    case CompareOp::greater_equal: return from_bool(x >= y);
    case CompareOp::less_equal: return from_bool(x <= y);
    default: return Truth::Unknown;
  }
}

}  // namespace

bool is_reserved_word(std::string_view word) noexcept {
  return std::find(std::begin(kReserved), std::end(kReserved), word) != std::end(kReserved) || is_quantifier(word);
}

Explanation parse_explanation(std::string_view text, const std::set<std::string>& known_labels) {
  if (known_labels.empty()) throw DataError("parse_explanation needs at least one known label");
  return Parser(text, known_labels).parse();
}

std::string render_condition(const ConditionNode& node) {
  std::string out;
  render_into(node, out);
  return out;
}

std::string render_explanation(const Explanation& exp) {
  std::string out = "If ";
  render_into(exp.condition, out);
  out += ", then ";
  if (exp.quantifier) {
    out += *exp.quantifier;
    out += ' ';
  }
  if (exp.label_negated) out += "not ";
  out += exp.label;
  return out;
}

Truth evaluate_condition(const ConditionNode& node, const Attributes& example) {
  switch (node.kind) {
    case ConditionNode::Kind::leaf: return evaluate_leaf(node.comparison, example);
    case ConditionNode::Kind::negation: {
      const Truth t = evaluate_condition(node.children.front(), example);
      if (t == Truth::Unknown) return t;
      return t == Truth::True ? Truth::False : Truth::True;
    }
    case ConditionNode::Kind::conjunction: {
      bool unknown = false;
      for (const auto& c : node.children) {
        const Truth t = evaluate_condition(c, example);
        if (t == Truth::False) return Truth::False;
        unknown |= t == Truth::Unknown;
      }
      return unknown ? Truth::Unknown : Truth::True;
    }
    case ConditionNode::Kind::disjunction: {
      bool unknown = false;
      for (const auto& c : node.children) {
        const Truth t = evaluate_condition(c, example);
        if (t == Truth::True) return Truth::True;
        unknown |= t == Truth::Unknown;
      }
      return unknown ? Truth::Unknown : Truth::False;
    }
  }
  return Truth::Unknown;
}

// ---------------------------------------------------------------------------
// Tree metrics and features

std::size_t tree_depth(const ConditionNode& node) {
  std::size_t d = 0;
  for (const auto& c : node.children) d = std::max(d, tree_depth(c));
  return d + 1;
}

std::size_t leaf_count(const ConditionNode& node) {
  if (node.kind == ConditionNode::Kind::leaf) return 1;
  std::size_t n = 0;
  for (const auto& c : node.children) n += leaf_count(c);
  return n;
}

std::size_t junction_count(const ConditionNode& node) {
  std::size_t n = node.is_junction() ? 1 : 0;
  for (const auto& c : node.children) n += junction_count(c);
  return n;
}

bool has_clause_negation(const ConditionNode& node) {
  if (node.kind == ConditionNode::Kind::negation) return true;
  if (node.kind == ConditionNode::Kind::leaf) return node.comparison.op == CompareOp::not_equal;
  return std::any_of(node.children.begin(), node.children.end(), [](const auto& c) { return has_clause_negation(c); });
}

bool contains_kind(const ConditionNode& node, ConditionNode::Kind kind) {
  if (node.kind == kind) return true;
  return std::any_of(node.children.begin(), node.children.end(), [&](const auto& c) { return contains_kind(c, kind); });
}

std::vector<std::string> mentioned_attributes(const ConditionNode& node) {
  std::vector<std::string> out;
  auto visit = [&](auto&& self, const ConditionNode& n) -> void {
    if (n.kind == ConditionNode::Kind::leaf) {
      if (std::find(out.begin(), out.end(), n.comparison.attribute) == out.end()) out.push_back(n.comparison.attribute);
      return;
    }
    for (const auto& c : n.children) self(self, c);
  };
  visit(visit, node);
  return out;
}

std::size_t token_count(const Explanation& exp) {
  const std::string text = render_explanation(exp);
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c));
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

ExplanationFeatures explanation_features(const Explanation& exp) {
  ExplanationFeatures f{};
  f[0] = static_cast<double>(token_count(exp)) / 32.0;
  f[1] = static_cast<double>(tree_depth(exp.condition)) / 4.0;
  f[2] = has_clause_negation(exp.condition) ? 1.0 : 0.0;
  f[3] = exp.label_negated ? 1.0 : 0.0;
  f[4] = contains_kind(exp.condition, ConditionNode::Kind::conjunction) ? 1.0 : 0.0;
  f[5] = contains_kind(exp.condition, ConditionNode::Kind::disjunction) ? 1.0 : 0.0;
  if (exp.quantifier) {
    if (auto idx = quantifier_index(*exp.quantifier)) f[6 + *idx] = 1.0;
  }
  return f;
}

ComplexityDescriptor complexity_of(const Explanation& exp, std::size_t n_labels) {
  ComplexityDescriptor d;
  d.classes = n_labels == 2 ? ClassCount::binary : ClassCount::multiclass;
  const bool clause = has_clause_negation(exp.condition);
  if (clause && exp.label_negated) d.negation = NegationKind::both;
  else if (clause) d.negation = NegationKind::clause;
  else if (exp.label_negated) d.negation = NegationKind::label;
  else d.negation = NegationKind::none;
  const std::size_t junctions = junction_count(exp.condition);
  d.structure = junctions == 0 ? Structure::simple : junctions == 1 ? Structure::single_junction : Structure::nested;
  d.quantified = exp.quantifier.has_value();
  return d;
}

}  // namespace quantlearn
