#include "quantlearn/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include "quantlearn/error.hpp"
#include "quantlearn/parallel.hpp"
#include "quantlearn/training.hpp"

namespace quantlearn {

std::optional<double> TaskAccuracy::delta_exent() const {
  if (!exent_accuracy) return std::nullopt;
  return accuracy - *exent_accuracy;
}

std::optional<double> TaskAccuracy::delta_majority() const {
  if (!majority_accuracy) return std::nullopt;
  return accuracy - *majority_accuracy;
}

double EvalReport::mean_accuracy() const {
  if (tasks.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : tasks) sum += t.accuracy;
  return sum / static_cast<double>(tasks.size());
}

namespace {

void summarize_complexities(EvalReport& report) {
  std::map<ComplexityDescriptor, std::vector<const TaskAccuracy*>> groups;
  for (const auto& t : report.tasks) groups[parse_complexity(t.complexity)].push_back(&t);
  report.per_complexity.clear();
  report.ties = 0;
  for (const auto& t : report.tasks) report.ties += t.ties;
  for (const auto& [descriptor, members] : groups) {
    ComplexityAccuracy row;
    row.complexity = to_string(descriptor);
    row.tasks = members.size();
    double acc = 0.0;
    double de = 0.0;
    double dm = 0.0;
    bool has_e = true;
    bool has_m = true;
    for (const auto* t : members) {
      acc += t->accuracy;
      if (auto d = t->delta_exent()) de += *d;
      else has_e = false;
      if (auto d = t->delta_majority()) dm += *d;
      else has_m = false;
    }
    const double n = static_cast<double>(members.size());
    row.mean_accuracy = acc / n;
    if (has_e) row.mean_delta_exent = de / n;
    if (has_m) row.mean_delta_majority = dm / n;
    report.per_complexity.push_back(row);
  }
}

EvalReport empty_report(std::string model, const TaskSuite& suite) {
  if (suite.unseen.empty()) throw DataError("suite has no unseen tasks");
  EvalReport r;
  r.model = std::move(model);
  r.suite_seed = suite.seed;
  r.split_seed = suite.split_seed;
  r.tasks.resize(suite.unseen.size());
  return r;
}

TaskAccuracy row_for(const TaskSuite& suite, std::size_t index) {
  const Task& task = suite.tasks.at(index);
  TaskAccuracy row;
  row.task = index;
  row.name = task.name;
  row.complexity = to_string(task.complexity);
  return row;
}

}  // namespace

EvalReport evaluate_zero_shot(const ModelState& model, const TaskSuite& suite, const ScorerConfig& scorer) {
  EvalReport report = empty_report("lasque", suite);
  static constexpr std::array<Split, 1> test_only{Split::test};
  parallel_for(suite.unseen.size(), [&](std::size_t k) {
    const std::size_t index = suite.unseen[k];
    const PreparedTask prepared = prepare_task(suite.tasks.at(index), scorer, test_only);
    const SplitAccuracy acc = split_accuracy(prepared, Split::test, model);
    TaskAccuracy row = row_for(suite, index);
    row.correct = acc.correct;
    row.total = acc.total;
    row.ties = acc.ties;
    row.accuracy = acc.accuracy();
    report.tasks[k] = row;
  });
  summarize_complexities(report);
  return report;
}

ModelState exent_model() {
  ModelState model;
  model.unit_quantifiers = true;
  return model;
}

EvalReport run_baseline(std::string_view name, const TaskSuite& suite, const ScorerConfig& scorer) {
  if (name == "exent") {
    EvalReport r = evaluate_zero_shot(exent_model(), suite, scorer);
    r.model = "exent";
    return r;
  }
  if (name != "majority") throw DataError("unknown baseline '" + std::string(name) + "' (expected exent or majority)");
  EvalReport report = empty_report("majority", suite);
  for (std::size_t k = 0; k < suite.unseen.size(); ++k) {
    const std::size_t index = suite.unseen[k];
    const Task& task = suite.tasks.at(index);
    std::vector<std::size_t> counts(task.labels.size(), 0);
    for (const auto& ex : task.train) ++counts[task.label_index(ex.label)];
    const std::size_t best = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    TaskAccuracy row = row_for(suite, index);
    row.ties = static_cast<std::size_t>(std::count(counts.begin(), counts.end(), counts[best]) > 1 ? 1 : 0);
    for (const auto& ex : task.test) row.correct += task.label_index(ex.label) == best ? 1 : 0;
    row.total = task.test.size();
    row.accuracy = row.total ? static_cast<double>(row.correct) / static_cast<double>(row.total) : 0.0;
    report.tasks[k] = row;
  }
  summarize_complexities(report);
  return report;
}

void attach_baselines(EvalReport& report, const EvalReport* exent, const EvalReport* majority) {
  auto lookup = [](const EvalReport* base, const TaskAccuracy& t) -> std::optional<double> {
    if (!base) return std::nullopt;
    for (const auto& b : base->tasks)
      if (b.task == t.task && b.name == t.name) return b.accuracy;
    throw DataError("baseline report is missing task " + t.name);
  };
  for (auto& t : report.tasks) {
    if (exent) t.exent_accuracy = lookup(exent, t);
    if (majority) t.majority_accuracy = lookup(majority, t);
  }
  summarize_complexities(report);
}

// ---------------------------------------------------------------------------
// CSV helpers

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

namespace {

std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    throw ParseError("not a number: '" + s + "'", 0);
  }
  if (used != s.size()) throw ParseError("not a number: '" + s + "'", used);
  return v;
}

std::size_t parse_size(const std::string& s) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    throw ParseError("not a count: '" + s + "'", 0);
  }
  if (used != s.size()) throw ParseError("not a count: '" + s + "'", used);
  return static_cast<std::size_t>(v);
}

std::optional<double> parse_optional(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

void check_field(const std::string& s) {
  if (s.find_first_of(",\n\r") != std::string::npos) throw DataError("CSV field contains a separator: " + s);
}

std::vector<std::vector<std::string>> read_rows(std::istream& in, std::string_view header) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty CSV", 0);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw ParseError("unexpected CSV header: " + line, 0);
  const std::size_t width = split_csv_line(header).size();
  std::vector<std::vector<std::string>> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() != width)
      throw ParseError("CSV line " + std::to_string(number) + " has " + std::to_string(fields.size()) + " fields", 0);
    rows.push_back(std::move(fields));
  }
  return rows;
}

constexpr std::string_view kEvalHeader =
    "model,suite_seed,split_seed,task,name,complexity,correct,total,ties,accuracy,exent_accuracy,majority_accuracy,"
    "delta_exent,delta_majority";

}  // namespace

void write_eval_csv(std::ostream& out, const EvalReport& report) {
  out << kEvalHeader << '\n';
  check_field(report.model);
  for (const auto& t : report.tasks) {
    check_field(t.name);
    check_field(t.complexity);
    out << report.model << ',' << report.suite_seed << ',' << report.split_seed << ',' << t.task << ',' << t.name << ','
        << t.complexity << ',' << t.correct << ',' << t.total << ',' << t.ties << ',' << format_double(t.accuracy) << ','
        << optional_field(t.exent_accuracy) << ',' << optional_field(t.majority_accuracy) << ','
        << optional_field(t.delta_exent()) << ',' << optional_field(t.delta_majority()) << '\n';
  }
}

void write_complexity_csv(std::ostream& out, const EvalReport& report) {
  out << "model,complexity,tasks,mean_accuracy,mean_delta_exent,mean_delta_majority\n";
  for (const auto& c : report.per_complexity)
    out << report.model << ',' << c.complexity << ',' << c.tasks << ',' << format_double(c.mean_accuracy) << ','
        << optional_field(c.mean_delta_exent) << ',' << optional_field(c.mean_delta_majority) << '\n';
}

EvalReport read_eval_csv(std::istream& in) {
  EvalReport report;
  for (const auto& f : read_rows(in, kEvalHeader)) {
    report.model = f[0];
    report.suite_seed = parse_size(f[1]);
    report.split_seed = parse_size(f[2]);
    TaskAccuracy t;
    t.task = parse_size(f[3]);
    t.name = f[4];
    t.complexity = f[5];
    t.correct = parse_size(f[6]);
    t.total = parse_size(f[7]);
    t.ties = parse_size(f[8]);
    t.accuracy = parse_double(f[9]);
    t.exent_accuracy = parse_optional(f[10]);
    t.majority_accuracy = parse_optional(f[11]);
    report.tasks.push_back(t);
  }
  summarize_complexities(report);
  return report;
}

// ---------------------------------------------------------------------------
// Attention

namespace {

void add_weight(WeightSummary& s, double w) {
  ++s.count;
  s.mean += (w - s.mean) / static_cast<double>(s.count);
}

}  // namespace

AttentionReport attention_report(const ModelState& model, const TaskSuite& suite, const ScorerConfig& scorer) {
  if (!model.attention) throw DataError("attention report needs a model with attention enabled");
  static constexpr std::array<Split, 1> test_only{Split::test};
  struct Record {
    std::size_t tokens;
    std::optional<std::size_t> quantifier;
    double weight;
  };
  std::vector<std::vector<Record>> per_task(suite.unseen.size());
  parallel_for(suite.unseen.size(), [&](std::size_t k) {
    const Task& task = suite.tasks.at(suite.unseen[k]);
    const PreparedTask prepared = prepare_task(task, scorer, test_only);
    std::vector<std::size_t> tokens;
    for (const auto& e : task.explanations) tokens.push_back(token_count(e));
    for (const auto& ex : prepared.split(Split::test)) {
      const ForwardPass fp = forward(prepared, ex, model);
      for (std::size_t j = 0; j < fp.weights.size(); ++j)
        per_task[k].push_back({tokens[j], prepared.quantifiers[j], fp.weights[j]});
    }
  });

  AttentionReport report;
  std::map<std::size_t, WeightSummary> buckets;
  for (const auto& records : per_task) {
    for (const auto& r : records) {
      add_weight(buckets[r.tokens / 4], r.weight);
      if (r.quantifier) {
        add_weight(report.quantified, r.weight);
        add_weight(report.per_quantifier[*r.quantifier], r.weight);
      } else {
        add_weight(report.unquantified, r.weight);
      }
    }
  }
  for (const auto& [bucket, summary] : buckets) report.buckets.push_back({bucket * 4, bucket * 4 + 3, summary});
  return report;
}

namespace {
constexpr std::string_view kAttentionHeader = "kind,key,min_tokens,max_tokens,count,mean_weight";
}

void write_attention_csv(std::ostream& out, const AttentionReport& report) {
  out << kAttentionHeader << '\n';
  for (const auto& b : report.buckets)
    out << "bucket," << b.min_tokens << '-' << b.max_tokens << ',' << b.min_tokens << ',' << b.max_tokens << ','
        << b.weight.count << ',' << format_double(b.weight.mean) << '\n';
  out << "quantified,quantified,,," << report.quantified.count << ',' << format_double(report.quantified.mean) << '\n';
  out << "unquantified,unquantified,,," << report.unquantified.count << ','
      << format_double(report.unquantified.mean) << '\n';
  for (std::size_t i = 0; i < kQuantifierCount; ++i)
    out << "quantifier," << kQuantifierWords[i] << ",,," << report.per_quantifier[i].count << ','
        << format_double(report.per_quantifier[i].mean) << '\n';
}

AttentionReport read_attention_csv(std::istream& in) {
  AttentionReport report;
  for (const auto& f : read_rows(in, kAttentionHeader)) {
    const WeightSummary w{parse_size(f[4]), parse_double(f[5])};
    if (f[0] == "bucket") {
      report.buckets.push_back({parse_size(f[2]), parse_size(f[3]), w});
    } else if (f[0] == "quantified") {
      report.quantified = w;
    } else if (f[0] == "unquantified") {
      report.unquantified = w;
    } else if (f[0] == "quantifier") {
      const auto idx = quantifier_index(f[1]);
      if (!idx) throw UnknownQuantifier(f[1]);
      report.per_quantifier[*idx] = w;
    } else {
      throw ParseError("unknown attention row kind '" + f[0] + "'", 0);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Quantifier recovery

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw DataError("spearman needs two equal-length vectors of length >= 2");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

RecoveryReport quantifier_recovery_report(const QuantifierLexicon& learned, const QuantifierLexicon& truth) {
  RecoveryReport report;
  const auto lp = learned.probabilities();
  const auto tp = truth.probabilities();
  for (std::size_t i = 0; i < kQuantifierCount; ++i)
    report.rows.push_back({std::string(kQuantifierWords[i]), lp[i], tp[i], std::abs(lp[i] - tp[i])});
  report.spearman = spearman(lp, tp);
  const auto relations = reference_relations();
  report.relations_satisfied = relations_satisfied(learned, relations, kEqualityTolerance);
  report.strict_relations_satisfied = relations_satisfied(learned, relations, kEqualityTolerance, true);
  return report;
}

namespace {
constexpr std::string_view kRecoveryHeader = "word,learned,truth,abs_error";
}

void write_recovery_csv(std::ostream& out, const RecoveryReport& report) {
  out << kRecoveryHeader << '\n';
  for (const auto& r : report.rows)
    out << r.word << ',' << format_double(r.learned) << ',' << format_double(r.truth) << ','
        << format_double(r.abs_error) << '\n';
  out << "#spearman," << format_double(report.spearman) << ",,\n";
  out << "#relations_satisfied," << format_double(report.relations_satisfied) << ",,\n";
  out << "#strict_relations_satisfied," << format_double(report.strict_relations_satisfied) << ",,\n";
}

RecoveryReport read_recovery_csv(std::istream& in) {
  RecoveryReport report;
  for (const auto& f : read_rows(in, kRecoveryHeader)) {
    if (f[0] == "#spearman") report.spearman = parse_double(f[1]);
    else if (f[0] == "#relations_satisfied") report.relations_satisfied = parse_double(f[1]);
    else if (f[0] == "#strict_relations_satisfied") report.strict_relations_satisfied = parse_double(f[1]);
    else report.rows.push_back({f[0], parse_double(f[1]), parse_double(f[2]), parse_double(f[3])});
  }
  return report;
}

}  // namespace quantlearn
