#include "quantlearn/io.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "quantlearn/error.hpp"

namespace quantlearn {

namespace fs = std::filesystem;

std::uint64_t fnv1a(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

std::uint64_t parse_hex64(const std::string& s) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used, 16);
  } catch (const std::exception&) {
    throw DataError("bad hash '" + s + "'");
  }
  if (used != s.size()) throw DataError("bad hash '" + s + "'");
  return v;
}

template <typename T>
T get(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw DataError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("field '") + key + "': " + e.what());
  }
}

Json value_to_json(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::get<std::string>(v);
}

Value value_from_json(const Json& j) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw DataError("attribute values must be numbers or strings");
}

Json domain_to_json(const AttributeSpec& spec) {
  Json j;
  j["name"] = spec.name;
  if (spec.domain.kind == Domain::Kind::integer) {
    j["kind"] = "integer";
    j["min"] = spec.domain.min;
    j["max"] = spec.domain.max;
  } else {
    j["kind"] = "categorical";
    j["values"] = spec.domain.values;
  }
  return j;
}

AttributeSpec domain_from_json(const Json& j) {
  AttributeSpec spec;
  spec.name = get<std::string>(j, "name");
  const auto kind = get<std::string>(j, "kind");
  if (kind == "integer") {
    spec.domain.kind = Domain::Kind::integer;
    spec.domain.min = get<std::int64_t>(j, "min");
    spec.domain.max = get<std::int64_t>(j, "max");
    if (spec.domain.min > spec.domain.max) throw DataError("empty integer domain for " + spec.name);
  } else if (kind == "categorical") {
    spec.domain.kind = Domain::Kind::categorical;
    spec.domain.values = get<std::vector<std::string>>(j, "values");
    if (spec.domain.values.empty()) throw DataError("empty categorical domain for " + spec.name);
  } else {
    throw DataError("unknown domain kind '" + kind + "'");
  }
  return spec;
}

Json examples_to_json(const std::vector<Example>& examples) {
  Json out = Json::array();
  for (const auto& ex : examples) {
    Json values = Json::array();
    for (const auto& [name, value] : ex.attributes.items()) values.push_back(value_to_json(value));
    out.push_back(Json{{"values", values}, {"label", ex.label}});
  }
  return out;
}

std::vector<Example> examples_from_json(const Json& j, const Task& task) {
  if (!j.is_array()) throw DataError("example list must be an array");
  std::vector<Example> out;
  out.reserve(j.size());
  for (const auto& row : j) {
    const Json& values = row.at("values");
    if (!values.is_array() || values.size() != task.schema.size())
      throw DataError("task " + task.name + ": example width does not match the schema");
    Example ex;
    for (std::size_t a = 0; a < task.schema.size(); ++a) {
      Value v = value_from_json(values[a]);
      if (!task.schema[a].domain.contains(v))
        throw DataError("task " + task.name + ": value " + render_value(v) + " outside the domain of " +
                        task.schema[a].name);
      ex.attributes.set(task.schema[a].name, std::move(v));
    }
    ex.label = get<std::string>(row, "label");
    task.label_index(ex.label);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

Json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Tasks and suites

Json to_json(const Task& task) {
  Json j;
  j["name"] = task.name;
  j["generator_seed"] = task.generator_seed;
  j["complexity"] = to_string(task.complexity);
  j["labels"] = task.labels;
  Json schema = Json::array();
  for (const auto& s : task.schema) schema.push_back(domain_to_json(s));
  j["schema"] = schema;
  Json explanations = Json::array();
  for (const auto& e : task.explanations) explanations.push_back(render_explanation(e));
  j["explanations"] = explanations;
  Json truth = Json::object();
  for (const auto& [word, p] : task.truth) truth[word] = p;
  j["truth"] = truth;
  j["train"] = examples_to_json(task.train);
  j["validation"] = examples_to_json(task.validation);
  j["test"] = examples_to_json(task.test);
  return j;
}

Task task_from_json(const Json& j) {
  Task task;
  task.name = get<std::string>(j, "name");
  task.generator_seed = get<std::uint64_t>(j, "generator_seed");
  task.complexity = parse_complexity(get<std::string>(j, "complexity"));
  task.labels = get<std::vector<std::string>>(j, "labels");
  if (task.labels.size() < 2) throw DataError("task " + task.name + " needs at least two labels");
  const std::set<std::string> labels(task.labels.begin(), task.labels.end());
  if (labels.size() != task.labels.size()) throw DataError("task " + task.name + " repeats a label");
  for (const auto& s : j.at("schema")) task.schema.push_back(domain_from_json(s));
  for (const auto& text : get<std::vector<std::string>>(j, "explanations"))
    task.explanations.push_back(parse_explanation(text, labels));
  for (const auto& [word, p] : j.at("truth").items()) {
    if (!quantifier_index(word)) throw UnknownQuantifier(word);
    task.truth[word] = p.get<double>();
  }
  task.train = examples_from_json(j.at("train"), task);
  task.validation = examples_from_json(j.at("validation"), task);
  task.test = examples_from_json(j.at("test"), task);
  return task;
}

namespace {

std::string task_file(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "task_%04zu.json", index);
  return buf;
}

}  // namespace

void save_suite(const TaskSuite& suite, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<bool> unseen(suite.tasks.size(), false);
  for (std::size_t i : suite.unseen) unseen.at(i) = true;
  Json manifest;
  manifest["format"] = "quantlearn-suite/1";
  manifest["seed"] = suite.seed;
  manifest["per_complexity"] = suite.per_complexity;
  manifest["counts"] = {{"train", suite.counts.train}, {"validation", suite.counts.validation}, {"test", suite.counts.test}};
  manifest["unseen_fraction"] = suite.unseen_fraction;
  manifest["split_seed"] = suite.split_seed;
  Json tasks = Json::array();
  for (std::size_t i = 0; i < suite.tasks.size(); ++i) {
    const std::string file = task_file(i);
    const std::string body = dump_json(to_json(suite.tasks[i]));
    write_file(dir / file, body);
    tasks.push_back({{"index", i},
                     {"name", suite.tasks[i].name},
                     {"file", file},
                     {"complexity", to_string(suite.tasks[i].complexity)},
                     {"split", unseen[i] ? "unseen" : "seen"},
                     {"hash", hex64(fnv1a(body))}});
  }
  manifest["tasks"] = tasks;
  write_file(dir / "suite.json", dump_json(manifest));
}

TaskSuite load_suite(const fs::path& dir) {
  const Json manifest = read_json(dir / "suite.json");
  if (get<std::string>(manifest, "format") != "quantlearn-suite/1") throw DataError("unsupported suite format");
  TaskSuite suite;
  suite.seed = get<std::uint64_t>(manifest, "seed");
  suite.per_complexity = get<std::size_t>(manifest, "per_complexity");
  const Json& counts = manifest.at("counts");
  suite.counts = {get<std::size_t>(counts, "train"), get<std::size_t>(counts, "validation"),
                  get<std::size_t>(counts, "test")};
  suite.unseen_fraction = get<double>(manifest, "unseen_fraction");
  suite.split_seed = get<std::uint64_t>(manifest, "split_seed");
  const Json& tasks = manifest.at("tasks");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const Json& entry = tasks[i];
    if (get<std::size_t>(entry, "index") != i) throw DataError("suite manifest tasks out of order");
    const std::string body = read_file(dir / get<std::string>(entry, "file"));
    if (hex64(fnv1a(body)) != get<std::string>(entry, "hash"))
      throw DataError("task file " + get<std::string>(entry, "file") + " does not match the manifest hash");
    Json j;
    try {
      j = Json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(get<std::string>(entry, "file") + ": " + e.what());
    }
    suite.tasks.push_back(task_from_json(j));
    const auto split = get<std::string>(entry, "split");
    if (split == "seen") suite.seen.push_back(i);
    else if (split == "unseen") suite.unseen.push_back(i);
    else throw DataError("unknown split '" + split + "'");
  }
  return suite;
}

std::uint64_t suite_hash(const fs::path& dir) { return fnv1a(read_file(dir / "suite.json")); }

// ---------------------------------------------------------------------------
// Lexicon, config, checkpoints

Json to_json(const QuantifierLexicon& lexicon) {
  Json probabilities = Json::object();
  Json raws = Json::object();
  for (std::size_t i = 0; i < kQuantifierCount; ++i) {
    const std::string word(kQuantifierWords[i]);
    probabilities[word] = lexicon.probability(i);
    raws[word] = lexicon.raw(i);
  }
  return Json{{"probabilities", probabilities}, {"raws", raws}, {"frozen", lexicon.frozen()}};
}

QuantifierLexicon lexicon_from_json(const Json& j) {
  const Json& raws = j.at("raws");
  if (!raws.is_object() || raws.size() != kQuantifierCount) throw DataError("lexicon must list all 15 quantifiers");
  std::array<double, kQuantifierCount> values{};
  for (const auto& [word, raw] : raws.items()) {
    const auto idx = quantifier_index(word);
    if (!idx) throw UnknownQuantifier(word);
    if (!raw.is_number()) throw DataError("raw parameter of '" + word + "' is not a number");
    values[*idx] = raw.get<double>();
  }
  return QuantifierLexicon::from_raws(values, j.contains("frozen") ? get<bool>(j, "frozen") : false);
}

Json to_json(const TrainConfig& c) {
  Json j;
  j["epochs"] = c.epochs;
  j["batches_per_epoch"] = c.batches_per_epoch;
  j["batch_size"] = c.batch_size;
  j["grad_accumulation"] = c.grad_accumulation;
  j["lr_model"] = c.lr_model;
  j["lr_quant"] = c.lr_quant;
  j["adam"] = {{"beta1", c.adam.beta1},
               {"beta2", c.adam.beta2},
               {"epsilon", c.adam.epsilon},
               {"weight_decay", c.adam.weight_decay},
               {"shared_lexicon_scale", c.adam.shared_lexicon_scale}};
  j["seed"] = c.seed;
  j["lambda"] = c.rank_weight;
  j["init_mode"] = std::string(to_string(c.init_mode));
  j["aggregation"] = std::string(to_string(c.aggregation));
  j["attention_hidden"] = c.attention_hidden;
  j["complement_split"] = c.logits.complement_split;
  j["neutral_term"] = c.logits.neutral_term;
  j["scorer"] = {{"epsilon", c.scorer.epsilon}, {"noise_rate", c.scorer.noise_rate}, {"noise_seed", c.scorer.noise_seed}};
  return j;
}

namespace {

void reject_unknown(const Json& j, std::initializer_list<std::string_view> known, const std::string& where) {
  if (!j.is_object()) throw DataError(where + " must be an object");
  for (const auto& [key, value] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw DataError("unknown " + where + " field '" + key + "'");
}

template <typename T>
void maybe(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = get<T>(j, key);
}

}  // namespace

TrainConfig config_from_json(const Json& j) {
  reject_unknown(j,
                 {"epochs", "batches_per_epoch", "batch_size", "grad_accumulation", "lr_model", "lr_quant", "adam", "seed",
                  "lambda", "init_mode", "aggregation", "attention_hidden", "complement_split", "neutral_term", "scorer"},
                 "config");
  TrainConfig c;
  maybe(j, "epochs", c.epochs);
  maybe(j, "batches_per_epoch", c.batches_per_epoch);
  maybe(j, "batch_size", c.batch_size);
  maybe(j, "grad_accumulation", c.grad_accumulation);
  maybe(j, "lr_model", c.lr_model);
  maybe(j, "lr_quant", c.lr_quant);
  if (j.contains("adam")) {
    const Json& a = j.at("adam");
    reject_unknown(a, {"beta1", "beta2", "epsilon", "weight_decay", "shared_lexicon_scale"}, "adam");
    maybe(a, "beta1", c.adam.beta1);
    maybe(a, "beta2", c.adam.beta2);
    maybe(a, "epsilon", c.adam.epsilon);
    maybe(a, "weight_decay", c.adam.weight_decay);
    maybe(a, "shared_lexicon_scale", c.adam.shared_lexicon_scale);
  }
  maybe(j, "seed", c.seed);
  maybe(j, "lambda", c.rank_weight);
  if (j.contains("init_mode")) c.init_mode = parse_init_mode(get<std::string>(j, "init_mode"));
  if (j.contains("aggregation")) c.aggregation = parse_aggregation(get<std::string>(j, "aggregation"));
  maybe(j, "attention_hidden", c.attention_hidden);
  maybe(j, "complement_split", c.logits.complement_split);
  maybe(j, "neutral_term", c.logits.neutral_term);
  if (j.contains("scorer")) {
    const Json& s = j.at("scorer");
    reject_unknown(s, {"epsilon", "noise_rate", "noise_seed"}, "scorer");
    maybe(s, "epsilon", c.scorer.epsilon);
    maybe(s, "noise_rate", c.scorer.noise_rate);
    maybe(s, "noise_seed", c.scorer.noise_seed);
  }
  c.validate();
  return c;
}

std::uint64_t config_hash(const TrainConfig& config) { return fnv1a(to_json(config).dump()); }

Json to_json(const Checkpoint& ck) {
  const ModelState& m = ck.model;
  Json j;
  j["format"] = "quantlearn-checkpoint/1";
  j["id"] = ck.id;
  j["config_hash"] = hex64(ck.config_hash);
  j["suite_hash"] = hex64(ck.suite_hash);
  j["lexicon"] = to_json(m.lexicon);
  if (m.attention) {
    const AttentionNet& net = *m.attention;
    Json a;
    a["hidden"] = net.hidden();
    Json w1 = Json::array();
    for (std::size_t i = 0; i < kPairFeatureWidth; ++i) {
      Json row = Json::array();
      for (std::size_t k = 0; k < net.hidden(); ++k) row.push_back(net.w1(i, k));
      w1.push_back(row);
    }
    a["w1"] = w1;
    Json b1 = Json::array();
    Json w2 = Json::array();
    for (std::size_t k = 0; k < net.hidden(); ++k) {
      b1.push_back(net.b1(k));
      w2.push_back(net.w2(k));
    }
    a["b1"] = b1;
    a["w2"] = w2;
    a["b2"] = net.b2();
    j["attention"] = a;
  } else {
    j["attention"] = nullptr;
  }
  j["lambda"] = m.rank_weight;
  Json rel = Json::array();
  for (const auto& r : m.relations)
    rel.push_back({r.stronger, r.weaker, r.kind == OrdinalKind::equal ? "equal" : "greater"});
  j["relations"] = rel;
  j["mode"] = {{"aggregation", std::string(to_string(m.aggregation()))},
               {"unit_quantifiers", m.unit_quantifiers},
               {"complement_split", m.logits.complement_split},
               {"neutral_term", m.logits.neutral_term}};
  j["config"] = to_json(ck.config);
  return j;
}

Checkpoint checkpoint_from_json(const Json& j) {
  if (get<std::string>(j, "format") != "quantlearn-checkpoint/1") throw DataError("unsupported checkpoint format");
  Checkpoint ck;
  ck.id = get<std::string>(j, "id");
  ck.config_hash = parse_hex64(get<std::string>(j, "config_hash"));
  ck.suite_hash = parse_hex64(get<std::string>(j, "suite_hash"));
  ck.config = config_from_json(j.at("config"));
  ModelState& m = ck.model;
  m.lexicon = lexicon_from_json(j.at("lexicon"));
  const Json& a = j.at("attention");
  if (!a.is_null()) {
    const auto hidden = get<std::size_t>(a, "hidden");
    AttentionNet net(hidden);
    auto params = net.parameters();
    const auto w1 = get<std::vector<std::vector<double>>>(a, "w1");
    const auto b1 = get<std::vector<double>>(a, "b1");
    const auto w2 = get<std::vector<double>>(a, "w2");
    if (w1.size() != kPairFeatureWidth || b1.size() != hidden || w2.size() != hidden)
      throw DataError("attention matrices have the wrong shape");
    for (std::size_t i = 0; i < kPairFeatureWidth; ++i) {
      if (w1[i].size() != hidden) throw DataError("attention matrices have the wrong shape");
      for (std::size_t k = 0; k < hidden; ++k) params[i * hidden + k] = w1[i][k];
    }
    for (std::size_t k = 0; k < hidden; ++k) {
      params[kPairFeatureWidth * hidden + k] = b1[k];
      params[(kPairFeatureWidth + 1) * hidden + k] = w2[k];
    }
    params.back() = get<double>(a, "b2");
    m.attention = net;
  }
  m.rank_weight = get<double>(j, "lambda");
  for (const auto& r : j.at("relations")) {
    if (!r.is_array() || r.size() != 3) throw DataError("relation entries are [stronger, weaker, kind]");
    OrdinalRelation rel{r[0].get<std::string>(), r[1].get<std::string>(), OrdinalKind::strictly_greater};
    if (!quantifier_index(rel.stronger)) throw UnknownQuantifier(rel.stronger);
    if (!quantifier_index(rel.weaker)) throw UnknownQuantifier(rel.weaker);
    const auto kind = r[2].get<std::string>();
    if (kind == "equal") rel.kind = OrdinalKind::equal;
    else if (kind != "greater") throw DataError("unknown relation kind '" + kind + "'");
    m.relations.push_back(rel);
  }
  const Json& mode = j.at("mode");
  m.unit_quantifiers = get<bool>(mode, "unit_quantifiers");
  m.logits.complement_split = get<bool>(mode, "complement_split");
  m.logits.neutral_term = get<bool>(mode, "neutral_term");
  if (parse_aggregation(get<std::string>(mode, "aggregation")) != m.aggregation())
    throw DataError("checkpoint aggregation does not match its attention block");
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const fs::path& path) {
  write_file(path, dump_json(to_json(checkpoint)));
}

Checkpoint load_checkpoint(const fs::path& path) { return checkpoint_from_json(read_json(path)); }

}  // namespace quantlearn
