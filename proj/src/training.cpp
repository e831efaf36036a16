#include "quantlearn/training.hpp"

#include <cmath>
#include <numeric>

#include "quantlearn/error.hpp"
#include "quantlearn/parallel.hpp"
#include "quantlearn/random.hpp"

namespace quantlearn {

std::string_view to_string(InitMode mode) noexcept {
  switch (mode) {
    case InitMode::predefined: return "predefined";
    case InitMode::random: return "random";
    case InitMode::ordinal: return "ordinal";
  }
  return "?";
}

InitMode parse_init_mode(std::string_view text) {
  if (text == "predefined") return InitMode::predefined;
  if (text == "random") return InitMode::random;
  if (text == "ordinal") return InitMode::ordinal;
  throw DataError("unknown init mode '" + std::string(text) + "'");
}

std::string_view to_string(Aggregation a) noexcept { return a == Aggregation::mean ? "mean" : "attention"; }

Aggregation parse_aggregation(std::string_view text) {
  if (text == "mean") return Aggregation::mean;
  if (text == "attention") return Aggregation::attention;
  throw DataError("unknown aggregation '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1 || batches_per_epoch < 1 || batch_size < 1 || grad_accumulation < 1)
    throw DataError("epochs, batches_per_epoch, batch_size and grad_accumulation must be at least 1");
  if (!(lr_model >= 0.0) || !(lr_quant >= 0.0)) throw DataError("learning rates must be non-negative");
  if (!(rank_weight >= 0.0)) throw DataError("rank weight must be nonnegative");
  if (attention_hidden < 1) throw DataError("attention hidden width must be at least 1");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw DataError("Adam betas must lie in [0, 1)");
  if (!(adam.epsilon > 0.0) || !(adam.weight_decay >= 0.0)) throw DataError("invalid Adam epsilon or weight decay");
  scorer.validate();
}

ModelState initial_model(const TrainConfig& config) {
  ModelState model;
  switch (config.init_mode) {
    case InitMode::predefined:
      model.lexicon = QuantifierLexicon::predefined();
      break;
    case InitMode::random:
      model.lexicon = QuantifierLexicon::random(config.seed);
      break;
    case InitMode::ordinal:
      model.lexicon = QuantifierLexicon::random(config.seed);
      model.relations = reference_relations();
      break;
  }
  model.rank_weight = config.init_mode == InitMode::ordinal ? config.rank_weight : 0.0;
  if (config.aggregation == Aggregation::attention)
    model.attention = AttentionNet::random(config.attention_hidden, config.seed);
  model.logits = config.logits;
  return model;
}

// ---------------------------------------------------------------------------
// Optimizer

void optimizer_step(std::span<double> params, std::span<const double> grads, AdamMoments& moments, double lr,
                    double weight_decay, const AdamHyper& hyper, bool shared_scale) {
  if (params.size() != grads.size() || moments.first.size() != params.size() || moments.second.size() != params.size())
    throw DataError("optimizer shapes do not match");
  for (double g : grads)
    if (!std::isfinite(g)) throw DataError("non-finite gradient");
  if (params.empty()) return;
  ++moments.step;
  const double t = static_cast<double>(moments.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  if (shared_scale) {
    double mean_sq = 0.0;
    for (double g : grads) mean_sq += g * g;
    mean_sq /= static_cast<double>(grads.size());
    auto& v = moments.second[0];
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * mean_sq;
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = moments.first[i];
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * grads[i];
    double v = moments.second[0];
    if (!shared_scale) {
      auto& vi = moments.second[i];
      vi = hyper.beta2 * vi + (1.0 - hyper.beta2) * grads[i] * grads[i];
      v = vi;
    }
    params[i] -= lr * weight_decay * params[i];
    params[i] -= lr * (m / c1) / (std::sqrt(v / c2) + hyper.epsilon);
  }
}

OptimizerState make_optimizer(const ModelState& model) {
  OptimizerState s;
  if (model.attention) s.attention = AdamMoments(model.attention->parameter_count());
  return s;
}

void apply_gradients(ModelState& model, const Gradients& grads, OptimizerState& state, const TrainConfig& config) {
  if (!grads.all_finite()) throw DataError("non-finite gradient");
  if (!model.lexicon.frozen() && !model.unit_quantifiers)
    optimizer_step(model.lexicon.raws(), grads.lexicon, state.lexicon, config.lr_quant, 0.0, config.adam,
                   config.adam.shared_lexicon_scale);
  if (model.attention)
    optimizer_step(model.attention->parameters(), grads.attention, state.attention, config.lr_model,
                   config.adam.weight_decay, config.adam);
}

// ---------------------------------------------------------------------------
// Accuracy

SplitAccuracy split_accuracy(const PreparedTask& task, Split split, const ModelState& model) {
  SplitAccuracy acc;
  for (const auto& ex : task.split(split)) {
    const auto dist = predict(task, ex, model);
    bool tied = false;
    const std::size_t guess = argmax(dist, &tied);
    acc.correct += guess == ex.gold ? 1 : 0;
    acc.ties += tied ? 1 : 0;
    ++acc.total;
  }
  return acc;
}

double mean_test_accuracy(const TaskSuite& suite, std::span<const std::size_t> tasks, const ModelState& model,
                          const ScorerConfig& scorer) {
  if (tasks.empty()) return 0.0;
  std::vector<double> acc(tasks.size(), 0.0);
  parallel_for(tasks.size(), [&](std::size_t k) {
    const PreparedTask prepared = prepare_task(suite.tasks.at(tasks[k]), scorer);
    acc[k] = split_accuracy(prepared, Split::test, model).accuracy();
  });
  return std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

double mean_validation_accuracy(const std::vector<PreparedTask>& tasks, const ModelState& model) {
  std::vector<double> acc(tasks.size(), 0.0);
  parallel_for(tasks.size(), [&](std::size_t k) { acc[k] = split_accuracy(tasks[k], Split::validation, model).accuracy(); });
  return std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
}

/// Walks a task's training examples in reshuffled passes.
struct ExampleCursor {
  std::vector<std::size_t> order;
  std::size_t position = 0;

  std::size_t next(Rng& rng) {
    if (position == order.size()) {
      shuffle(order, rng);
      position = 0;
    }
    return order[position++];
  }
};

}  // namespace

TrainResult train_on_tasks(const TaskSuite& suite, std::span<const std::size_t> tasks, const TrainConfig& config,
                           const ModelState& model_init, std::size_t stage) {
  config.validate();
  if (tasks.empty()) throw DataError("no seen tasks to train on");

  std::vector<PreparedTask> prepared(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t k) { prepared[k] = prepare_task(suite.tasks.at(tasks[k]), config.scorer); });
  for (const auto& p : prepared)
    if (p.split(Split::train).empty() || p.split(Split::validation).empty())
      throw DataError("task " + p.task->name + " has an empty train or validation split");

  Rng rng(mix_seed(config.seed, 0x7ea1 + stage));
  std::vector<ExampleCursor> cursors(prepared.size());
  for (std::size_t k = 0; k < prepared.size(); ++k) {
    cursors[k].order.resize(prepared[k].split(Split::train).size());
    std::iota(cursors[k].order.begin(), cursors[k].order.end(), 0);
    cursors[k].position = cursors[k].order.size();
  }

  ModelState model = model_init;
  OptimizerState optimizer = make_optimizer(model);
  TrainResult result{model, {}, {}};
  double best_accuracy = -1.0;
  std::size_t cycle = 0;

  std::vector<LabeledPair> batch(config.batch_size);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord record;
    record.stage = stage;
    record.epoch = epoch;
    Gradients accumulated = zero_gradients(model);
    std::size_t pending = 0;
    auto flush = [&] {
      if (pending == 0) return;
      accumulated.scale(1.0 / static_cast<double>(pending));
      apply_gradients(model, accumulated, optimizer, config);
      accumulated = zero_gradients(model);
      pending = 0;
    };

    for (std::size_t b = 0; b < config.batches_per_epoch; ++b) {
      const std::size_t k = cycle++ % prepared.size();
      const auto& examples = prepared[k].split(Split::train);
      for (auto& item : batch) item = {&prepared[k], &examples[cursors[k].next(rng)]};
      const GradientResult g = gradients(model, batch);
      record.ce += g.loss.ce;
      record.rank += g.loss.rank;
      record.total += g.loss.total;
      accumulated += g.grad;
      if (++pending == config.grad_accumulation) flush();
    }
    flush();

    const double n = static_cast<double>(config.batches_per_epoch);
    record.ce /= n;
    record.rank /= n;
    record.total /= n;
    record.val_accuracy = mean_validation_accuracy(prepared, model);
    record.lexicon = model.lexicon.probabilities();
    result.history.epochs.push_back(record);

    if (record.val_accuracy > best_accuracy) {
      best_accuracy = record.val_accuracy;
      result.model = model;
      StageRecord s;
      s.tasks.assign(tasks.begin(), tasks.end());
      s.selected_epoch = epoch;
      s.checkpoint_id = "stage" + std::to_string(stage) + "-epoch" + std::to_string(epoch);
      result.history.stages.assign(1, s);
    }
  }
  result.stage_models.assign(1, result.model);
  return result;
}

TrainResult train_multitask(const TaskSuite& suite, const TrainConfig& config, const ModelState& model_init) {
  if (suite.seen.empty()) throw DataError("suite has no seen tasks");
  return train_on_tasks(suite, suite.seen, config, model_init);
}

// ---------------------------------------------------------------------------
// Curricula

bool StageFilter::matches(const ComplexityDescriptor& d) const {
  if (classes && d.classes != *classes) return false;
  if (structure && d.structure != *structure) return false;
  if (!negations.empty() && std::find(negations.begin(), negations.end(), d.negation) == negations.end()) return false;
  return true;
}

std::string StageFilter::describe() const {
  std::string out;
  auto add = [&](const std::string& part) { out += (out.empty() ? "" : ",") + part; };
  if (classes) add("classes=" + std::string(to_string(*classes)));
  if (!negations.empty()) {
    std::string n;
    for (auto k : negations) n += (n.empty() ? "" : "|") + std::string(to_string(k));
    add("negation=" + n);
  }
  if (structure) add("structure=" + std::string(to_string(*structure)));
  return out.empty() ? "any" : out;
}

Curriculum build_curriculum(std::string_view name) {
  Curriculum c;
  c.name = std::string(name);
  if (name == "classes") {
    c.stages = {StageFilter{ClassCount::binary, {}, std::nullopt}, StageFilter{ClassCount::multiclass, {}, std::nullopt}};
  } else if (name == "negations") {
    c.stages = {StageFilter{std::nullopt, {NegationKind::none}, std::nullopt},
                StageFilter{std::nullopt, {NegationKind::clause, NegationKind::label, NegationKind::both}, std::nullopt}};
  } else if (name == "conjunctions") {
    c.stages = {StageFilter{std::nullopt, {}, Structure::simple}, StageFilter{std::nullopt, {}, Structure::single_junction},
                StageFilter{std::nullopt, {}, Structure::nested}};
  } else {
    throw DataError("unknown curriculum '" + std::string(name) + "' (expected classes, negations or conjunctions)");
  }
  return c;
}

TrainResult train_curriculum(const TaskSuite& suite, const Curriculum& curriculum, const TrainConfig& config,
                             bool freeze_quantifiers, const std::optional<QuantifierLexicon>& pretrained_lexicon,
                             const std::optional<ModelState>& model_init) {
  if (curriculum.stages.empty()) throw DataError("curriculum has no stages");
  std::vector<std::vector<std::size_t>> seen(curriculum.stages.size());
  std::vector<std::vector<std::size_t>> unseen(curriculum.stages.size());
  for (std::size_t s = 0; s < curriculum.stages.size(); ++s) {
    const auto& filter = curriculum.stages[s];
    for (std::size_t i : suite.seen)
      if (filter.matches(suite.tasks.at(i).complexity)) seen[s].push_back(i);
    for (std::size_t i : suite.unseen)
      if (filter.matches(suite.tasks.at(i).complexity)) unseen[s].push_back(i);
    if (seen[s].empty()) throw DataError("curriculum stage '" + filter.describe() + "' matches no seen task");
  }

  ModelState model = model_init ? *model_init : initial_model(config);
  if (freeze_quantifiers) {
    if (pretrained_lexicon) model.lexicon = *pretrained_lexicon;
    model.lexicon.set_frozen(true);
  }

  TrainResult result{model, {}, {}};
  for (std::size_t s = 0; s < curriculum.stages.size(); ++s) {
    TrainResult stage = train_on_tasks(suite, seen[s], config, model, s);
    model = stage.model;
    StageRecord record = stage.history.stages.front();
    record.filter = curriculum.stages[s].describe();
    for (std::size_t t = 0; t < curriculum.stages.size(); ++t)
      record.unseen_accuracy.push_back(mean_test_accuracy(suite, unseen[t], model, config.scorer));
    result.history.epochs.insert(result.history.epochs.end(), stage.history.epochs.begin(), stage.history.epochs.end());
    result.history.stages.push_back(record);
    result.stage_models.push_back(model);
  }
  result.model = model;
  return result;
}

}  // namespace quantlearn

namespace quantlearn {

std::vector<GradientCase> gradient_sweep(const TaskSuite& suite, std::size_t count, std::uint64_t seed,
                                         const ScorerConfig& scorer, double tolerance) {
  if (suite.seen.empty()) throw DataError("gradient sweep needs seen tasks");
  std::vector<PreparedTask> prepared;
  prepared.reserve(suite.seen.size());
  static constexpr std::array<Split, 1> train_only{Split::train};
  for (std::size_t i : suite.seen) prepared.push_back(prepare_task(suite.tasks.at(i), scorer, train_only));

  std::vector<GradientCase> cases;
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint64_t case_seed = mix_seed(seed, k);
    Rng rng(case_seed);
    const bool attention = k % 2 == 1;
    const double lambda = (k / 2) % 2 == 1 ? 10.0 : 0.0;
    const bool frozen = (k / 4) % 2 == 1;

    ModelState model;
    model.lexicon = QuantifierLexicon::random(case_seed);
    model.lexicon.set_frozen(frozen);
    model.rank_weight = lambda;
    if (lambda > 0.0) model.relations = reference_relations();
    if (attention) model.attention = AttentionNet::random(16, case_seed, 0.5);

    std::vector<LabeledPair> batch;
    for (std::size_t b = 0; b < 4; ++b) {
      const auto& task = prepared[uniform_index(rng, prepared.size())];
      const auto& examples = task.split(Split::train);
      if (examples.empty()) continue;
      batch.push_back({&task, &examples[uniform_index(rng, examples.size())]});
    }
    if (batch.empty()) throw DataError("gradient sweep found no training examples");

    GradientCase c;
    c.description = std::string(attention ? "attention" : "mean") + " lambda=" + (lambda > 0 ? "10" : "0") +
                    (frozen ? " frozen" : " unfrozen") + " seed=" + std::to_string(case_seed);
    c.report = finite_difference_check(model, batch, 1e-5, tolerance);
    cases.push_back(std::move(c));
  }
  return cases;
}

}  // namespace quantlearn
