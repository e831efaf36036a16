#include "quantlearn/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "quantlearn/error.hpp"
#include "quantlearn/io.hpp"
#include "quantlearn/report.hpp"
#include "quantlearn/training.hpp"

namespace quantlearn {

namespace fs = std::filesystem;

namespace {

constexpr int kUsage = 1;
constexpr int kDataError = 2;

/// Usage problems detected after parsing (bad flag combinations).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename Fn>
void write_text(const fs::path& path, Fn&& body) {
  std::ostringstream ss;
  body(ss);
  write_file(path, ss.str());
}

QuantifierLexicon truth_lexicon(const std::string& spec) {
  if (spec.empty() || spec == "predefined") return QuantifierLexicon::predefined();
  const Json j = read_json(spec);
  if (j.contains("lexicon")) return lexicon_from_json(j.at("lexicon"));
  return lexicon_from_json(j);
}

TrainConfig load_config(const std::string& path) {
  if (path.empty()) return TrainConfig{};
  return config_from_json(read_json(path));
}

void check_suite_hash(const Checkpoint& ck, const fs::path& suite_dir) {
  const std::uint64_t actual = suite_hash(suite_dir);
  if (ck.suite_hash != actual)
    throw DataError("checkpoint was trained on suite " + hex64(ck.suite_hash) + " but " + suite_dir.string() +
                    " hashes to " + hex64(actual));
}

std::vector<ComplexityDescriptor> parse_complexity_list(const std::vector<std::string>& items) {
  if (items.empty() || (items.size() == 1 && items[0] == "all")) return all_complexities();
  std::vector<ComplexityDescriptor> out;
  for (const auto& item : items) out.push_back(parse_complexity(item));
  return out;
}

void write_history(const fs::path& dir, const TrainHistory& history) {
  write_text(dir / "history.csv", [&](std::ostream& o) {
    o << "stage,epoch,ce,rank,total,val_acc";
    for (auto w : kQuantifierWords) o << ",p_" << w;
    o << '\n';
    for (const auto& e : history.epochs) {
      o << e.stage << ',' << e.epoch << ',' << format_double(e.ce) << ',' << format_double(e.rank) << ','
        << format_double(e.total) << ',' << format_double(e.val_accuracy);
      for (double p : e.lexicon) o << ',' << format_double(p);
      o << '\n';
    }
  });
  write_text(dir / "stages.csv", [&](std::ostream& o) {
    o << "stage,filter,tasks,selected_epoch,checkpoint";
    const std::size_t n = history.stages.size();
    for (std::size_t t = 0; t < n; ++t) o << ",unseen_acc_stage" << t;
    o << '\n';
    for (std::size_t s = 0; s < n; ++s) {
      const auto& st = history.stages[s];
      o << s << ',' << (st.filter.empty() ? "all" : st.filter) << ',' << st.tasks.size() << ',' << st.selected_epoch
        << ',' << st.checkpoint_id;
      for (std::size_t t = 0; t < n; ++t)
        o << ',' << (t < st.unseen_accuracy.size() ? format_double(st.unseen_accuracy[t]) : std::string());
      o << '\n';
    }
  });
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quantifier-aware zero-shot classification from explanations", "quantlearn"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic task suite");
  std::size_t per_complexity = 2;
  std::uint64_t gen_seed = 42;
  std::string gen_out;
  std::vector<std::string> complexities{"all"};
  ExampleCounts counts;
  double unseen_fraction = 0.2;
  std::optional<std::uint64_t> split_seed;
  std::size_t multiclass_labels = 3;
  std::string gen_truth = "predefined";
  gen->add_option("--per-complexity", per_complexity, "Tasks per complexity descriptor")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "Generation seed");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--complexities", complexities,
                  "'all' or descriptors such as binary/none/simple/quantified (comma separated)")
      ->delimiter(',');
  gen->add_option("--train", counts.train, "Training examples per task");
  gen->add_option("--validation", counts.validation, "Validation examples per task");
  gen->add_option("--test", counts.test, "Test examples per task");
  gen->add_option("--unseen-fraction", unseen_fraction, "Fraction of each stratum held out as unseen tasks");
  gen->add_option("--split-seed", split_seed, "Seen/unseen split seed (default: --seed)");
  gen->add_option("--multiclass-labels", multiclass_labels, "Labels per multiclass task (3-5)");
  gen->add_option("--truth", gen_truth, "'predefined' or a lexicon/checkpoint JSON with generating strengths");

  // train
  auto* train = app.add_subcommand("train", "Train a model on a suite's seen tasks");
  std::string train_suite, train_config, train_mode = "standard", freeze_ckpt, train_out;
  train->add_option("--suite", train_suite, "Suite directory")->required();
  train->add_option("--config", train_config, "Run-config JSON (defaults when omitted)");
  train->add_option("--mode", train_mode, "standard or curriculum:<classes|negations|conjunctions>");
  train->add_option("--freeze-quantifiers", freeze_ckpt, "Checkpoint whose lexicon is loaded and frozen");
  train->add_option("--out", train_out, "Output directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Zero-shot accuracy on the unseen tasks");
  std::string eval_suite, eval_ckpt, eval_out, eval_by_complexity;
  bool eval_baselines = false;
  eval->add_option("--suite", eval_suite, "Suite directory")->required();
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint JSON")->required();
  eval->add_option("--out", eval_out, "Per-task CSV")->required();
  eval->add_option("--by-complexity", eval_by_complexity, "Per-complexity CSV");
  eval->add_flag("--baselines", eval_baselines, "Add exent and majority columns");

  // baseline
  auto* baseline = app.add_subcommand("baseline", "Evaluate a baseline on the unseen tasks");
  std::string base_suite, base_name, base_config, base_out, base_by_complexity;
  baseline->add_option("--suite", base_suite, "Suite directory")->required();
  baseline->add_option("--name", base_name, "exent or majority")->required();
  baseline->add_option("--config", base_config, "Run-config JSON supplying the scorer settings");
  baseline->add_option("--out", base_out, "Per-task CSV")->required();
  baseline->add_option("--by-complexity", base_by_complexity, "Per-complexity CSV");

  // report-attention
  auto* rattn = app.add_subcommand("report-attention", "Attention weights by explanation length and quantifier");
  std::string ra_suite, ra_ckpt, ra_out;
  rattn->add_option("--suite", ra_suite, "Suite directory")->required();
  rattn->add_option("--checkpoint", ra_ckpt, "Checkpoint JSON")->required();
  rattn->add_option("--out", ra_out, "Output CSV")->required();

  // report-quantifiers
  auto* rquant = app.add_subcommand("report-quantifiers", "Learned vs generating quantifier strengths");
  std::string rq_ckpt, rq_out, rq_truth = "predefined";
  rquant->add_option("--checkpoint", rq_ckpt, "Checkpoint JSON")->required();
  rquant->add_option("--truth", rq_truth, "'predefined' or a lexicon/checkpoint JSON");
  rquant->add_option("--out", rq_out, "Output CSV")->required();

  // check-gradients
  auto* grad = app.add_subcommand("check-gradients", "Finite-difference check of the analytic gradients");
  std::string cg_suite, cg_config;
  std::size_t cg_count = 16;
  std::uint64_t cg_seed = 42;
  double cg_tol = 1e-4;
  grad->add_option("--suite", cg_suite, "Suite directory supplying the batches")->required();
  grad->add_option("--config", cg_config, "Run-config JSON supplying the scorer settings");
  grad->add_option("--configs", cg_count, "Number of configurations")->check(CLI::PositiveNumber);
  grad->add_option("--seed", cg_seed, "Sweep seed");
  grad->add_option("--tolerance", cg_tol, "Maximum relative error");

  // quantifiers
  auto* quant = app.add_subcommand("quantifiers", "Lexicon utilities");
  auto* dump = quant->add_subcommand("dump", "Print a lexicon as CSV (quantifier,probability,raw,frozen)");
  quant->require_subcommand(1);
  std::string dump_ckpt;
  dump->add_option("--checkpoint", dump_ckpt, "Checkpoint JSON (default: the predefined lexicon)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "quantlearn: " << e.what() << "\n";
    err << "Run with --help for usage.\n";
    return kUsage;
  }

  try {
    if (gen->parsed()) {
      const auto truth = truth_lexicon(gen_truth);
      SuiteOptions options;
      options.complexities = parse_complexity_list(complexities);
      options.multiclass_labels = multiclass_labels;
      TaskSuite suite = generate_suite(per_complexity, gen_seed, counts, truth, options);
      suite = split_seen_unseen(std::move(suite), unseen_fraction, split_seed.value_or(gen_seed));
      save_suite(suite, gen_out);
      out << "wrote " << suite.tasks.size() << " tasks (" << suite.seen.size() << " seen, " << suite.unseen.size()
          << " unseen) to " << gen_out << "\n";
    } else if (train->parsed()) {
      const TaskSuite suite = load_suite(train_suite);
      const TrainConfig config = load_config(train_config);
      ModelState init = initial_model(config);
      const bool freeze = !freeze_ckpt.empty();
      std::optional<QuantifierLexicon> frozen_lexicon;
      if (freeze) {
        frozen_lexicon = load_checkpoint(freeze_ckpt).model.lexicon;
        init.lexicon = *frozen_lexicon;
        init.lexicon.set_frozen(true);
      }
      TrainResult result;
      if (train_mode == "standard") {
        result = train_multitask(suite, config, init);
        result.history.stages.front().filter = "all";
      } else if (train_mode.rfind("curriculum:", 0) == 0) {
        const Curriculum curriculum = build_curriculum(train_mode.substr(11));
        result = train_curriculum(suite, curriculum, config, freeze, frozen_lexicon, init);
      } else {
        throw UsageError("--mode must be 'standard' or 'curriculum:<name>', got '" + train_mode + "'");
      }
      Checkpoint ck;
      ck.model = result.model;
      ck.config = config;
      ck.config_hash = config_hash(config);
      ck.suite_hash = suite_hash(train_suite);
      fs::create_directories(train_out);
      for (std::size_t st = 0; st < result.stage_models.size(); ++st) {
        Checkpoint stage = ck;
        stage.model = result.stage_models[st];
        stage.id = result.history.stages[st].checkpoint_id;
        save_checkpoint(stage, fs::path(train_out) / ("checkpoint_stage" + std::to_string(st) + ".json"));
      }
      ck.id = result.history.stages.back().checkpoint_id;
      save_checkpoint(ck, fs::path(train_out) / "checkpoint.json");
      write_file(fs::path(train_out) / "config.json", dump_json(to_json(config)));
      write_history(train_out, result.history);
      out << "trained " << result.history.epochs.size() << " epochs; selected " << ck.id << "\n";
    } else if (eval->parsed()) {
      const Checkpoint ck = load_checkpoint(eval_ckpt);
      check_suite_hash(ck, eval_suite);
      const TaskSuite suite = load_suite(eval_suite);
      EvalReport report = evaluate_zero_shot(ck.model, suite, ck.config.scorer);
      if (eval_baselines) {
        const EvalReport exent = run_baseline("exent", suite, ck.config.scorer);
        const EvalReport majority = run_baseline("majority", suite, ck.config.scorer);
        attach_baselines(report, &exent, &majority);
      }
      write_text(eval_out, [&](std::ostream& o) { write_eval_csv(o, report); });
      if (!eval_by_complexity.empty())
        write_text(eval_by_complexity, [&](std::ostream& o) { write_complexity_csv(o, report); });
      out << "mean unseen accuracy " << format_double(report.mean_accuracy()) << " over " << report.tasks.size()
          << " tasks (" << report.ties << " ties)\n";
    } else if (baseline->parsed()) {
      const TaskSuite suite = load_suite(base_suite);
      const TrainConfig config = load_config(base_config);
      const EvalReport report = run_baseline(base_name, suite, config.scorer);
      write_text(base_out, [&](std::ostream& o) { write_eval_csv(o, report); });
      if (!base_by_complexity.empty())
        write_text(base_by_complexity, [&](std::ostream& o) { write_complexity_csv(o, report); });
      out << base_name << " mean unseen accuracy " << format_double(report.mean_accuracy()) << "\n";
    } else if (rattn->parsed()) {
      const Checkpoint ck = load_checkpoint(ra_ckpt);
      check_suite_hash(ck, ra_suite);
      const TaskSuite suite = load_suite(ra_suite);
      const AttentionReport report = attention_report(ck.model, suite, ck.config.scorer);
      write_text(ra_out, [&](std::ostream& o) { write_attention_csv(o, report); });
      out << "quantified mean weight " << format_double(report.quantified.mean) << " (n=" << report.quantified.count
          << "), unquantified " << format_double(report.unquantified.mean) << " (n=" << report.unquantified.count
          << ")\n";
    } else if (rquant->parsed()) {
      const Checkpoint ck = load_checkpoint(rq_ckpt);
      const RecoveryReport report = quantifier_recovery_report(ck.model.lexicon, truth_lexicon(rq_truth));
      write_text(rq_out, [&](std::ostream& o) { write_recovery_csv(o, report); });
      out << "spearman " << format_double(report.spearman) << ", relations satisfied "
          << format_double(report.relations_satisfied) << "\n";
    } else if (grad->parsed()) {
      const TaskSuite suite = load_suite(cg_suite);
      const TrainConfig config = load_config(cg_config);
      const auto cases = gradient_sweep(suite, cg_count, cg_seed, config.scorer, cg_tol);
      bool ok = true;
      for (const auto& c : cases) {
        out << (c.report.passed ? "PASS " : "FAIL ") << c.description << " params=" << c.report.parameters.size()
            << " max_rel_err=" << format_double(c.report.max_relative_error) << "\n";
        ok = ok && c.report.passed;
      }
      if (!ok) {
        err << "quantlearn: gradient check failed\n";
        return kDataError;
      }
    } else if (dump->parsed()) {
      const QuantifierLexicon lexicon =
          dump_ckpt.empty() ? QuantifierLexicon::predefined() : load_checkpoint(dump_ckpt).model.lexicon;
      out << "quantifier,probability,raw,frozen\n";
      for (std::size_t i = 0; i < kQuantifierCount; ++i)
        out << kQuantifierWords[i] << ',' << format_double(lexicon.probability(i)) << ','
            << format_double(lexicon.raw(i)) << ',' << (lexicon.frozen() ? "true" : "false") << "\n";
    }
  } catch (const UsageError& e) {
    err << "quantlearn: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "quantlearn: " << e.what() << "\n";
    return kDataError;
  } catch (const nlohmann::json::exception& e) {
    err << "quantlearn: " << e.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "quantlearn: " << e.what() << "\n";
    return kDataError;
  }
  return 0;
}

int cli_main(int argc, const char* const* argv) { return cli_main(argc, argv, std::cout, std::cerr); }

}  // namespace quantlearn
