#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "quantlearn/error.hpp"
#include "quantlearn/io.hpp"

using namespace quantlearn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("quantlearn_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("task JSON round trip") {
  for (const auto& d : all_complexities()) {
    const Task t = generate_task(d, 31, ExampleCounts{5, 2, 3}, QuantifierLexicon::predefined());
    CHECK(same_task(task_from_json(to_json(t)), t));
  }
}

TEST_CASE("suite directory round trip and hash guard") {
  const auto dir = scratch("suite");
  const auto s = split_seen_unseen(generate_suite(2, 4, ExampleCounts{5, 2, 3}, QuantifierLexicon::predefined()), 0.5, 8);
  save_suite(s, dir);
  const auto back = load_suite(dir);
  REQUIRE(back.tasks.size() == s.tasks.size());
  for (std::size_t i = 0; i < s.tasks.size(); ++i) CHECK(same_task(back.tasks[i], s.tasks[i]));
  CHECK(back.seen == s.seen);
  CHECK(back.unseen == s.unseen);
  CHECK(back.seed == 4);
  CHECK(back.split_seed == 8);
  CHECK(back.unseen_fraction == 0.5);

  const auto h = suite_hash(dir);
  const auto other = scratch("suite2");
  save_suite(s, other);
  CHECK(suite_hash(other) == h);
  CHECK(read_file(dir / "suite.json") == read_file(other / "suite.json"));

  // A tampered task file is detected.
  write_file(dir / "task_0000.json", read_file(dir / "task_0001.json"));
  CHECK_THROWS_AS(load_suite(dir), DataError);
  CHECK_THROWS_AS(load_suite(dir / "missing"), DataError);
}

TEST_CASE("lexicon and config JSON") {
  auto lex = QuantifierLexicon::random(5);
  lex.set_frozen(true);
  const auto back = lexicon_from_json(to_json(lex));
  CHECK(back == lex);

  TrainConfig c;
  c.epochs = 3;
  c.init_mode = InitMode::random;
  c.aggregation = Aggregation::mean;
  c.logits.complement_split = true;
  c.scorer = ScorerConfig{0.1, 0.2, 9};
  c.adam.shared_lexicon_scale = false;
  CHECK(config_from_json(to_json(c)) == c);
  CHECK(config_hash(c) == config_hash(config_from_json(to_json(c))));
  TrainConfig d = c;
  d.seed = 43;
  CHECK(config_hash(d) != config_hash(c));

  Json partial = Json::object();
  partial["epochs"] = 7;
  CHECK(config_from_json(partial).epochs == 7);
  CHECK(config_from_json(partial).lr_quant == TrainConfig{}.lr_quant);
  Json unknown = Json::object();
  unknown["learning_rate"] = 1;
  CHECK_THROWS_AS(config_from_json(unknown), DataError);
  Json invalid = Json::object();
  invalid["batch_size"] = 0;
  CHECK_THROWS_AS(config_from_json(invalid), DataError);
}

TEST_CASE("checkpoint round trip") {
  Checkpoint ck;
  ck.model.lexicon = QuantifierLexicon::random(3);
  ck.model.attention = AttentionNet::random(5, 3);
  ck.model.rank_weight = 10.0;
  ck.model.relations = reference_relations();
  ck.model.logits.neutral_term = false;
  ck.config.seed = 99;
  ck.config_hash = config_hash(ck.config);
  ck.suite_hash = 0xdeadbeefcafef00dULL;
  ck.id = "stage1-epoch4";
  const auto dir = scratch("ckpt");
  save_checkpoint(ck, dir / "c.json");
  const auto back = load_checkpoint(dir / "c.json");
  CHECK(back.model.lexicon == ck.model.lexicon);
  CHECK(back.model.attention == ck.model.attention);
  CHECK(back.model.relations == ck.model.relations);
  CHECK(back.model.rank_weight == 10.0);
  CHECK(back.model.logits == ck.model.logits);
  CHECK(back.config == ck.config);
  CHECK(back.suite_hash == ck.suite_hash);
  CHECK(back.id == ck.id);
  save_checkpoint(back, dir / "d.json");
  CHECK(read_file(dir / "c.json") == read_file(dir / "d.json"));

  Json broken = to_json(ck);
  broken["format"] = "something-else";
  CHECK_THROWS_AS(checkpoint_from_json(broken), DataError);
}

TEST_CASE("hash helpers") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(255) == "00000000000000ff");
  CHECK(dump_json(Json::object()).back() == '\n');
}
