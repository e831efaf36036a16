#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "quantlearn/model.hpp"
#include "quantlearn/taskgen.hpp"
#include "quantlearn/training.hpp"

namespace quantlearn {

using Json = nlohmann::ordered_json;

std::uint64_t fnv1a(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t v);

std::string read_file(const std::filesystem::path& path);   // throws DataError
void write_file(const std::filesystem::path& path, std::string_view contents);
Json read_json(const std::filesystem::path& path);          // throws DataError
/// Two-space indented dump with a trailing newline.
std::string dump_json(const Json& j);

Json to_json(const Task& task);
Task task_from_json(const Json& j);

/// Directory layout: suite.json (manifest) plus one task_<index>.json per task.
void save_suite(const TaskSuite& suite, const std::filesystem::path& dir);
TaskSuite load_suite(const std::filesystem::path& dir);
/// Hash of the manifest bytes; checkpoints record it.
std::uint64_t suite_hash(const std::filesystem::path& dir);

Json to_json(const QuantifierLexicon& lexicon);
QuantifierLexicon lexicon_from_json(const Json& j);

Json to_json(const TrainConfig& config);
/// Missing fields keep their defaults; unknown fields are rejected.
TrainConfig config_from_json(const Json& j);
std::uint64_t config_hash(const TrainConfig& config);

struct Checkpoint {
  ModelState model;
  TrainConfig config;
  std::uint64_t config_hash = 0;
  std::uint64_t suite_hash = 0;
  std::string id;  // e.g. "stage0-epoch3"
};

Json to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const Json& j);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace quantlearn
