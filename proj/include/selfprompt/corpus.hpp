#pragma once

// Instruction-tuning datasets: dialogue records, JSONL load/save and the
// validation rules every downstream stage relies on.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "selfprompt/text.hpp"

namespace selfprompt::corpus {

enum class Speaker { user, assistant };

std::string to_string(Speaker s);
Speaker speaker_from_string(const std::string& s);

struct Turn {
    Speaker speaker = Speaker::user;
    std::string content;

    bool operator==(const Turn&) const = default;
};

struct DialogueExample {
    std::string id;
    std::vector<Turn> turns;
    std::string source;

    bool operator==(const DialogueExample&) const = default;

    bool is_multi_turn() const { return turns.size() > 2; }
};

struct InstructionDataset {
    std::string name;
    std::vector<DialogueExample> examples;
    std::string system_prompt;
    /// Set on role-augmented datasets; absent on base corpora.
    std::optional<int> template_id;

    bool operator==(const InstructionDataset&) const = default;
};

struct DatasetStats {
    std::size_t single_turn = 0;
    std::size_t multi_turn = 0;
};

struct LoadedDataset {
    InstructionDataset dataset;
    DatasetStats stats;
    std::vector<std::string> warnings;
};

/// Raised for malformed JSONL records; `line()` is 1-based.
class LoadError : public IoError {
public:
    LoadError(std::size_t line, const std::string& what);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Throws ValidationError if the example breaks turn alternation, has an
/// empty turn, or lacks a user/assistant pair.
void validate_example(const DialogueExample& example);

/// Throws ValidationError on the first invalid example or a duplicate id.
void validate_dataset(const InstructionDataset& dataset);

DatasetStats compute_stats(const InstructionDataset& dataset);

/// Reads `path` (one record per line). Dataset-level fields come from the
/// `<path>.meta.json` sidecar when present.
LoadedDataset load_dataset(const std::filesystem::path& path);

/// Writes records to `path` and the dataset-level fields to the sidecar.
void save_dataset(const InstructionDataset& dataset, const std::filesystem::path& path);

std::filesystem::path metadata_path(const std::filesystem::path& dataset_path);

/// Trimmed content of the first user turn.
std::string first_question(const DialogueExample& example);

/// Index of the first assistant turn, if any.
std::optional<std::size_t> first_assistant_index(const DialogueExample& example);

std::string example_to_jsonl(const DialogueExample& example);

}  // namespace selfprompt::corpus
