#pragma once

// Synthetic stand-ins for the corpora the pipeline consumes: a small
// LIMA-shaped dialogue set, the eight benchmarks at their published sizes
// and an open-ended test set. Everything is a pure function of the seed.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "selfprompt/corpus.hpp"
#include "selfprompt/eval_harness.hpp"
#include "selfprompt/preference_judge.hpp"

namespace selfprompt::demo {

struct Domain {
    std::string name;
    std::vector<std::string> subcategories;
    std::vector<std::string> roles;
    std::vector<std::string> topics;
};

/// Ten domains with 35 subcategories between them.
const std::vector<Domain>& domains();

struct TopicHit {
    const Domain* domain = nullptr;
    std::string topic;
};

/// First domain topic mentioned in `question` (case-insensitive).
std::optional<TopicHit> find_topic(std::string_view question);

/// Positions of the three stand-in examples the stub annotator refuses.
const std::vector<std::size_t>& refusal_indices();
/// Substrings that make the stub annotator refuse.
const std::vector<std::string>& refusal_triggers();

std::string lima_id(std::size_t index);

/// `n` dialogues, about one in thirteen multi-turn, answers short enough
/// for the toy model's context.
corpus::InstructionDataset make_lima_standin(std::size_t n, std::uint64_t seed = 0);

/// Items for one benchmark. mmlu returns a 2,500-item pool over the ten
/// domains; the others have their published sizes.
std::vector<eval::EvalItem> make_benchmark(const std::string& name, std::uint64_t seed = 0);

std::vector<judge::TestQuestion> make_open_questions(std::size_t n = 300);

struct DemoPaths {
    std::filesystem::path lima;
    std::filesystem::path benchmarks;
    std::filesystem::path lima_test;
};

/// Writes lima.jsonl, benchmarks/<name>.jsonl and lima_test.jsonl under `dir`.
DemoPaths write_demo_data(const std::filesystem::path& dir, std::size_t lima_size, std::uint64_t seed = 0);

/// Stable 64-bit mix of a string and a salt.
std::uint64_t stable_hash(std::string_view s, std::uint64_t salt = 0);

/// stable_hash mapped to [0, 1).
double stable_unit(std::string_view s, std::uint64_t salt = 0);

}  // namespace selfprompt::demo
