#pragma once

// Fine-tunes the toy transformer on a chat-formatted instruction dataset
// with the production schedule shape (cosine-to-zero lr, per-layer dropout
// ramp, assistant-only loss), then checks what prefixes it generates.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "selfprompt/corpus.hpp"
#include "selfprompt/finetune_driver.hpp"
#include "selfprompt/template_forge.hpp"
#include "selfprompt/toy_model.hpp"

namespace selfprompt::toy {

struct ToyRunConfig {
    ModelSpec model;
    int steps = 500;
    int batch_size = 8;
    double peak_lr = 3e-3;
    double weight_decay = 0.0;
    double dropout_bottom = 0.0;
    double dropout_top = 0.25;
    std::uint64_t seed = 0;
    std::string system_prompt = "You are a helpful assistant.";
    int max_new_tokens = 200;
    train::ChatMarkers markers;

    void validate() const;
    /// The schedule fields as a TrainConfig, for lr_at and dropout_at.
    train::TrainConfig schedule() const;
};

/// Bytes plus one id per chat marker.
Tokenizer chat_tokenizer(const train::ChatMarkers& markers);

/// Tokens of the formatted example, each flagged in the loss exactly when
/// it came from an assistant segment. Truncated to `context`.
Sequence encode_chat(const train::ChatFormattedExample& example, const Tokenizer& tokenizer, int context);

struct Generation {
    std::string id;
    std::string prompt;
    std::string text;
};

struct ToyResult {
    std::size_t parameter_count = 0;
    std::size_t examples = 0;
    std::vector<double> loss_curve;  ///< mean per-token loss per step
    double initial_loss = 0.0;       ///< full-dataset loss before training
    double final_loss = 0.0;         ///< and after
    double seconds = 0.0;
    std::vector<Generation> generations;
    /// Generations whose leading text parses as `expected_template`.
    std::size_t prefix_matches = 0;
    double prefix_rate = 0.0;
    /// Generations that contain any template's junction phrase.
    std::size_t junction_hits = 0;
    double junction_rate = 0.0;
    int expected_template = 0;
};

/// Trains on every example of `dataset`, then greedily answers each
/// example's first question.
ToyResult run_toy_finetune(const corpus::InstructionDataset& dataset, const ToyRunConfig& config,
                           const std::vector<forge::PromptTemplate>& templates = forge::builtin_templates());

std::string toy_result_json(const ToyResult& result);

}  // namespace selfprompt::toy
