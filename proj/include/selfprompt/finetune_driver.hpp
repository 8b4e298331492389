#pragma once

// Fine-tuning recipe: defaults per model family, learning-rate and
// layer-wise dropout schedules, chat formatting with loss masks, and the
// JSON train plan handed to external trainers.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "selfprompt/corpus.hpp"
#include "selfprompt/template_forge.hpp"

namespace selfprompt::train {

enum class ModelFamily { mistral, llama };
enum class Schedule { cosine_to_zero };
enum class LossMask { assistant_only, full_sequence };

ModelFamily family_from_string(const std::string& s);
std::string to_string(ModelFamily f);
std::string to_string(LossMask m);

inline constexpr const char* kDefaultSystemPrompt =
    "A chat between a curious user and an artificial intelligence assistant. The assistant gives "
    "helpful, detailed, and polite answers to the user's questions.";

struct TrainConfig {
    std::string base_model;
    int epochs = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.1;
    double peak_lr = 1e-5;
    Schedule schedule = Schedule::cosine_to_zero;
    int warmup_steps = 0;
    int batch_size = 64;
    int max_tokens = 4096;
    double dropout_bottom = 0.0;
    double dropout_top = 0.25;
    std::vector<std::uint64_t> seeds;
    /// Transformer depth, used to resolve the per-layer dropout table.
    int num_layers = 32;
    LossMask loss_mask = LossMask::assistant_only;
    std::string system_prompt = kDefaultSystemPrompt;

    void validate() const;
};

TrainConfig default_config(ModelFamily family);
TrainConfig default_config(const std::string& family);

/// Cosine decay from peak_lr to 0 over total_steps, with an optional linear
/// warmup. Requires 0 <= step <= total_steps and total_steps >= 1.
double lr_at(const TrainConfig& config, long step, long total_steps);

/// Linear ramp from dropout_bottom (layer 0) to dropout_top (last layer).
double dropout_at(const TrainConfig& config, int layer_index, int num_layers);

enum class SegmentSource { system, user, assistant };

std::string to_string(SegmentSource s);

struct Segment {
    std::string text;
    SegmentSource source = SegmentSource::user;
    bool in_loss = false;

    bool operator==(const Segment&) const = default;
};

/// Turn markers. The assistant header closes each user segment so the
/// assistant segment is exactly what the model must produce.
struct ChatMarkers {
    std::string system = "<|system|>\n";
    std::string user = "<|user|>\n";
    std::string assistant = "<|assistant|>\n";
    std::string end = "<|end|>\n";
};

struct ChatFormattedExample {
    std::vector<Segment> segments;

    std::string transcript() const;
};

/// System segment (omitted when the prompt is empty), then one segment per
/// turn. Only assistant segments are in the loss, role-play prefix included.
ChatFormattedExample format_chat(const corpus::DialogueExample& example, const std::string& system_prompt,
                                 const ChatMarkers& markers = {});
ChatFormattedExample format_chat(const forge::RoleAugmentedExample& example, const std::string& system_prompt,
                                 const ChatMarkers& markers = {});

/// Prompt text for generation: system + user segments up to the first
/// assistant header.
std::string generation_prompt(const std::string& question, const std::string& system_prompt,
                              const ChatMarkers& markers = {});

struct TrainPlan {
    std::string manifest;  ///< JSON text, byte-stable for equal inputs
    std::filesystem::path path;
    std::size_t runs = 0;
    long total_steps = 0;
    std::vector<std::string> warnings;
};

/// Writes `<output_dir>/train_plan.json`: config echo, one run per seed with
/// resolved lr and dropout tables, the dataset SHA-256 and the masking policy.
TrainPlan emit_train_plan(const TrainConfig& config, const std::filesystem::path& dataset_path,
                          const std::filesystem::path& output_dir);

}  // namespace selfprompt::train
