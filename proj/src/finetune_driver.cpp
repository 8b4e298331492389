#include "selfprompt/finetune_driver.hpp"

#include <cmath>
#include <numbers>

#include <json.hpp>

namespace selfprompt::train {

using json = nlohmann::ordered_json;

ModelFamily family_from_string(const std::string& s) {
    std::string v = text::to_lower(s);
    if (v == "mistral") return ModelFamily::mistral;
    if (v == "llama") return ModelFamily::llama;
    throw ValidationError("unknown model family '" + s + "' (expected mistral or llama)");
}

std::string to_string(ModelFamily f) {
    return f == ModelFamily::mistral ? "mistral" : "llama";
}

std::string to_string(LossMask m) {
    return m == LossMask::assistant_only ? "assistant_only" : "full_sequence";
}

std::string to_string(SegmentSource s) {
    switch (s) {
        case SegmentSource::system: return "system";
        case SegmentSource::user: return "user";
        case SegmentSource::assistant: return "assistant";
    }
    return "user";
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ValidationError("epochs must be positive");
    if (batch_size < 1) throw ValidationError("batch_size must be positive");
    if (max_tokens < 1) throw ValidationError("max_tokens must be positive");
    if (warmup_steps < 0) throw ValidationError("warmup_steps must be non-negative");
    if (peak_lr <= 0.0) throw ValidationError("peak_lr must be positive");
    if (!(0.0 <= dropout_bottom && dropout_bottom <= dropout_top && dropout_top < 1.0)) {
        throw ValidationError("dropout must satisfy 0 <= bottom <= top < 1");
    }
    if (seeds.empty()) throw ValidationError("at least one seed is required");
    if (num_layers < 2) throw ValidationError("num_layers must be at least 2");
}

TrainConfig default_config(ModelFamily family) {
    TrainConfig c;
    c.base_model = family == ModelFamily::mistral ? "mistralai/Mistral-7B-v0.1" : "meta-llama/Llama-2-7b-hf";
    c.epochs = family == ModelFamily::mistral ? 4 : 8;
    c.beta1 = 0.9;
    c.beta2 = 0.999;
    c.weight_decay = 0.1;
    c.peak_lr = 1e-5;
    c.schedule = Schedule::cosine_to_zero;
    c.warmup_steps = 0;
    c.batch_size = 64;
    c.max_tokens = 4096;
    c.dropout_bottom = 0.0;
    c.dropout_top = 0.25;
    c.seeds = {1, 2, 3, 4};
    c.num_layers = 32;
    return c;
}

TrainConfig default_config(const std::string& family) {
    return default_config(family_from_string(family));
}

double lr_at(const TrainConfig& config, long step, long total_steps) {
    if (total_steps < 1) throw ValidationError("total_steps must be >= 1");
    if (step < 0 || step > total_steps) {
        throw ValidationError("step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + "]");
    }
    const long warmup = std::min<long>(config.warmup_steps, total_steps);
    if (step < warmup) {
        return config.peak_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
    }
    if (step == total_steps) return 0.0;
    const double progress =
        static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
    return 0.5 * config.peak_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

double dropout_at(const TrainConfig& config, int layer_index, int num_layers) {
    if (num_layers < 2) throw ValidationError("num_layers must be at least 2");
    if (layer_index < 0 || layer_index >= num_layers) {
        throw ValidationError("layer " + std::to_string(layer_index) + " outside [0, " +
                              std::to_string(num_layers) + ")");
    }
    if (layer_index == num_layers - 1) return config.dropout_top;
    const double t = static_cast<double>(layer_index) / static_cast<double>(num_layers - 1);
    return config.dropout_bottom + t * (config.dropout_top - config.dropout_bottom);
}

std::string ChatFormattedExample::transcript() const {
    std::string out;
    for (const auto& s : segments) out += s.text;
    return out;
}

ChatFormattedExample format_chat(const corpus::DialogueExample& example, const std::string& system_prompt,
                                 const ChatMarkers& markers) {
    corpus::validate_example(example);
    ChatFormattedExample out;
    if (!system_prompt.empty()) {
        out.segments.push_back({markers.system + system_prompt + "\n", SegmentSource::system, false});
    }
    for (const auto& turn : example.turns) {
        if (turn.speaker == corpus::Speaker::user) {
            out.segments.push_back({markers.user + turn.content + "\n" + markers.assistant,
                                    SegmentSource::user, false});
        } else {
            out.segments.push_back({turn.content + markers.end, SegmentSource::assistant, true});
        }
    }
    return out;
}

ChatFormattedExample format_chat(const forge::RoleAugmentedExample& example, const std::string& system_prompt,
                                 const ChatMarkers& markers) {
    return format_chat(example.materialize(), system_prompt, markers);
}

std::string generation_prompt(const std::string& question, const std::string& system_prompt,
                              const ChatMarkers& markers) {
    std::string out;
    if (!system_prompt.empty()) out += markers.system + system_prompt + "\n";
    out += markers.user + question + "\n" + markers.assistant;
    return out;
}

TrainPlan emit_train_plan(const TrainConfig& config, const std::filesystem::path& dataset_path,
                          const std::filesystem::path& output_dir) {
    config.validate();
    corpus::LoadedDataset loaded = corpus::load_dataset(dataset_path);
    const std::string digest = sha256_file(dataset_path);

    TrainPlan plan;
    plan.warnings = loaded.warnings;
    if (config.seeds.size() != 4) {
        plan.warnings.push_back("protocol uses 4 seeds; this plan has " + std::to_string(config.seeds.size()));
    }

    const long n = static_cast<long>(loaded.dataset.examples.size());
    const long steps_per_epoch = std::max<long>(1, (n + config.batch_size - 1) / config.batch_size);
    const long total_steps = steps_per_epoch * config.epochs;
    plan.total_steps = total_steps;

    json lr_table = json::array();
    for (long s = 0; s < total_steps; ++s) lr_table.push_back(lr_at(config, s, total_steps));
    json dropout_table = json::array();
    for (int l = 0; l < config.num_layers; ++l) dropout_table.push_back(dropout_at(config, l, config.num_layers));

    json j;
    j["format"] = "selfprompt-train-plan/1";
    j["config"] = {
        {"base_model", config.base_model},
        {"epochs", config.epochs},
        {"optimizer", {{"name", "adamw"}, {"beta1", config.beta1}, {"beta2", config.beta2},
                       {"weight_decay", config.weight_decay}}},
        {"peak_lr", config.peak_lr},
        {"schedule", "cosine_to_zero"},
        {"warmup_steps", config.warmup_steps},
        {"batch_size", config.batch_size},
        {"max_tokens", config.max_tokens},
        {"dropout_bottom", config.dropout_bottom},
        {"dropout_top", config.dropout_top},
        {"num_layers", config.num_layers},
        {"seeds", config.seeds},
    };
    j["dataset"] = {
        {"path", dataset_path.generic_string()},
        {"sha256", digest},
        {"examples", n},
        {"single_turn", loaded.stats.single_turn},
        {"multi_turn", loaded.stats.multi_turn},
        {"template_id", loaded.dataset.template_id ? json(*loaded.dataset.template_id) : json(nullptr)},
    };
    ChatMarkers markers;
    j["chat_format"] = {
        {"system_prompt", config.system_prompt},
        {"markers", {{"system", markers.system}, {"user", markers.user},
                     {"assistant", markers.assistant}, {"end", markers.end}}},
    };
    j["masking"] = {
        {"policy", to_string(config.loss_mask)},
        {"role_prefix_in_loss", true},
    };
    j["trainer_requirements"] = {
        {"dropout_placement", "attention probabilities, per-layer rates from dropout_per_layer"},
        {"gradient_accumulation", "trainer-side: realize batch_size with any micro-batch split"},
        {"truncation", "trainer-side: sequences longer than max_tokens are truncated from the end"},
    };
    j["runs"] = json::array();
    for (std::uint64_t seed : config.seeds) {
        j["runs"].push_back({
            {"run_id", "seed-" + std::to_string(seed)},
            {"seed", seed},
            {"steps_per_epoch", steps_per_epoch},
            {"total_steps", total_steps},
            {"lr_per_step", lr_table},
            {"final_lr", lr_at(config, total_steps, total_steps)},
            {"dropout_per_layer", dropout_table},
        });
    }
    j["warnings"] = plan.warnings;

    plan.manifest = j.dump(2) + "\n";
    plan.runs = config.seeds.size();
    plan.path = output_dir / "train_plan.json";
    write_file(plan.path, plan.manifest);
    return plan;
}

}  // namespace selfprompt::train
