#include <cmath>
#include <numbers>

#include <json.hpp>

#include "selfprompt/finetune_driver.hpp"
#include "test_util.hpp"

using namespace selfprompt;
using namespace selfprompt::train;

namespace {

double cosine_oracle(double peak, long step, long total) {
    const double x = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total);
    return peak * (1.0 + std::cos(x)) / 2.0;
}

corpus::DialogueExample example(const std::string& id, std::size_t turns) {
    corpus::DialogueExample e;
    e.id = id;
    for (std::size_t i = 0; i < turns; ++i) {
        e.turns.push_back({i % 2 == 0 ? corpus::Speaker::user : corpus::Speaker::assistant,
                           "turn " + std::to_string(i) + " of " + id});
    }
    return e;
}

void write_dataset(const std::filesystem::path& p, std::size_t n) {
    corpus::InstructionDataset ds;
    ds.name = "plan";
    for (std::size_t i = 0; i < n; ++i) ds.examples.push_back(example("p" + std::to_string(i), i % 5 == 4 ? 4 : 2));
    corpus::save_dataset(ds, p);
}

}  // namespace

TEST(DefaultConfig, Families) {
    const auto m = default_config(ModelFamily::mistral);
    const auto l = default_config("llama");
    EXPECT_EQ(m.epochs, 4);
    EXPECT_EQ(l.epochs, 8);
    for (const auto& c : {m, l}) {
        EXPECT_EQ(c.batch_size, 64);
        EXPECT_EQ(c.max_tokens, 4096);
        EXPECT_DOUBLE_EQ(c.beta1, 0.9);
        EXPECT_DOUBLE_EQ(c.beta2, 0.999);
        EXPECT_DOUBLE_EQ(c.weight_decay, 0.1);
        EXPECT_DOUBLE_EQ(c.peak_lr, 1e-5);
        EXPECT_EQ(c.warmup_steps, 0);
        EXPECT_DOUBLE_EQ(c.dropout_bottom, 0.0);
        EXPECT_DOUBLE_EQ(c.dropout_top, 0.25);
        EXPECT_EQ(c.seeds.size(), 4u);
        EXPECT_NO_THROW(c.validate());
    }
    EXPECT_THROW(default_config("gpt"), ValidationError);
}

TEST(ConfigValidation, Rejects) {
    auto c = default_config(ModelFamily::mistral);
    c.dropout_bottom = 0.3;
    EXPECT_THROW(c.validate(), ValidationError);
    c = default_config(ModelFamily::mistral);
    c.dropout_top = 1.0;
    EXPECT_THROW(c.validate(), ValidationError);
    c = default_config(ModelFamily::mistral);
    c.seeds.clear();
    EXPECT_THROW(c.validate(), ValidationError);
    c = default_config(ModelFamily::mistral);
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), ValidationError);
}

TEST(LrSchedule, PinnedValues) {
    const auto c = default_config(ModelFamily::mistral);
    EXPECT_NEAR(lr_at(c, 0, 1000), 1e-5, 1e-12);
    EXPECT_NEAR(lr_at(c, 1000, 1000), 0.0, 1e-12);
    EXPECT_NEAR(lr_at(c, 500, 1000), 5e-6, 1e-12);
    EXPECT_DOUBLE_EQ(lr_at(c, 0, 1), 1e-5);
    EXPECT_DOUBLE_EQ(lr_at(c, 1, 1), 0.0);
    EXPECT_THROW(lr_at(c, -1, 10), ValidationError);
    EXPECT_THROW(lr_at(c, 11, 10), ValidationError);
    EXPECT_THROW(lr_at(c, 0, 0), ValidationError);
}

TEST(LrSchedule, MatchesClosedFormAndMonotone) {
    SeededRng rng(5);
    const auto c = default_config(ModelFamily::llama);
    for (int trial = 0; trial < 200; ++trial) {
        const long total = 1 + static_cast<long>(rng.below(5000));
        double prev = lr_at(c, 0, total);
        for (long s = 0; s <= total; s += 1 + static_cast<long>(rng.below(37))) {
            const double lr = lr_at(c, s, total);
            EXPECT_NEAR(lr, cosine_oracle(c.peak_lr, s, total), 1e-15);
            EXPECT_LE(lr, prev);
            EXPECT_GE(lr, 0.0);
            prev = lr;
        }
        EXPECT_LE(lr_at(c, total, total), prev);
    }
}

TEST(LrSchedule, WarmupRamp) {
    auto c = default_config(ModelFamily::mistral);
    c.warmup_steps = 10;
    EXPECT_NEAR(lr_at(c, 0, 100), 1e-6, 1e-18);
    EXPECT_NEAR(lr_at(c, 9, 100), 1e-5, 1e-18);
    EXPECT_NEAR(lr_at(c, 10, 100), 1e-5, 1e-18);
    EXPECT_EQ(lr_at(c, 100, 100), 0.0);
}

TEST(Dropout, EndpointsAndLinearity) {
    const auto c = default_config(ModelFamily::mistral);
    EXPECT_EQ(dropout_at(c, 0, 32), 0.0);
    EXPECT_EQ(dropout_at(c, 31, 32), 0.25);
    EXPECT_NEAR(dropout_at(c, 16, 33), 0.125, 1e-15);
    for (int l = 0; l < 32; ++l) {
        EXPECT_NEAR(dropout_at(c, l, 32), 0.25 * l / 31.0, 1e-12);
    }
    auto d = c;
    d.dropout_bottom = 0.1;
    d.dropout_top = 0.2;
    for (int l = 1; l + 1 < 12; ++l) {
        const double second = dropout_at(d, l + 1, 12) - 2 * dropout_at(d, l, 12) + dropout_at(d, l - 1, 12);
        EXPECT_NEAR(second, 0.0, 1e-12);
    }
    EXPECT_THROW(dropout_at(c, 32, 32), ValidationError);
    EXPECT_THROW(dropout_at(c, -1, 32), ValidationError);
    EXPECT_THROW(dropout_at(c, 0, 1), ValidationError);
}

TEST(FormatChat, TwoTurnStructure) {
    const auto f = format_chat(example("a", 2), "sys");
    ASSERT_EQ(f.segments.size(), 3u);
    EXPECT_EQ(f.segments[0].source, SegmentSource::system);
    EXPECT_EQ(f.segments[1].source, SegmentSource::user);
    EXPECT_EQ(f.segments[2].source, SegmentSource::assistant);
    EXPECT_FALSE(f.segments[0].in_loss);
    EXPECT_FALSE(f.segments[1].in_loss);
    EXPECT_TRUE(f.segments[2].in_loss);
    EXPECT_EQ(format_chat(example("a", 2), "").segments.size(), 2u);
}

TEST(FormatChat, RolePrefixInLoss) {
    forge::RoleAugmentedExample r;
    r.base = example("a", 4);
    r.prefix = "A test question. From now on, I will think like a tester.";
    r.template_id = 8;
    const auto f = format_chat(r, kDefaultSystemPrompt);
    bool found = false;
    for (const auto& s : f.segments) {
        if (s.text.find(r.prefix) != std::string::npos) {
            found = true;
            EXPECT_TRUE(s.in_loss);
            EXPECT_EQ(s.source, SegmentSource::assistant);
        }
    }
    EXPECT_TRUE(found);
}

TEST(FormatChat, MaskAndTranscriptProperty) {
    SeededRng rng(77);
    const ChatMarkers mk;
    for (int trial = 0; trial < 50; ++trial) {
        corpus::DialogueExample e;
        e.id = "r" + std::to_string(trial);
        const std::size_t turns = 2 * (1 + rng.below(4));
        std::string assistant_text;
        std::string transcript = "<|system|>\nS\n";
        for (std::size_t i = 0; i < turns; ++i) {
            std::string content;
            const auto len = 1 + rng.below(40);
            for (std::uint64_t k = 0; k < len; ++k) content.push_back(static_cast<char>(' ' + rng.below(95)));
            if (content.find_first_not_of(' ') == std::string::npos) content = "x";
            const bool user = i % 2 == 0;
            e.turns.push_back({user ? corpus::Speaker::user : corpus::Speaker::assistant, content});
            if (user) {
                transcript += mk.user + content + "\n" + mk.assistant;
            } else {
                assistant_text += content + mk.end;
                transcript += content + mk.end;
            }
        }
        const auto f = format_chat(e, "S", mk);
        EXPECT_EQ(f.transcript(), transcript);
        std::string in_loss;
        for (const auto& s : f.segments) {
            EXPECT_EQ(s.in_loss, s.source == SegmentSource::assistant);
            if (s.in_loss) in_loss += s.text;
        }
        EXPECT_EQ(in_loss, assistant_text);
    }
}

TEST(GenerationPrompt, EndsWithAssistantHeader) {
    const ChatMarkers mk;
    const auto p = generation_prompt("Q?", "S", mk);
    EXPECT_EQ(p, mk.system + "S\n" + mk.user + "Q?\n" + mk.assistant);
    EXPECT_EQ(generation_prompt("Q?", "", mk), mk.user + "Q?\n" + mk.assistant);
}

TEST(TrainPlan, DefaultFourRunsDeterministic) {
    testutil::TempDir dir;
    write_dataset(dir / "d.jsonl", 130);
    const auto cfg = default_config(ModelFamily::mistral);
    const auto a = emit_train_plan(cfg, dir / "d.jsonl", dir / "a");
    const auto b = emit_train_plan(cfg, dir / "d.jsonl", dir / "b");
    EXPECT_EQ(a.runs, 4u);
    EXPECT_EQ(a.manifest, b.manifest);
    EXPECT_EQ(read_file(a.path), read_file(b.path));
    EXPECT_TRUE(a.warnings.empty());
    EXPECT_EQ(a.total_steps, 3 * 4);

    const auto j = nlohmann::json::parse(a.manifest);
    ASSERT_EQ(j["runs"].size(), 4u);
    EXPECT_EQ(j["dataset"]["sha256"], sha256_file(dir / "d.jsonl"));
    EXPECT_EQ(j["masking"]["policy"], "assistant_only");
    const auto& run = j["runs"][0];
    ASSERT_EQ(run["lr_per_step"].size(), 12u);
    EXPECT_DOUBLE_EQ(run["lr_per_step"][0].get<double>(), 1e-5);
    EXPECT_DOUBLE_EQ(run["final_lr"].get<double>(), 0.0);
    ASSERT_EQ(run["dropout_per_layer"].size(), 32u);
    EXPECT_DOUBLE_EQ(run["dropout_per_layer"][31].get<double>(), 0.25);
}

TEST(TrainPlan, TwoSeedsWarns) {
    testutil::TempDir dir;
    write_dataset(dir / "d.jsonl", 10);
    auto cfg = default_config(ModelFamily::llama);
    cfg.seeds = {7, 8};
    const auto p = emit_train_plan(cfg, dir / "d.jsonl", dir / "o");
    EXPECT_EQ(p.runs, 2u);
    ASSERT_FALSE(p.warnings.empty());
    EXPECT_NE(p.warnings.back().find("4"), std::string::npos);
}

TEST(TrainPlan, UnreadableDataset) {
    testutil::TempDir dir;
    EXPECT_THROW(emit_train_plan(default_config(ModelFamily::mistral), dir / "missing.jsonl", dir / "o"), Error);
}
