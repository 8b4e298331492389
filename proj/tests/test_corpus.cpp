#include "selfprompt/corpus.hpp"
#include "test_util.hpp"

using namespace selfprompt;
using namespace selfprompt::corpus;

namespace {

DialogueExample single(const std::string& id, const std::string& q, const std::string& a) {
    return {id, {{Speaker::user, q}, {Speaker::assistant, a}}, "test"};
}

std::string random_text(SeededRng& rng) {
    static const std::vector<std::string> pieces = {"why", " ", "\"quoted\"", "\n", "é", "日本", "\\", "tab\t",
                                                    "sky", "blue?", "{json}", "😀"};
    std::string s = "x";
    const auto n = 1 + rng.below(12);
    for (std::uint64_t i = 0; i < n; ++i) s += pieces[rng.below(pieces.size())];
    return s;
}

}  // namespace

TEST(Corpus, LimaShapedCounts) {
    InstructionDataset ds{"lima", {}, "sys", std::nullopt};
    for (int i = 0; i < 1000; ++i) ds.examples.push_back(single("s" + std::to_string(i), "q", "a"));
    for (int i = 0; i < 30; ++i) {
        ds.examples.push_back({"m" + std::to_string(i),
                               {{Speaker::user, "q"}, {Speaker::assistant, "a"}, {Speaker::user, "q2"},
                                {Speaker::assistant, "a2"}},
                               "test"});
    }
    testutil::TempDir dir;
    save_dataset(ds, dir / "lima.jsonl");
    const std::string body = read_file(dir / "lima.jsonl");
    EXPECT_EQ(std::count(body.begin(), body.end(), '\n'), 1030);
    const auto loaded = load_dataset(dir / "lima.jsonl");
    EXPECT_EQ(loaded.dataset.examples.size(), 1030u);
    EXPECT_EQ(loaded.stats.single_turn, 1000u);
    EXPECT_EQ(loaded.stats.multi_turn, 30u);
}

TEST(Corpus, EmptyFileWarns) {
    testutil::TempDir dir;
    write_file(dir / "empty.jsonl", "");
    const auto loaded = load_dataset(dir / "empty.jsonl");
    EXPECT_TRUE(loaded.dataset.examples.empty());
    EXPECT_FALSE(loaded.warnings.empty());
}

TEST(Corpus, EmptyDatasetSavesEmptyFile) {
    testutil::TempDir dir;
    save_dataset({"e", {}, "", std::nullopt}, dir / "e.jsonl");
    EXPECT_EQ(read_file(dir / "e.jsonl"), "");
}

TEST(Corpus, DuplicateIdRejected) {
    testutil::TempDir dir;
    const std::string rec = example_to_jsonl(single("q7", "a", "b"));
    write_file(dir / "dup.jsonl", rec + "\n" + rec + "\n");
    EXPECT_THROW(load_dataset(dir / "dup.jsonl"), ValidationError);
}

TEST(Corpus, MalformedRecordNamesLine) {
    testutil::TempDir dir;
    write_file(dir / "bad.jsonl", example_to_jsonl(single("a", "q", "r")) + "\n{not json\n");
    try {
        load_dataset(dir / "bad.jsonl");
        FAIL() << "expected LoadError";
    } catch (const LoadError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Corpus, AlternationAndBlankContentRejected) {
    DialogueExample bad{"b", {{Speaker::assistant, "hi"}, {Speaker::user, "q"}}, ""};
    EXPECT_THROW(validate_example(bad), ValidationError);
    DialogueExample twice{"t", {{Speaker::user, "q"}, {Speaker::user, "q"}, {Speaker::assistant, "a"}}, ""};
    EXPECT_THROW(validate_example(twice), ValidationError);
    EXPECT_THROW(validate_example(single("w", "   ", "a")), ValidationError);
    EXPECT_THROW(validate_example({"u", {{Speaker::user, "q"}}, ""}), ValidationError);

    testutil::TempDir dir;
    write_file(dir / "alt.jsonl", example_to_jsonl(bad) + "\n");
    EXPECT_THROW(load_dataset(dir / "alt.jsonl"), LoadError);
}

TEST(Corpus, FirstQuestion) {
    EXPECT_EQ(first_question(single("a", "Why is the sky blue?", "x")), "Why is the sky blue?");
    DialogueExample multi{"m", {{Speaker::user, "A"}, {Speaker::assistant, "B"}, {Speaker::user, "C"},
                               {Speaker::assistant, "D"}}, ""};
    EXPECT_EQ(first_question(multi), "A");
    EXPECT_EQ(first_question(single("w", "  padded  ", "x")), "padded");
    EXPECT_EQ(first_assistant_index(multi), 1u);
}

TEST(Corpus, MetadataSidecarRoundTrip) {
    testutil::TempDir dir;
    InstructionDataset ds{"role", {single("a", "q", "r")}, "be nice", 8};
    save_dataset(ds, dir / "role.jsonl");
    EXPECT_TRUE(std::filesystem::exists(metadata_path(dir / "role.jsonl")));
    EXPECT_EQ(load_dataset(dir / "role.jsonl").dataset, ds);
}

TEST(CorpusProperty, SaveLoadIsIdentity) {
    SeededRng rng(2024);
    testutil::TempDir dir;
    for (int trial = 0; trial < 50; ++trial) {
        InstructionDataset ds;
        ds.name = "set" + std::to_string(trial);
        ds.system_prompt = random_text(rng);
        if (rng.below(2)) ds.template_id = static_cast<int>(rng.below(9));
        const auto n = rng.below(20);
        for (std::uint64_t i = 0; i < n; ++i) {
            DialogueExample ex;
            ex.id = "id-" + std::to_string(i) + "-" + std::to_string(rng.below(1000));
            ex.source = random_text(rng);
            const auto pairs = 1 + rng.below(3);
            for (std::uint64_t p = 0; p < pairs; ++p) {
                ex.turns.push_back({Speaker::user, random_text(rng)});
                ex.turns.push_back({Speaker::assistant, random_text(rng)});
            }
            ds.examples.push_back(ex);
        }
        const auto path = dir / (ds.name + ".jsonl");
        save_dataset(ds, path);
        const auto back = load_dataset(path).dataset;
        ASSERT_EQ(back, ds) << "trial " << trial;
        save_dataset(back, dir / "again.jsonl");
        EXPECT_EQ(read_file(dir / "again.jsonl"), read_file(path));
    }
}
