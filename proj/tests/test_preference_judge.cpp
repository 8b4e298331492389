#include <atomic>

#include "selfprompt/preference_judge.hpp"
#include "selfprompt/stubs.hpp"
#include "test_util.hpp"

using namespace selfprompt;
using namespace selfprompt::judge;

namespace {

llm::LlmClient client(llm::StubHandler h) {
    llm::ClientConfig c;
    c.endpoint = "stub:judge";
    c.max_retries = 0;
    return llm::LlmClient(c, std::make_shared<llm::StubTransport>(std::move(h)));
}

std::vector<PairwiseCase> random_cases(std::size_t n, std::uint64_t seed) {
    SeededRng rng(seed);
    std::vector<PairwiseCase> out;
    for (std::size_t i = 0; i < n; ++i) {
        PairwiseCase c;
        c.question_id = "q" + std::to_string(1000 + i);
        c.question = "Question number " + std::to_string(i) + "?";
        c.response_a = std::string(1 + rng.below(40), 'a');
        c.response_b = std::string(1 + rng.below(40), 'b');
        c.system_a = "Alpha";
        c.system_b = "Beta";
        out.push_back(c);
    }
    return out;
}

Winner mirror(Winner w) {
    if (w == Winner::a) return Winner::b;
    if (w == Winner::b) return Winner::a;
    return w;
}

}  // namespace

TEST(Strip, RemovesLeadingPrefixOnly) {
    const auto t = forge::builtin_templates();
    const auto r = strip_role_prefix(
        "This is a cooking question about bread. From now on, I will think like a baker.  Knead the dough.", t);
    EXPECT_EQ(r.text, "Knead the dough.");
    ASSERT_TRUE(r.match);
    EXPECT_EQ(r.match->template_id, 8);
    EXPECT_TRUE(r.warning.empty());

    const std::string plain = "Knead the dough. From now on, nothing.";
    EXPECT_EQ(strip_role_prefix(plain, t).text, plain);
    EXPECT_FALSE(strip_role_prefix(plain, t).match);

    const auto only = strip_role_prefix("A question. So I will become a chef.", t);
    EXPECT_EQ(only.text, "");
    EXPECT_FALSE(only.warning.empty());
}

TEST(Prompt, LabelsAndSwap) {
    PairwiseCase c{"q1", "What?", "first answer", "second answer", "Sim-LIMA", "Sim-Role"};
    const auto req = build_judge_prompt(c);
    const auto visible = judge_visible_text(req);
    EXPECT_LT(visible.find("first answer"), visible.find("second answer"));
    EXPECT_NE(visible.find("Response A"), std::string::npos);
    EXPECT_NE(visible.find("Response B"), std::string::npos);
    EXPECT_EQ(req.temperature, 0.0);
    EXPECT_TRUE(blinding_violations(visible, {"Sim-LIMA", "Sim-Role"}).empty());

    const auto s = c.swapped();
    EXPECT_TRUE(s.order_swapped);
    EXPECT_EQ(s.response_a, c.response_b);
    EXPECT_EQ(s.system_a, c.system_b);
    EXPECT_EQ(s.swapped().response_a, c.response_a);
    EXPECT_FALSE(s.swapped().order_swapped);
    const auto sv = judge_visible_text(build_judge_prompt(s));
    EXPECT_LT(sv.find("second answer"), sv.find("first answer"));
}

TEST(ParsePreference, Forms) {
    EXPECT_EQ(parse_preference("Preference: A\nbecause"), Preference::a);
    EXPECT_EQ(parse_preference("preference: b"), Preference::b);
    EXPECT_EQ(parse_preference("Preference: Tie"), Preference::tie);
    EXPECT_EQ(parse_preference("I'm sorry, but I can't help with that request."), std::nullopt);
    EXPECT_EQ(parse_preference("Both are fine."), std::nullopt);
}

TEST(Resolve, Table) {
    using P = Preference;
    EXPECT_EQ(resolve_verdict("x", P::a, P::a).winner, Winner::a);
    EXPECT_TRUE(resolve_verdict("x", P::a, P::a).resolved);
    EXPECT_EQ(resolve_verdict("x", P::b, P::b).winner, Winner::b);
    EXPECT_EQ(resolve_verdict("x", P::tie, P::tie).winner, Winner::tie);
    const auto d = resolve_verdict("x", P::a, P::b);
    EXPECT_EQ(d.winner, Winner::tie);
    EXPECT_FALSE(d.resolved);
    EXPECT_EQ(resolve_verdict("x", P::a, P::tie).winner, Winner::tie);
    EXPECT_EQ(resolve_verdict("x", std::nullopt, P::a).winner, Winner::unjudged);
    EXPECT_EQ(resolve_verdict("x", P::a, std::nullopt).winner, Winner::unjudged);
}

TEST(JudgeCases, TieStubGivesAllTies) {
    auto j = client(stubs::judge_stub(stubs::JudgeKind::tie));
    const auto run = judge_cases(j, random_cases(300, 1), {});
    EXPECT_EQ(run.tally.ties, 300u);
    EXPECT_EQ(run.tally.total(), 300u);
}

TEST(JudgeCases, FirstPositionBiasBecomesTie) {
    auto j = client(stubs::judge_stub(stubs::JudgeKind::first));
    const auto run = judge_cases(j, random_cases(40, 2), {});
    EXPECT_EQ(run.tally.ties, 40u);
    for (const auto& v : run.verdicts) EXPECT_FALSE(v.resolved);
}

TEST(JudgeCases, RefusalsAreUnjudged) {
    auto j = client(stubs::judge_stub(stubs::JudgeKind::refuse));
    const auto run = judge_cases(j, random_cases(10, 3), {});
    EXPECT_EQ(run.tally.unjudged, 10u);
    EXPECT_EQ(run.tally.total(), 10u);
}

TEST(JudgeCases, ConservationAndSwapSymmetry) {
    for (auto kind : {stubs::JudgeKind::longer, stubs::JudgeKind::tie, stubs::JudgeKind::first}) {
        auto j = client(stubs::judge_stub(kind));
        const auto cases = random_cases(120, 4);
        std::vector<PairwiseCase> flipped;
        for (const auto& c : cases) flipped.push_back(c.swapped());
        const auto run = judge_cases(j, cases, {});
        const auto back = judge_cases(j, flipped, {});
        ASSERT_EQ(run.verdicts.size(), cases.size());
        EXPECT_EQ(run.tally.total(), cases.size());
        EXPECT_EQ(run.tally.wins_a, back.tally.wins_b);
        EXPECT_EQ(run.tally.wins_b, back.tally.wins_a);
        EXPECT_EQ(run.tally.ties, back.tally.ties);
        for (std::size_t i = 0; i < cases.size(); ++i) {
            EXPECT_EQ(run.verdicts[i].question_id, back.verdicts[i].question_id);
            EXPECT_EQ(mirror(run.verdicts[i].winner), back.verdicts[i].winner);
        }
    }
}

TEST(JudgeCases, LongerStubCounts) {
    auto j = client(stubs::judge_stub(stubs::JudgeKind::longer));
    const auto cases = random_cases(200, 5);
    std::size_t a = 0, b = 0, tie = 0;
    for (const auto& c : cases) {
        if (c.response_a.size() > c.response_b.size()) ++a;
        else if (c.response_a.size() < c.response_b.size()) ++b;
        else ++tie;
    }
    const auto run = judge_cases(j, cases, {});
    EXPECT_EQ(run.tally.wins_a, a);
    EXPECT_EQ(run.tally.wins_b, b);
    EXPECT_EQ(run.tally.ties, tie);
}

TEST(JudgeCases, ForbiddenTextNeverSent) {
    std::atomic<int> calls{0};
    std::atomic<int> leaked{0};
    auto j = client([&](const llm::CompletionRequest& r) {
        ++calls;
        for (const auto& m : r.messages) leaked += m.content.find("Sim-Role") != std::string::npos;
        return llm::StubReply::text("Preference: Tie");
    });
    auto cases = random_cases(5, 6);
    cases[2].response_b = "As Sim-Role, I say hi.";
    JudgeRunConfig cfg;
    cfg.forbidden = {"Sim-Role"};
    const auto run = judge_cases(j, cases, cfg);
    EXPECT_EQ(leaked.load(), 0);
    EXPECT_EQ(calls.load(), 8);
    EXPECT_EQ(run.tally.unjudged, 1u);
    EXPECT_EQ(run.tally.total(), 5u);
}

TEST(BuildCases, StripsAndSkipsMissing) {
    std::vector<TestQuestion> qs = {{"t1", "Q1"}, {"t2", "Q2"}, {"t3", "Q3"}};
    ResponseSet a = {{"t1", "Plain one."}, {"t2", "Plain two."}};
    ResponseSet b = {{"t1", "A question. From now on, I will think like a chef. Answer one."},
                     {"t2", "Answer two."},
                     {"t3", "Answer three."}};
    std::vector<std::string> warnings;
    const auto cases = build_cases(qs, a, b, "A", "B", forge::builtin_templates(), warnings);
    ASSERT_EQ(cases.size(), 2u);
    EXPECT_EQ(cases[0].response_b, "Answer one.");
    EXPECT_FALSE(warnings.empty());
    for (const auto& c : cases) {
        for (const auto& phrase : forge::junction_phrases(forge::builtin_templates())) {
            EXPECT_EQ(judge_visible_text(build_judge_prompt(c)).find(phrase), std::string::npos);
        }
    }
}

TEST(Files, RoundTrips) {
    testutil::TempDir dir;
    std::vector<TestQuestion> qs = {{"t1", "Q \"1\""}, {"t2", "Q2\nline"}};
    save_test_questions(qs, dir / "q.jsonl");
    const auto back = load_test_questions(dir / "q.jsonl");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].question, "Q2\nline");

    ResponseSet rs = {{"t1", "x"}, {"t2", "y\nz"}};
    write_file(dir / "r.jsonl", responses_jsonl(rs));
    EXPECT_EQ(load_responses(dir / "r.jsonl"), rs);

    auto j = client(stubs::judge_stub(stubs::JudgeKind::longer));
    const auto run = judge_cases(j, random_cases(20, 7), {});
    write_file(dir / "v.jsonl", verdicts_jsonl(run));
    const auto vs = load_verdicts(dir / "v.jsonl");
    ASSERT_EQ(vs.size(), run.verdicts.size());
    for (std::size_t i = 0; i < vs.size(); ++i) {
        EXPECT_EQ(vs[i].question_id, run.verdicts[i].question_id);
        EXPECT_EQ(vs[i].winner, run.verdicts[i].winner);
        EXPECT_EQ(vs[i].resolved, run.verdicts[i].resolved);
    }
    EXPECT_EQ(tally(vs).total(), 20u);
    EXPECT_NE(summary_json(run).find("wins_a"), std::string::npos);
    EXPECT_NE(plot_csv(run).find("outcome,count,percent"), std::string::npos);
}

TEST(JudgeTestset, EndToEndWithStubs) {
    std::vector<TestQuestion> qs;
    for (int i = 0; i < 30; ++i) qs.push_back({"lima-test-" + std::to_string(i), "Question " + std::to_string(i) + "?"});
    auto ma = client([](const llm::CompletionRequest&) { return llm::StubReply::text("short"); });
    auto mb = client([](const llm::CompletionRequest&) {
        return llm::StubReply::text("A question. From now on, I will think like a tutor. A much longer answer.");
    });
    auto j = client(stubs::judge_stub(stubs::JudgeKind::longer));
    const auto run = judge_testset(ma, mb, j, qs, "Sim-LIMA", "Sim-Role", {});
    EXPECT_EQ(run.tally.wins_b, 30u);
    EXPECT_EQ(run.tally.total(), 30u);
}
