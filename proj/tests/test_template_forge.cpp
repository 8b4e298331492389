#include <fstream>

#include "selfprompt/template_forge.hpp"
#include "test_util.hpp"

using namespace selfprompt;
using namespace selfprompt::forge;

namespace {

annotate::RoleAnnotation ann(const std::string& id, const std::string& summary, const std::string& role) {
    return {id, summary, role, false, "gpt-4"};
}

corpus::InstructionDataset base_dataset() {
    corpus::InstructionDataset ds;
    ds.name = "base";
    ds.examples.push_back({"e1",
                           {{corpus::Speaker::user, "Why is the sky blue?"},
                            {corpus::Speaker::assistant, "Rayleigh scattering."}},
                           "t"});
    ds.examples.push_back({"e2",
                           {{corpus::Speaker::user, "Name a prime."},
                            {corpus::Speaker::assistant, "Seven."},
                            {corpus::Speaker::user, "Another?"},
                            {corpus::Speaker::assistant, "Eleven."}},
                           "t"});
    return ds;
}

annotate::AnnotationMap base_annotations() {
    return {{"e1", ann("e1", "This is a physics question about light", "a physicist")},
            {"e2", ann("e2", "This is a math question about primes.", "a number theorist.")}};
}

}  // namespace

TEST(Templates, MatchGoldenTable) {
    std::ifstream in(testutil::data_dir() / "templates" / "golden.txt");
    ASSERT_TRUE(in);
    const auto templates = builtin_templates();
    ASSERT_EQ(templates.size(), 9u);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        const auto tab = line.find('\t');
        const int id = std::stoi(line.substr(0, tab));
        const std::string expected = line.substr(tab + 1);
        const auto& t = templates.at(static_cast<std::size_t>(id));
        EXPECT_EQ(t.template_id, id);
        const auto rendered = render_prefix(t, ann("x", "[Question Description]", "[Role Description]"));
        EXPECT_EQ(rendered.empty() ? std::string("None") : rendered, expected) << "template " << id;
        ++rows;
    }
    EXPECT_EQ(rows, 9);
    EXPECT_EQ(kDefaultTemplateId, 8);
}

TEST(Templates, DefaultRendering) {
    const auto p = render_prefix(builtin_template(8),
                                 ann("x", "This is a physics question about projectile motion", "a physics professor"));
    EXPECT_EQ(p, "This is a physics question about projectile motion. From now on, I will think like a physics professor.");
}

TEST(Templates, TrailingPeriodsAndSpacesNormalized) {
    const auto p = render_prefix(builtin_template(5), ann("x", "A  chemistry question.. ", " a chemist. "));
    EXPECT_EQ(p, "A chemistry question. So I will become a chemist.");
}

TEST(Templates, EmptyRoleIsError) {
    for (int id = 2; id <= 8; ++id) {
        EXPECT_THROW(render_prefix(builtin_template(id), ann("x", "Summary", "")), ValidationError) << id;
    }
    EXPECT_EQ(render_prefix(builtin_template(1), ann("x", "Summary", "")), "Summary.");
    EXPECT_EQ(render_prefix(builtin_template(0), ann("x", "", "")), "");
    EXPECT_THROW(render_prefix(builtin_template(1), ann("x", " ", "r")), ValidationError);
}

TEST(Templates, Validation) {
    EXPECT_NO_THROW(validate_template({0, ""}));
    EXPECT_NO_THROW(validate_template({1, "{question}!"}));
    EXPECT_THROW(validate_template({2, "{role} then {question}"}), ValidationError);
    EXPECT_THROW(validate_template({2, "{question}{role}"}), ValidationError);
    EXPECT_THROW(validate_template({2, "{question} and {question} as {role}"}), ValidationError);
    EXPECT_THROW(validate_template({2, "just {role}"}), ValidationError);
    EXPECT_THROW(validate_template({-1, ""}), ValidationError);
    EXPECT_THROW(builtin_template(9), ValidationError);
    for (const auto& t : builtin_templates()) EXPECT_NO_THROW(validate_template(t));
}

TEST(Templates, FileRoundTrip) {
    testutil::TempDir dir;
    save_templates(builtin_templates(), dir / "t.txt");
    EXPECT_EQ(load_templates(dir / "t.txt"), builtin_templates());
    write_file(dir / "bad.txt", "(none)\n{role} first {question}\n");
    try {
        load_templates(dir / "bad.txt");
        FAIL() << "expected LoadError";
    } catch (const corpus::LoadError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Assemble, OnlyFirstAnswerPrefixed) {
    const auto ds = base_dataset();
    const auto out = assemble_role_dataset(ds, base_annotations(), builtin_template(8));
    ASSERT_EQ(out.examples.size(), 2u);
    EXPECT_EQ(out.template_id, 8);
    EXPECT_EQ(out.examples[0].turns[1].content,
              "This is a physics question about light. From now on, I will think like a physicist. "
              "Rayleigh scattering.");
    EXPECT_EQ(out.examples[1].turns[1].content,
              "This is a math question about primes. From now on, I will think like a number theorist. Seven.");
    EXPECT_EQ(out.examples[1].turns[0], ds.examples[1].turns[0]);
    EXPECT_EQ(out.examples[1].turns[2], ds.examples[1].turns[2]);
    EXPECT_EQ(out.examples[1].turns[3], ds.examples[1].turns[3]);
    for (std::size_t i = 0; i < ds.examples.size(); ++i) EXPECT_EQ(out.examples[i].id, ds.examples[i].id);
}

TEST(Assemble, TemplateZeroIsIdentity) {
    const auto ds = base_dataset();
    const auto out = assemble_role_dataset(ds, base_annotations(), builtin_template(0));
    EXPECT_EQ(out.examples, ds.examples);
    EXPECT_EQ(out.template_id, 0);
}

TEST(Assemble, MissingAnnotationsListed) {
    auto a = base_annotations();
    a.erase("e2");
    try {
        assemble_role_dataset(base_dataset(), a, builtin_template(8));
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("e2"), std::string::npos);
    }
}

TEST(MatchPrefix, RecoversEveryTemplate) {
    const auto templates = builtin_templates();
    for (int id = 2; id <= 8; ++id) {
        const auto prefix = render_prefix(templates[id], ann("x", "A cooking question about bread", "a baker"));
        const auto m = match_prefix(prefix + " Knead it well.\nMore text.", templates);
        ASSERT_TRUE(m) << id;
        EXPECT_EQ(m->template_id, id);
        EXPECT_EQ(m->summary, "A cooking question about bread");
        EXPECT_EQ(m->role, "a baker");
        EXPECT_EQ(m->length, prefix.size());
        EXPECT_FALSE(m->ambiguous);
    }
}

TEST(MatchPrefix, FortunatelyExample) {
    const auto m = match_prefix("This is a chemistry question about titration. Fortunately, I am a senior chemist. "
                                "First add the indicator.",
                                builtin_templates());
    ASSERT_TRUE(m);
    EXPECT_EQ(m->template_id, 6);
    EXPECT_EQ(m->role, "a senior chemist");
}

TEST(MatchPrefix, Misses) {
    const auto t = builtin_templates();
    EXPECT_FALSE(match_prefix("Just an ordinary answer.", t));
    EXPECT_FALSE(match_prefix("From now on, I will think like a chef.", t));
    EXPECT_FALSE(match_prefix("Summary line\nFrom now on, I will think like a chef.", t));
    EXPECT_FALSE(match_prefix("", t));
}

TEST(MatchPrefix, AmbiguousWhenTwoJunctions) {
    const auto m = match_prefix("Q about x. So I will become a judge. Fortunately, I am late.", builtin_templates());
    ASSERT_TRUE(m);
    EXPECT_EQ(m->template_id, 5);
    EXPECT_TRUE(m->ambiguous);
}

TEST(MatchPrefix, RenderMatchProperty) {
    SeededRng rng(11);
    const std::vector<std::string> words = {"quantum", "bread",   "tax",    "river", "poem",   "engine",
                                            "garden",  "history", "violin", "chess", "protein", "orbit"};
    const auto templates = builtin_templates();
    for (int trial = 0; trial < 300; ++trial) {
        auto phrase = [&](std::size_t n) {
            std::vector<std::string> w;
            for (std::size_t i = 0; i < n; ++i) w.push_back(words[rng.below(words.size())]);
            return text::join(w, " ");
        };
        const std::string summary = "This is a " + phrase(1 + rng.below(5)) + " question";
        const std::string role = "an expert in " + phrase(1 + rng.below(3));
        const int id = 2 + static_cast<int>(rng.below(7));
        const auto prefix = render_prefix(templates[id], ann("x", summary, role));
        const auto m = match_prefix(prefix + std::string(kPrefixSeparator) + phrase(6), templates);
        ASSERT_TRUE(m) << prefix;
        EXPECT_EQ(m->template_id, id);
        EXPECT_EQ(m->summary, summary);
        EXPECT_EQ(m->role, role);
        EXPECT_EQ(m->length, prefix.size());
    }
}

TEST(JunctionPhrases, Stripped) {
    const auto j = junction_phrases(builtin_templates());
    ASSERT_EQ(j.size(), 7u);
    EXPECT_EQ(j.front(), "As a result, I will solve it like");
    EXPECT_EQ(j.back(), "From now on, I will think like");
}

TEST(DiffTemplates, LocalizedToJunction) {
    const auto ds = base_dataset();
    const auto a = assemble_role_dataset(ds, base_annotations(), builtin_template(2));
    const auto b = assemble_role_dataset(ds, base_annotations(), builtin_template(8));
    const auto r = diff_templates(a, b);
    EXPECT_EQ(r.template_a, 2);
    EXPECT_EQ(r.template_b, 8);
    EXPECT_EQ(r.differing, 2u);
    EXPECT_TRUE(r.all_localized);
    for (const auto& e : r.entries) {
        EXPECT_TRUE(e.summary_equal && e.role_equal && e.answer_equal);
        EXPECT_FALSE(e.identical);
    }
}

TEST(DiffTemplates, SlotChangeNotLocalized) {
    const auto ds = base_dataset();
    const auto a = assemble_role_dataset(ds, base_annotations(), builtin_template(1));
    const auto b = assemble_role_dataset(ds, base_annotations(), builtin_template(8));
    const auto r = diff_templates(a, b);
    EXPECT_FALSE(r.all_localized);
    for (const auto& e : r.entries) EXPECT_TRUE(e.answer_equal);
}

TEST(DiffTemplates, UnrelatedRejected) {
    auto a = assemble_role_dataset(base_dataset(), base_annotations(), builtin_template(2));
    auto b = assemble_role_dataset(base_dataset(), base_annotations(), builtin_template(8));
    b.examples[1].turns[2].content = "Changed";
    EXPECT_THROW(diff_templates(a, b), ValidationError);
    b = a;
    b.template_id.reset();
    EXPECT_THROW(diff_templates(a, b), ValidationError);
    b = a;
    b.examples.pop_back();
    EXPECT_THROW(diff_templates(a, b), ValidationError);
}
