#pragma once

// Blinded pairwise preference evaluation with an LLM judge. Role-play
// prefixes are stripped before the judge sees a response, and every pair is
// judged in both orders.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selfprompt/llm_client.hpp"
#include "selfprompt/template_forge.hpp"

namespace selfprompt::judge {

struct StripResult {
    std::string text;
    std::optional<forge::PrefixMatch> match;
    std::string warning;  ///< set when nothing is left after stripping
};

/// Removes a leading rendered prefix (summary + junction + role + tail)
/// and trims the rest; other text is returned unchanged.
StripResult strip_role_prefix(const std::string& response, const std::vector<forge::PromptTemplate>& templates);

struct PairwiseCase {
    std::string question_id;
    std::string question;
    std::string response_a;
    std::string response_b;
    std::string system_a;
    std::string system_b;
    bool order_swapped = false;

    /// The same case with the responses presented in reverse order.
    PairwiseCase swapped() const;
};

inline constexpr const char* kDefaultJudgeInstructions =
    "You are an impartial evaluator. Two assistants answered the same user question. Decide which "
    "response a thoughtful user would prefer, considering helpfulness and correctness. Ignore the order "
    "of presentation. If neither is clearly better, call it a tie. Begin your reply with one line that is "
    "exactly \"Preference: A\", \"Preference: B\" or \"Preference: Tie\", then justify briefly.";

struct JudgePromptConfig {
    std::string model = "gpt-4";
    std::string instructions = kDefaultJudgeInstructions;
    int max_tokens = 512;
};

/// System instructions plus one user message holding the question and the
/// two responses labelled "Response A" and "Response B" in presented order.
llm::CompletionRequest build_judge_prompt(const PairwiseCase& c, const JudgePromptConfig& config = {});

/// Text of every message, i.e. all the judge can see.
std::string judge_visible_text(const llm::CompletionRequest& request);

enum class Preference { a, b, tie };

std::string to_string(Preference p);

/// Reads "Preference: A|B|Tie" (case-insensitive). nullopt for refusals
/// and anything else.
std::optional<Preference> parse_preference(const std::string& reply);

enum class Winner { a, b, tie, unjudged };

std::string to_string(Winner w);

struct Verdict {
    std::string question_id;
    Winner winner = Winner::unjudged;
    /// Both in the original orientation (a = system_a).
    std::optional<Preference> first_verdict;
    std::optional<Preference> swapped_verdict;
    /// Both orders produced the same preference.
    bool resolved = false;
    std::string note;
};

/// Unparseable either way: unjudged. Agreement: that side. Otherwise tie.
Verdict resolve_verdict(const std::string& question_id, std::optional<Preference> first,
                        std::optional<Preference> swapped_back);

struct VerdictTally {
    std::size_t wins_a = 0;
    std::size_t wins_b = 0;
    std::size_t ties = 0;
    std::size_t unjudged = 0;

    std::size_t judged() const { return wins_a + wins_b + ties; }
    std::size_t total() const { return judged() + unjudged; }
};

VerdictTally tally(const std::vector<Verdict>& verdicts);

/// Case-sensitive occurrences of any forbidden string in `visible`.
std::vector<std::string> blinding_violations(const std::string& visible, const std::vector<std::string>& forbidden);

struct JudgeRunConfig {
    JudgePromptConfig prompt;
    std::vector<forge::PromptTemplate> templates = forge::builtin_templates();
    /// Extra strings that must never reach the judge (model ids, endpoints).
    std::vector<std::string> forbidden;
};

struct JudgeRun {
    std::string system_a;
    std::string system_b;
    std::vector<Verdict> verdicts;  ///< sorted by question id
    VerdictTally tally;
    std::vector<std::string> warnings;
};

/// Judges each case twice (as given and swapped). Requests that would show
/// a forbidden string are not sent; such cases are unjudged.
JudgeRun judge_cases(llm::LlmClient& judge, const std::vector<PairwiseCase>& cases, const JudgeRunConfig& config);

struct TestQuestion {
    std::string question_id;
    std::string question;
};

/// JSONL with question_id and question fields.
std::vector<TestQuestion> load_test_questions(const std::filesystem::path& path);
void save_test_questions(const std::vector<TestQuestion>& questions, const std::filesystem::path& path);

/// question_id -> raw reply for one system, as generated at temperature 0.
using ResponseSet = std::map<std::string, std::string>;

/// Asks `model` every question as a single user message. Failed requests
/// are left out and reported in `warnings`.
ResponseSet generate_responses(llm::LlmClient& model, const std::vector<TestQuestion>& questions,
                               const std::string& model_name, std::vector<std::string>& warnings);

std::string responses_jsonl(const ResponseSet& responses);
ResponseSet load_responses(const std::filesystem::path& path);

/// Strips prefixes from both sides and pairs the responses. Questions
/// missing on either side are skipped with a warning.
std::vector<PairwiseCase> build_cases(const std::vector<TestQuestion>& questions, const ResponseSet& a,
                                      const ResponseSet& b, const std::string& system_a,
                                      const std::string& system_b, const std::vector<forge::PromptTemplate>& templates,
                                      std::vector<std::string>& warnings);

/// Generates both response sets, then judges them.
JudgeRun judge_testset(llm::LlmClient& model_a, llm::LlmClient& model_b, llm::LlmClient& judge,
                       const std::vector<TestQuestion>& questions, const std::string& system_a,
                       const std::string& system_b, const JudgeRunConfig& config);

std::string verdicts_jsonl(const JudgeRun& run);
std::vector<Verdict> load_verdicts(const std::filesystem::path& path);
/// Counts and win/tie/loss percentages over judged cases.
std::string summary_json(const JudgeRun& run);
/// outcome,count,percent rows for a bar chart.
std::string plot_csv(const JudgeRun& run);

}  // namespace selfprompt::judge
