#pragma once

// Zero-shot benchmark evaluation: item loading, prompt construction, greedy
// runs through the chat client with on-disk checkpoints, scoring, seed
// aggregation and the MMLU per-domain breakdown.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selfprompt/answer_extraction.hpp"
#include "selfprompt/code_sandbox.hpp"
#include "selfprompt/llm_client.hpp"

namespace selfprompt::eval {

enum class Metric { accuracy, pass_at_1 };

std::string to_string(Metric m);

struct BenchmarkSpec {
    std::string name;
    std::size_t n_items = 0;
    AnswerFormat format;
    Metric metric = Metric::accuracy;
};

/// The eight benchmarks in table order.
const std::vector<BenchmarkSpec>& benchmark_specs();
/// Throws ValidationError for an unknown name.
BenchmarkSpec benchmark_spec(const std::string& name);

inline constexpr std::size_t kMmluSampleSize = 2000;
inline constexpr std::size_t kMmluCategories = 10;

struct EvalItem {
    std::string item_id;
    std::string question;
    /// Letter -> option text, letters contiguous from 'A'.
    std::map<char, std::string> options;
    /// Letter, "yes"/"no", a number, or the test code for code problems.
    std::string gold;
    std::string category;
    std::string subcategory;
    /// Code problems: function under test and an optional reference body.
    std::string entry_point;
    std::string canonical_solution;

    bool operator==(const EvalItem&) const = default;
};

void validate_item(const EvalItem& item, const BenchmarkSpec& spec);

std::vector<EvalItem> load_items(const std::filesystem::path& path);
void save_items(const std::vector<EvalItem>& items, const std::filesystem::path& path);
std::string item_to_jsonl(const EvalItem& item);

struct LoadedBenchmark {
    BenchmarkSpec spec;
    std::vector<EvalItem> items;
    std::vector<std::string> warnings;
};

/// Reads `<dir>/<name>.jsonl` (or `source` itself when it is a file) and
/// validates every item. A count different from the spec is a warning.
LoadedBenchmark load_benchmark(const std::filesystem::path& source, const std::string& name);

/// n / n_categories items from each category, drawn with a seeded shuffle
/// and returned sorted by item id. Throws if n is not divisible or a
/// category is short, naming that category.
std::vector<EvalItem> sample_mmlu_balanced(const std::vector<EvalItem>& pool, std::size_t n, std::uint64_t seed,
                                           std::size_t n_categories = kMmluCategories);

/// A single user message with the question, lettered options when present
/// and a one-line answer-format directive. Temperature 0.
llm::CompletionRequest build_zero_shot_prompt(const EvalItem& item, const BenchmarkSpec& spec,
                                              const std::string& model = "", int max_tokens = 512);

struct Prediction {
    std::string item_id;
    std::string raw_output;
    std::optional<std::string> extracted;
    std::optional<bool> correct;
    bool extraction_failed = false;
    /// Sandbox tag for code problems, e.g. "timeout".
    std::string note;
    std::string category;
    std::string subcategory;

    bool operator==(const Prediction&) const = default;
};

struct ExcludedItem {
    std::string item_id;
    std::string error;

    bool operator==(const ExcludedItem&) const = default;
};

struct EvalReport {
    std::string benchmark;
    std::string model;
    std::uint64_t seed = 0;
    std::optional<int> template_id;
    Metric metric_kind = Metric::accuracy;
    /// Sorted by item id.
    std::vector<Prediction> predictions;
    std::vector<ExcludedItem> excluded;
    /// Percentage over the scored predictions.
    double metric = 0.0;
    double extraction_failure_rate = 0.0;
    bool skipped = false;
    std::string note;

    bool operator==(const EvalReport&) const = default;
};

/// 100 * correct / scored, from the per-item records alone.
double recompute_metric(const EvalReport& report);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& json_text);

struct CodeScore {
    bool passed = false;
    bool timed_out = false;
    std::string note;
};

/// Runs the candidate against the problem's tests. Results are memoised per
/// distinct program within the process.
CodeScore score_code(const std::string& candidate, const EvalItem& item, const SandboxConfig& sandbox);

struct EvalConfig {
    std::string model;
    std::uint64_t seed = 0;
    std::optional<int> template_id;
    int max_tokens = 512;
    SandboxConfig sandbox;
    /// JSONL of finished predictions; items already present are skipped
    /// when `resume` is set.
    std::optional<std::filesystem::path> checkpoint;
    bool resume = false;
    std::size_t chunk_size = 64;
};

/// Evaluates every item. Requests always go out at temperature 0. Items
/// whose request fails after retries land in `excluded`.
EvalReport run_eval(llm::LlmClient& client, const LoadedBenchmark& benchmark, const EvalConfig& config);

struct SeedAggregate {
    std::string benchmark;
    std::string model;
    std::vector<std::uint64_t> seeds;
    std::vector<double> values;
    double mean = 0.0;
    std::vector<std::string> warnings;
};

/// Mean over seeds. Throws ValidationError on mixed benchmarks or models or
/// an empty list; a single report passes through with a warning.
SeedAggregate aggregate_seeds(const std::vector<EvalReport>& reports);

struct ResultsRow {
    std::string model;
    std::map<std::string, double> values;  ///< benchmark -> seed mean
    double avg = 0.0;
    bool best = false;
};

struct ResultsTable {
    std::vector<std::string> benchmarks;  ///< column order
    std::vector<ResultsRow> rows;
    std::vector<std::string> notes;
};

/// Index of the row with the highest AVG; the first wins ties.
std::size_t best_average(const std::vector<ResultsRow>& rows);

/// One row per model with seed means per benchmark and the AVG column.
/// Skipped reports are left out and noted. Every model must cover the same
/// benchmarks.
ResultsTable build_results_table(const std::map<std::string, std::vector<EvalReport>>& reports_by_model);

std::string results_table_markdown(const ResultsTable& table);

struct DomainCell {
    std::string name;
    std::string parent;  ///< category of a subcategory cell
    std::size_t n = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
};

struct DomainBreakdown {
    std::vector<DomainCell> categories;
    std::vector<DomainCell> subcategories;
    std::size_t total = 0;
};

/// Throws ValidationError if any prediction lacks a category.
DomainBreakdown mmlu_domain_breakdown(const EvalReport& report);

/// Cell-wise mean accuracy over several breakdowns (e.g. seeds); counts add.
DomainBreakdown mean_breakdown(const std::vector<DomainBreakdown>& parts);

struct DomainComparison {
    struct Row {
        std::string category;
        double a = 0.0;
        double b = 0.0;
    };
    std::vector<Row> rows;
    std::size_t wins_a = 0;
    std::size_t wins_b = 0;
    std::size_t ties = 0;
};

DomainComparison compare_domains(const DomainBreakdown& a, const DomainBreakdown& b);

}  // namespace selfprompt::eval
