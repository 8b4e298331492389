#pragma once

// One-shot role annotation: ask an annotator model for a question summary
// and an expert role, fall back to a generic assistant role on refusals, and
// produce a seeded checklist for manual quality audits.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selfprompt/corpus.hpp"
#include "selfprompt/llm_client.hpp"

namespace selfprompt::annotate {

inline constexpr const char* kDefaultFallbackRole = "an AI assistant";
inline constexpr const char* kSummaryLabel = "Summary";
inline constexpr const char* kRoleLabel = "Role";

struct RoleAnnotation {
    std::string example_id;
    std::string question_summary;
    std::string role_description;
    bool refused = false;
    std::string annotator_model;

    bool operator==(const RoleAnnotation&) const = default;
};

using AnnotationMap = std::map<std::string, RoleAnnotation>;

/// The single worked example shown to the annotator.
struct Exemplar {
    std::string question;
    std::string summary;
    std::string role;
};

Exemplar default_exemplar();

struct AnnotatorOptions {
    std::string model = "gpt-4";
    std::string fallback_role = kDefaultFallbackRole;
    Exemplar exemplar = default_exemplar();
    int max_tokens = 256;
};

/// System instructions, the exemplar as a user/assistant pair, then the
/// target question. Question lines are quoted with "> " so label tokens
/// inside a question never start a line. Temperature is always 0.
llm::CompletionRequest build_annotation_request(const std::string& question,
                                                const Exemplar& exemplar,
                                                const std::string& model = "gpt-4",
                                                int max_tokens = 256);

struct ParsedAnnotation {
    enum class Kind { ok, refusal, parse_failure };
    Kind kind = Kind::parse_failure;
    std::string summary;
    std::string role;
    std::string detail;  ///< why parsing failed
};

ParsedAnnotation parse_annotation(const std::string& raw);

bool looks_like_refusal(const std::string& raw);

/// "a question about <first 8 content words>".
std::string fallback_summary(const std::string& question);

struct AnnotationOutcome {
    std::optional<RoleAnnotation> annotation;
    std::string error;

    bool ok() const { return annotation.has_value(); }
};

using AnnotationResult = std::map<std::string, AnnotationOutcome>;

/// One outcome per example id. Parse failures are retried once with the
/// identical request before being reported.
AnnotationResult annotate_dataset(const corpus::InstructionDataset& dataset, llm::LlmClient& client,
                                  const AnnotatorOptions& options = {});

/// Successful annotations only.
AnnotationMap collect_annotations(const AnnotationResult& result);

void save_annotations(const AnnotationMap& annotations, const std::filesystem::path& path);
AnnotationMap load_annotations(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Manual audit
// ---------------------------------------------------------------------------

/// Reference fractions from the original LIMA-Role audit (100 entries).
struct AuditBaseline {
    double formatting_ok = 1.00;
    double summary_ok = 0.96;
    double role_ok = 0.97;
};

struct AuditItem {
    std::string id;
    bool formatting_ok = false;  ///< prefilled by the automatic check
    std::optional<bool> summary_ok;
    std::optional<bool> role_ok;
};

struct AuditReport {
    std::size_t sample_size = 0;
    std::uint64_t seed = 0;
    AuditBaseline baseline;
    std::vector<AuditItem> items;
    /// Present once every item has the column filled in.
    std::optional<double> formatting_ok;
    std::optional<double> summary_ok;
    std::optional<double> role_ok;
};

/// Empty string when the annotation is well formed, otherwise the problem.
std::string formatting_problem(const RoleAnnotation& annotation, const std::string& fallback_role);

/// Seeded sample of `n` distinct examples, in dataset order, with the
/// formatting column prefilled. Throws ValidationError when n is zero or
/// exceeds the dataset size.
AuditReport audit_sample(const corpus::InstructionDataset& dataset, const AnnotationMap& annotations,
                         std::size_t n, std::uint64_t seed,
                         const std::string& fallback_role = kDefaultFallbackRole);

/// Recomputes the three fractions from the item checklist.
void summarize_audit(AuditReport& report);

/// CSV with columns id,formatting_ok,summary_ok,role_ok (blank = unfilled).
void write_audit_checklist(const AuditReport& report, const std::filesystem::path& path);
std::vector<AuditItem> read_audit_checklist(const std::filesystem::path& path);

/// Header (seed, size, baseline) and computed fractions as JSON.
std::string audit_report_json(const AuditReport& report);

}  // namespace selfprompt::annotate
