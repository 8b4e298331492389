#pragma once

// Deterministic offline stand-ins for the annotator, the judge and the
// evaluated models. Each is a StubHandler registered under a name that an
// endpoint of the form "stub:<name>" resolves to.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "selfprompt/eval_harness.hpp"
#include "selfprompt/llm_client.hpp"

namespace selfprompt::stubs {

inline constexpr const char* kRefusalText = "I'm sorry, but I can't help with that request.";

/// Answers annotation requests with a summary and role derived from the
/// question's topic. Refuses when the question contains any trigger.
llm::StubHandler annotator_stub(std::vector<std::string> refuse_on);

enum class JudgeKind { longer, tie, first, refuse };

JudgeKind judge_kind_from_string(const std::string& s);

/// longer: the longer response wins, equal lengths tie. first: always A.
llm::StubHandler judge_stub(JudgeKind kind);

/// Splits a judge request into the two presented responses.
std::optional<std::pair<std::string, std::string>> parse_judge_responses(const llm::CompletionRequest& request);

/// Replies with the last user message.
llm::StubHandler echo_stub();

enum class SimVariant { baseline, role, oracle, oracle_role };

struct IndexedItem {
    eval::BenchmarkSpec spec;
    eval::EvalItem item;
};

/// Zero-shot prompt text -> item, so a stub model can recognise what it was
/// asked.
class ItemIndex {
public:
    void add(const eval::BenchmarkSpec& spec, const std::vector<eval::EvalItem>& items);
    const IndexedItem* find(const std::string& prompt) const;
    std::size_t size() const { return items_.size(); }

private:
    std::map<std::string, IndexedItem> items_;
};

/// The role prefix the role variants put in front of a reply to `item`.
std::string sim_role_prefix(const eval::BenchmarkSpec& spec, const eval::EvalItem& item);
/// The same for an open-ended question; empty when the topic is unknown.
std::string sim_role_prefix(const std::string& question);

/// A synthetic model. On an indexed benchmark item it answers correctly with
/// a probability that depends on the benchmark and variant (the role variant
/// is right on a superset of the baseline's items); open-ended questions get
/// short canned prose. About one reply in a hundred has no extractable answer.
llm::StubHandler sim_model_stub(SimVariant variant, std::shared_ptr<const ItemIndex> index, std::uint64_t seed);

/// annotator, annotator-norefuse, judge-{longer,tie,first,refuse}, echo.
void install_default_stubs();

/// sim-lima, sim-role, oracle and oracle-role over `index`.
void install_sim_models(std::shared_ptr<const ItemIndex> index, std::uint64_t seed);

}  // namespace selfprompt::stubs
