#include "selfprompt/stubs.hpp"

#include <algorithm>

#include "selfprompt/demo_data.hpp"
#include "selfprompt/role_annotator.hpp"
#include "selfprompt/template_forge.hpp"

namespace selfprompt::stubs {

namespace {

const std::string* last_user(const llm::CompletionRequest& request) {
    for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
        if (it->role == llm::MessageRole::user) return &it->content;
    }
    return nullptr;
}

std::string quoted_question(const std::string& content) {
    std::vector<std::string> lines;
    for (const auto& line : text::split_lines(content)) {
        if (line.rfind("> ", 0) == 0) {
            lines.push_back(line.substr(2));
        } else if (line == ">") {
            lines.emplace_back();
        }
    }
    return text::join(lines, "\n");
}

std::string pick(const std::vector<std::string>& v, std::string_view key, std::uint64_t salt) {
    return v[demo::stable_hash(key, salt) % v.size()];
}

struct Persona {
    std::string summary;
    std::string role;
};

Persona benchmark_persona(const eval::BenchmarkSpec& spec, const eval::EvalItem& item) {
    if (spec.name == "mmlu") {
        for (const auto& d : demo::domains()) {
            if (d.name == item.category) {
                return {"This is a " + d.name + " question about " + item.subcategory, pick(d.roles, item.item_id, 5)};
            }
        }
        return {"This is a " + item.category + " question", "a subject expert"};
    }
    static const std::map<std::string, Persona> fixed = {
        {"csqa", {"This is a commonsense question about everyday places", "a well-travelled local guide"}},
        {"strategyqa", {"This is a reasoning question about expert claims", "a careful fact checker"}},
        {"truthfulqa", {"This is a question about common misconceptions", "a science journalist"}},
        {"openbookqa", {"This is an elementary science question", "a science teacher"}},
        {"humaneval", {"This is a programming task", "a Python developer"}},
        {"gsm8k", {"This is a math word problem", "a math teacher"}},
        {"date", {"This is a date arithmetic question", "a calendar expert"}},
    };
    auto it = fixed.find(spec.name);
    return it == fixed.end() ? Persona{"This is a general question", "a knowledgeable assistant"} : it->second;
}

std::string render_persona(const Persona& p) {
    annotate::RoleAnnotation ann;
    ann.question_summary = p.summary;
    ann.role_description = p.role;
    return forge::render_prefix(forge::builtin_template(forge::kDefaultTemplateId), ann) +
           std::string(forge::kPrefixSeparator);
}

std::string option_reply(char letter, const eval::EvalItem& item, std::uint64_t form) {
    const std::string l(1, letter);
    switch (form % 3) {
        case 0: return "The answer is " + l + ".";
        case 1: return "Answer: " + l;
        default: return l + ". " + item.options.at(letter);
    }
}

std::string sim_benchmark_reply(SimVariant variant, const IndexedItem& entry, std::uint64_t seed) {
    const auto& spec = entry.spec;
    const auto& item = entry.item;
    const bool oracle = variant == SimVariant::oracle || variant == SimVariant::oracle_role;
    const bool role = variant == SimVariant::role || variant == SimVariant::oracle_role;

    const double p_base = 0.40 + 0.20 * demo::stable_unit(spec.name, 17);
    const double p = variant == SimVariant::role ? p_base + 0.04 : p_base;
    const bool correct = oracle || demo::stable_unit(item.item_id, seed + 1000) < p;
    const bool unparseable = !oracle && demo::stable_unit(item.item_id, seed + 2000) < 0.01;
    const std::uint64_t h = demo::stable_hash(item.item_id, seed + 3000);

    std::string body;
    switch (spec.format.kind) {
        case eval::FormatKind::option_letters: {
            if (unparseable) {
                body = "hard to say without more context.";
                break;
            }
            const std::size_t n = item.options.size();
            const std::size_t gold = static_cast<std::size_t>(item.gold[0] - 'A');
            const std::size_t pick_idx = correct ? gold : (gold + 1 + h % (n - 1)) % n;
            body = option_reply(static_cast<char>('A' + pick_idx), item, h >> 8);
            break;
        }
        case eval::FormatKind::yes_no: {
            if (unparseable) {
                body = "it depends on how you read the claim.";
                break;
            }
            const bool yes = (item.gold == "yes") == correct;
            body = ((h >> 8) % 2 == 0) ? (yes ? "Yes." : "No.")
                                       : std::string("The answer is ") + (yes ? "yes" : "no") + ".";
            break;
        }
        case eval::FormatKind::number: {
            if (unparseable) {
                body = "cannot determine this from the information given.";
                break;
            }
            const long gold = std::stol(item.gold);
            const long value = correct ? gold : gold + 1 + static_cast<long>(h % 5);
            body = ((h >> 8) % 2 == 0) ? "Working it through step by step.\nThe answer is " + std::to_string(value) + "."
                                       : "#### " + std::to_string(value);
            break;
        }
        case eval::FormatKind::code: {
            std::string code = item.canonical_solution;
            if (!correct) {
                const auto pos = code.find("return ");
                if (pos != std::string::npos) code = code.substr(0, pos) + "return None\n";
            }
            body = "```python\n" + code + "```";
            break;
        }
    }
    return role ? render_persona(benchmark_persona(spec, item)) + body : body;
}

std::string sim_open_reply(SimVariant variant, const std::string& question, std::uint64_t seed) {
    static const std::vector<std::string> bank = {
        "Start with the basic definitions and make sure each term is clear.",
        "Work through one small example by hand before generalizing.",
        "Compare your result with a trusted reference to catch mistakes.",
        "Keep notes on what confused you so you can revisit it later.",
        "Explaining the idea to a friend is a quick way to test your understanding.",
        "Break the problem into smaller steps and check each one.",
        "Look for a real situation where the idea applies.",
        "Revisit the topic after a few days to make it stick.",
    };
    const auto hit = demo::find_topic(question);
    std::string body = hit ? "Here is how I would approach " + hit->topic + ". " : "Here is a short answer. ";
    const std::uint64_t h = demo::stable_hash(question, 7);
    body += bank[h % bank.size()] + " " + bank[(h / bank.size() + 1 + h % bank.size()) % bank.size()];
    const bool role = variant == SimVariant::role || variant == SimVariant::oracle_role;
    if (!role) return body;
    if (demo::stable_unit(question, seed + 4000) < 0.5) body += " A good next step is to try a small case on your own.";
    return sim_role_prefix(question) + body;
}

}  // namespace

llm::StubHandler annotator_stub(std::vector<std::string> refuse_on) {
    return [refuse_on = std::move(refuse_on)](const llm::CompletionRequest& req) {
        const std::string* user = last_user(req);
        const std::string question = user ? quoted_question(*user) : std::string{};
        for (const auto& trigger : refuse_on) {
            if (question.find(trigger) != std::string::npos) return llm::StubReply::text(kRefusalText);
        }
        const auto hit = demo::find_topic(question);
        if (!hit) return llm::StubReply::text("Summary: This is a general question\nRole: a knowledgeable assistant");
        return llm::StubReply::text("Summary: This is a " + hit->domain->name + " question about " + hit->topic +
                                    "\nRole: " + pick(hit->domain->roles, question, 3));
    };
}

JudgeKind judge_kind_from_string(const std::string& s) {
    if (s == "longer") return JudgeKind::longer;
    if (s == "tie") return JudgeKind::tie;
    if (s == "first") return JudgeKind::first;
    if (s == "refuse") return JudgeKind::refuse;
    throw ValidationError("unknown judge stub kind '" + s + "'");
}

std::optional<std::pair<std::string, std::string>> parse_judge_responses(const llm::CompletionRequest& request) {
    const std::string* user = last_user(request);
    if (!user) return std::nullopt;
    constexpr std::string_view kA = "\n\nResponse A:\n";
    constexpr std::string_view kB = "\n\nResponse B:\n";
    const auto a = user->find(kA);
    if (a == std::string::npos) return std::nullopt;
    const auto b = user->find(kB, a + kA.size());
    if (b == std::string::npos) return std::nullopt;
    return std::make_pair(user->substr(a + kA.size(), b - a - kA.size()), user->substr(b + kB.size()));
}

llm::StubHandler judge_stub(JudgeKind kind) {
    return [kind](const llm::CompletionRequest& req) {
        switch (kind) {
            case JudgeKind::tie: return llm::StubReply::text("Preference: Tie\nBoth are comparable.");
            case JudgeKind::first: return llm::StubReply::text("Preference: A\nThe first one reads better.");
            case JudgeKind::refuse: return llm::StubReply::text(kRefusalText);
            case JudgeKind::longer: break;
        }
        const auto pair = parse_judge_responses(req);
        if (!pair) return llm::StubReply::text("Unable to find two responses.");
        const auto la = pair->first.size();
        const auto lb = pair->second.size();
        if (la == lb) return llm::StubReply::text("Preference: Tie\nSame length.");
        return llm::StubReply::text(la > lb ? "Preference: A\nMore detailed." : "Preference: B\nMore detailed.");
    };
}

llm::StubHandler echo_stub() {
    return [](const llm::CompletionRequest& req) {
        const std::string* user = last_user(req);
        return llm::StubReply::text(user ? *user : std::string{});
    };
}

void ItemIndex::add(const eval::BenchmarkSpec& spec, const std::vector<eval::EvalItem>& items) {
    for (const auto& item : items) {
        const auto req = eval::build_zero_shot_prompt(item, spec);
        items_[req.messages.back().content] = {spec, item};
    }
}

const IndexedItem* ItemIndex::find(const std::string& prompt) const {
    auto it = items_.find(prompt);
    return it == items_.end() ? nullptr : &it->second;
}

std::string sim_role_prefix(const eval::BenchmarkSpec& spec, const eval::EvalItem& item) {
    return render_persona(benchmark_persona(spec, item));
}

std::string sim_role_prefix(const std::string& question) {
    const auto hit = demo::find_topic(question);
    if (!hit) return {};
    return render_persona({"This is a " + hit->domain->name + " question about " + hit->topic,
                           pick(hit->domain->roles, question, 3)});
}

llm::StubHandler sim_model_stub(SimVariant variant, std::shared_ptr<const ItemIndex> index, std::uint64_t seed) {
    return [variant, index = std::move(index), seed](const llm::CompletionRequest& req) {
        const std::string* user = last_user(req);
        if (!user) return llm::StubReply::text("");
        if (index) {
            if (const IndexedItem* entry = index->find(*user)) {
                return llm::StubReply::text(sim_benchmark_reply(variant, *entry, seed));
            }
        }
        return llm::StubReply::text(sim_open_reply(variant, *user, seed));
    };
}

void install_default_stubs() {
    auto& reg = llm::StubRegistry::instance();
    reg.add("annotator", annotator_stub(demo::refusal_triggers()));
    reg.add("annotator-norefuse", annotator_stub({}));
    reg.add("judge-longer", judge_stub(JudgeKind::longer));
    reg.add("judge-tie", judge_stub(JudgeKind::tie));
    reg.add("judge-first", judge_stub(JudgeKind::first));
    reg.add("judge-refuse", judge_stub(JudgeKind::refuse));
    reg.add("echo", echo_stub());
}

void install_sim_models(std::shared_ptr<const ItemIndex> index, std::uint64_t seed) {
    auto& reg = llm::StubRegistry::instance();
    reg.add("sim-lima", sim_model_stub(SimVariant::baseline, index, seed));
    reg.add("sim-role", sim_model_stub(SimVariant::role, index, seed));
    reg.add("oracle", sim_model_stub(SimVariant::oracle, index, seed));
    reg.add("oracle-role", sim_model_stub(SimVariant::oracle_role, index, seed));
}

}  // namespace selfprompt::stubs
