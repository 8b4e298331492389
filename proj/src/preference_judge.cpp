#include "selfprompt/preference_judge.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

#include <json.hpp>

namespace selfprompt::judge {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

StripResult strip_role_prefix(const std::string& response, const std::vector<forge::PromptTemplate>& templates) {
    StripResult out;
    out.match = forge::match_prefix(response, templates);
    if (!out.match) {
        out.text = response;
        return out;
    }
    out.text = text::trim(std::string_view(response).substr(out.match->length));
    if (out.text.empty()) out.warning = "response consists only of a role-play prefix";
    return out;
}

PairwiseCase PairwiseCase::swapped() const {
    PairwiseCase c = *this;
    std::swap(c.response_a, c.response_b);
    std::swap(c.system_a, c.system_b);
    c.order_swapped = !order_swapped;
    return c;
}

llm::CompletionRequest build_judge_prompt(const PairwiseCase& c, const JudgePromptConfig& config) {
    llm::CompletionRequest req;
    req.model = config.model;
    req.temperature = 0.0;
    req.max_tokens = config.max_tokens;
    req.messages.push_back({llm::MessageRole::system, config.instructions});
    req.messages.push_back({llm::MessageRole::user, "Question:\n" + text::trim(c.question) + "\n\nResponse A:\n" +
                                                        c.response_a + "\n\nResponse B:\n" + c.response_b});
    return req;
}

std::string judge_visible_text(const llm::CompletionRequest& request) {
    std::string out;
    for (const auto& m : request.messages) out += m.content + "\n";
    return out;
}

std::string to_string(Preference p) {
    switch (p) {
        case Preference::a: return "a";
        case Preference::b: return "b";
        case Preference::tie: return "tie";
    }
    return "tie";
}

std::string to_string(Winner w) {
    switch (w) {
        case Winner::a: return "a";
        case Winner::b: return "b";
        case Winner::tie: return "tie";
        case Winner::unjudged: return "unjudged";
    }
    return "unjudged";
}

namespace {

std::optional<Preference> preference_from_string(const std::string& s) {
    if (s == "a") return Preference::a;
    if (s == "b") return Preference::b;
    if (s == "tie") return Preference::tie;
    return std::nullopt;
}

Winner winner_from_string(const std::string& s) {
    if (s == "a") return Winner::a;
    if (s == "b") return Winner::b;
    if (s == "tie") return Winner::tie;
    if (s == "unjudged") return Winner::unjudged;
    throw ValidationError("unknown winner '" + s + "'");
}

Preference flip(Preference p) {
    if (p == Preference::a) return Preference::b;
    if (p == Preference::b) return Preference::a;
    return p;
}

}  // namespace

std::optional<Preference> parse_preference(const std::string& reply) {
    static const std::regex re(R"(preference\s*[:=]\s*\**\s*\[?\s*(a|b|tie)\b)", std::regex::icase);
    std::smatch m;
    if (!std::regex_search(reply, m, re)) return std::nullopt;
    const std::string v = text::to_lower(m[1].str());
    return preference_from_string(v);
}

Verdict resolve_verdict(const std::string& question_id, std::optional<Preference> first,
                        std::optional<Preference> swapped_back) {
    Verdict v;
    v.question_id = question_id;
    v.first_verdict = first;
    v.swapped_verdict = swapped_back;
    if (!first || !swapped_back) {
        v.winner = Winner::unjudged;
        v.note = "judge reply could not be parsed";
        return v;
    }
    v.resolved = *first == *swapped_back;
    if (!v.resolved) {
        v.winner = Winner::tie;
        v.note = "orders disagree";
        return v;
    }
    switch (*first) {
        case Preference::a: v.winner = Winner::a; break;
        case Preference::b: v.winner = Winner::b; break;
        case Preference::tie: v.winner = Winner::tie; break;
    }
    return v;
}

VerdictTally tally(const std::vector<Verdict>& verdicts) {
    VerdictTally t;
    for (const auto& v : verdicts) {
        switch (v.winner) {
            case Winner::a: ++t.wins_a; break;
            case Winner::b: ++t.wins_b; break;
            case Winner::tie: ++t.ties; break;
            case Winner::unjudged: ++t.unjudged; break;
        }
    }
    return t;
}

std::vector<std::string> blinding_violations(const std::string& visible, const std::vector<std::string>& forbidden) {
    std::vector<std::string> out;
    for (const auto& f : forbidden) {
        if (!f.empty() && visible.find(f) != std::string::npos) out.push_back(f);
    }
    return out;
}

JudgeRun judge_cases(llm::LlmClient& judge, const std::vector<PairwiseCase>& cases, const JudgeRunConfig& config) {
    JudgeRun run;
    if (!cases.empty()) {
        run.system_a = cases.front().system_a;
        run.system_b = cases.front().system_b;
    }
    std::vector<std::string> forbidden = forge::junction_phrases(config.templates);
    forbidden.insert(forbidden.end(), config.forbidden.begin(), config.forbidden.end());

    std::map<std::string, llm::CompletionRequest> requests;
    std::map<std::string, std::string> blocked;
    for (const auto& c : cases) {
        std::vector<std::string> case_forbidden = forbidden;
        case_forbidden.push_back(c.system_a);
        case_forbidden.push_back(c.system_b);
        const PairwiseCase orders[2] = {c, c.swapped()};
        for (int k = 0; k < 2; ++k) {
            const PairwiseCase& shown = orders[k];
            llm::CompletionRequest req = build_judge_prompt(shown, config.prompt);
            auto hits = blinding_violations(judge_visible_text(req), case_forbidden);
            if (!hits.empty()) {
                blocked[c.question_id] = "blinding check failed: judge-visible text contains '" + hits.front() + "'";
                break;
            }
            requests.emplace(c.question_id + (k == 0 ? "#first" : "#swapped"), std::move(req));
        }
    }
    for (const auto& [id, why] : blocked) {
        requests.erase(id + "#first");
        requests.erase(id + "#swapped");
    }

    const llm::BatchResult results = judge.complete_batch(requests);
    auto read = [&](const std::string& key) -> std::optional<Preference> {
        auto it = results.find(key);
        if (it == results.end() || !it->second.ok()) return std::nullopt;
        return parse_preference(it->second.response->content);
    };

    for (const auto& c : cases) {
        Verdict v;
        if (auto it = blocked.find(c.question_id); it != blocked.end()) {
            v.question_id = c.question_id;
            v.winner = Winner::unjudged;
            v.note = it->second;
            run.warnings.push_back(c.question_id + ": " + it->second);
        } else {
            std::optional<Preference> first = read(c.question_id + "#first");
            std::optional<Preference> second = read(c.question_id + "#swapped");
            if (second) second = flip(*second);
            v = resolve_verdict(c.question_id, first, second);
            auto failed = [&](const std::string& key) {
                auto it = results.find(key);
                return it != results.end() && !it->second.ok() ? it->second.error : std::string();
            };
            const std::string err = failed(c.question_id + "#first") + failed(c.question_id + "#swapped");
            if (!err.empty()) v.note = "judge request failed: " + err;
            if (v.winner == Winner::unjudged) run.warnings.push_back(c.question_id + ": unjudged (" + v.note + ")");
        }
        run.verdicts.push_back(std::move(v));
    }
    std::sort(run.verdicts.begin(), run.verdicts.end(),
              [](const Verdict& a, const Verdict& b) { return a.question_id < b.question_id; });
    run.tally = tally(run.verdicts);
    return run;
}

std::vector<TestQuestion> load_test_questions(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<TestQuestion> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::is_blank(line)) continue;
        try {
            const json j = json::parse(line);
            out.push_back({j.at("question_id").get<std::string>(), j.at("question").get<std::string>()});
        } catch (const json::exception& e) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void save_test_questions(const std::vector<TestQuestion>& questions, const fs::path& path) {
    std::string out;
    for (const auto& q : questions) out += json{{"question_id", q.question_id}, {"question", q.question}}.dump() + "\n";
    write_file(path, out);
}

ResponseSet generate_responses(llm::LlmClient& model, const std::vector<TestQuestion>& questions,
                               const std::string& model_name, std::vector<std::string>& warnings) {
    std::map<std::string, llm::CompletionRequest> requests;
    for (const auto& q : questions) {
        llm::CompletionRequest req;
        req.model = model_name;
        req.temperature = 0.0;
        req.messages = {{llm::MessageRole::user, q.question}};
        requests.emplace(q.question_id, std::move(req));
    }
    ResponseSet out;
    for (const auto& [id, outcome] : model.complete_batch(requests)) {
        if (outcome.ok()) {
            out[id] = outcome.response->content;
        } else {
            warnings.push_back(model_name + " failed on " + id + ": " + outcome.error);
        }
    }
    return out;
}

std::string responses_jsonl(const ResponseSet& responses) {
    std::string out;
    for (const auto& [id, r] : responses) out += json{{"question_id", id}, {"response", r}}.dump() + "\n";
    return out;
}

ResponseSet load_responses(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    ResponseSet out;
    std::string line;
    while (std::getline(in, line)) {
        if (text::is_blank(line)) continue;
        try {
            const json j = json::parse(line);
            out[j.at("question_id").get<std::string>()] = j.at("response").get<std::string>();
        } catch (const json::exception& e) {
            throw IoError(path.string() + ": " + e.what());
        }
    }
    return out;
}

std::vector<PairwiseCase> build_cases(const std::vector<TestQuestion>& questions, const ResponseSet& a,
                                      const ResponseSet& b, const std::string& system_a,
                                      const std::string& system_b, const std::vector<forge::PromptTemplate>& templates,
                                      std::vector<std::string>& warnings) {
    std::vector<PairwiseCase> cases;
    for (const auto& q : questions) {
        auto ia = a.find(q.question_id);
        auto ib = b.find(q.question_id);
        if (ia == a.end() || ib == b.end()) {
            warnings.push_back(q.question_id + ": missing response, case skipped");
            continue;
        }
        const StripResult sa = strip_role_prefix(ia->second, templates);
        const StripResult sb = strip_role_prefix(ib->second, templates);
        if (!sa.warning.empty()) warnings.push_back(q.question_id + " (" + system_a + "): " + sa.warning);
        if (!sb.warning.empty()) warnings.push_back(q.question_id + " (" + system_b + "): " + sb.warning);
        cases.push_back({q.question_id, q.question, sa.text, sb.text, system_a, system_b, false});
    }
    return cases;
}

JudgeRun judge_testset(llm::LlmClient& model_a, llm::LlmClient& model_b, llm::LlmClient& judge,
                       const std::vector<TestQuestion>& questions, const std::string& system_a,
                       const std::string& system_b, const JudgeRunConfig& config) {
    std::vector<std::string> warnings;
    const ResponseSet ra = generate_responses(model_a, questions, system_a, warnings);
    const ResponseSet rb = generate_responses(model_b, questions, system_b, warnings);
    const auto cases = build_cases(questions, ra, rb, system_a, system_b, config.templates, warnings);
    JudgeRun run = judge_cases(judge, cases, config);
    run.system_a = system_a;
    run.system_b = system_b;
    warnings.insert(warnings.end(), run.warnings.begin(), run.warnings.end());
    run.warnings = std::move(warnings);
    return run;
}

std::string verdicts_jsonl(const JudgeRun& run) {
    std::string out;
    auto pref = [](const std::optional<Preference>& p) { return p ? json(to_string(*p)) : json("unparsed"); };
    for (const auto& v : run.verdicts) {
        json j;
        j["question_id"] = v.question_id;
        j["winner"] = to_string(v.winner);
        j["first_verdict"] = pref(v.first_verdict);
        j["swapped_verdict"] = pref(v.swapped_verdict);
        j["resolved"] = v.resolved;
        if (!v.note.empty()) j["note"] = v.note;
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<Verdict> load_verdicts(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open verdicts file " + path.string());
    std::vector<Verdict> out;
    std::string line;
    while (std::getline(in, line)) {
        if (text::is_blank(line)) continue;
        try {
            const json j = json::parse(line);
            Verdict v;
            v.question_id = j.at("question_id").get<std::string>();
            v.winner = winner_from_string(j.at("winner").get<std::string>());
            v.first_verdict = preference_from_string(j.value("first_verdict", ""));
            v.swapped_verdict = preference_from_string(j.value("swapped_verdict", ""));
            v.resolved = j.at("resolved").get<bool>();
            v.note = j.value("note", "");
            out.push_back(std::move(v));
        } catch (const json::exception& e) {
            throw IoError(path.string() + ": " + e.what());
        }
    }
    return out;
}

namespace {

double percent(std::size_t part, std::size_t whole) {
    if (whole == 0) return 0.0;
    return std::round(1000.0 * static_cast<double>(part) / static_cast<double>(whole)) / 10.0;
}

}  // namespace

std::string summary_json(const JudgeRun& run) {
    const VerdictTally& t = run.tally;
    json j;
    j["system_a"] = run.system_a;
    j["system_b"] = run.system_b;
    j["total"] = t.total();
    j["judged"] = t.judged();
    j["wins_a"] = t.wins_a;
    j["wins_b"] = t.wins_b;
    j["ties"] = t.ties;
    j["unjudged"] = t.unjudged;
    j["percent"] = {
        {"a_wins", percent(t.wins_a, t.judged())},
        {"tie", percent(t.ties, t.judged())},
        {"b_wins", percent(t.wins_b, t.judged())},
    };
    std::size_t resolved = 0;
    for (const auto& v : run.verdicts) resolved += v.resolved ? 1 : 0;
    j["order_agreement"] = resolved;
    j["unjudged_ids"] = json::array();
    for (const auto& v : run.verdicts) {
        if (v.winner == Winner::unjudged) j["unjudged_ids"].push_back(v.question_id);
    }
    return j.dump(2) + "\n";
}

std::string plot_csv(const JudgeRun& run) {
    const VerdictTally& t = run.tally;
    std::ostringstream os;
    os << std::fixed << std::setprecision(1);
    os << "outcome,count,percent\n";
    os << run.system_a << " wins," << t.wins_a << "," << percent(t.wins_a, t.judged()) << "\n";
    os << "tie," << t.ties << "," << percent(t.ties, t.judged()) << "\n";
    os << run.system_b << " wins," << t.wins_b << "," << percent(t.wins_b, t.judged()) << "\n";
    return os.str();
}

}  // namespace selfprompt::judge
