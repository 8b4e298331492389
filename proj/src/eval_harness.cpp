#include "selfprompt/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>

#include <json.hpp>

namespace selfprompt::eval {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string to_string(Metric m) {
    return m == Metric::accuracy ? "accuracy" : "pass_at_1";
}

namespace {

Metric metric_from_string(const std::string& s) {
    if (s == "accuracy") return Metric::accuracy;
    if (s == "pass_at_1") return Metric::pass_at_1;
    throw ValidationError("unknown metric '" + s + "'");
}

}  // namespace

const std::vector<BenchmarkSpec>& benchmark_specs() {
    static const std::vector<BenchmarkSpec> specs = {
        {"mmlu", 2000, AnswerFormat::options('D'), Metric::accuracy},
        {"csqa", 1221, AnswerFormat::options('E'), Metric::accuracy},
        {"strategyqa", 2290, AnswerFormat::yes_no(), Metric::accuracy},
        {"truthfulqa", 817, AnswerFormat::options('D'), Metric::accuracy},
        {"openbookqa", 500, AnswerFormat::options('D'), Metric::accuracy},
        {"humaneval", 164, AnswerFormat::code(), Metric::pass_at_1},
        {"gsm8k", 1319, AnswerFormat::number(), Metric::accuracy},
        {"date", 369, AnswerFormat::options('F'), Metric::accuracy},
    };
    return specs;
}

BenchmarkSpec benchmark_spec(const std::string& name) {
    for (const auto& s : benchmark_specs()) {
        if (s.name == name) return s;
    }
    std::vector<std::string> names;
    for (const auto& s : benchmark_specs()) names.push_back(s.name);
    throw ValidationError("unknown benchmark '" + name + "' (known: " + text::join(names, ", ") + ")");
}

void validate_item(const EvalItem& item, const BenchmarkSpec& spec) {
    const std::string where = spec.name + " item '" + item.item_id + "': ";
    if (text::is_blank(item.item_id)) throw ValidationError(spec.name + ": item without item_id");
    if (text::is_blank(item.question)) throw ValidationError(where + "empty question");
    const bool wants_options = spec.format.kind == FormatKind::option_letters;
    if (wants_options != !item.options.empty()) {
        throw ValidationError(where + (wants_options ? "options missing" : "unexpected options"));
    }
    switch (spec.format.kind) {
        case FormatKind::option_letters: {
            if (item.options.size() < 2) throw ValidationError(where + "fewer than two options");
            char expect = 'A';
            for (const auto& [letter, body] : item.options) {
                if (letter != expect++) throw ValidationError(where + "option letters must run A, B, C, ...");
                if (text::is_blank(body)) throw ValidationError(where + "empty option " + std::string(1, letter));
            }
            if (item.options.rbegin()->first > spec.format.max_letter) {
                throw ValidationError(where + "option beyond " + std::string(1, spec.format.max_letter));
            }
            if (item.gold.size() != 1 || !item.options.count(item.gold[0])) {
                throw ValidationError(where + "gold '" + item.gold + "' is not one of the options");
            }
            break;
        }
        case FormatKind::yes_no:
            if (item.gold != "yes" && item.gold != "no") throw ValidationError(where + "gold must be yes or no");
            break;
        case FormatKind::number:
            normalize_number(item.gold);
            break;
        case FormatKind::code:
            if (text::is_blank(item.gold)) throw ValidationError(where + "missing test code");
            if (text::is_blank(item.entry_point)) throw ValidationError(where + "missing entry_point");
            break;
    }
}

namespace {

EvalItem item_from_json(const json& j) {
    EvalItem item;
    item.item_id = j.at("item_id").get<std::string>();
    item.question = j.at("question").get<std::string>();
    if (j.contains("options") && !j["options"].is_null()) {
        for (const auto& [k, v] : j["options"].items()) {
            if (k.size() != 1) throw ValidationError("option key '" + k + "' is not a single letter");
            item.options[k[0]] = v.get<std::string>();
        }
    }
    const json& gold = j.at("gold");
    if (gold.is_boolean()) {
        item.gold = gold.get<bool>() ? "yes" : "no";
    } else if (gold.is_number()) {
        item.gold = normalize_number(gold.dump());
    } else {
        item.gold = gold.get<std::string>();
    }
    item.category = j.value("category", "");
    item.subcategory = j.value("subcategory", "");
    item.entry_point = j.value("entry_point", "");
    item.canonical_solution = j.value("canonical_solution", "");
    return item;
}

}  // namespace

std::string item_to_jsonl(const EvalItem& item) {
    json j;
    j["item_id"] = item.item_id;
    j["question"] = item.question;
    if (!item.options.empty()) {
        json o = json::object();
        for (const auto& [k, v] : item.options) o[std::string(1, k)] = v;
        j["options"] = o;
    }
    j["gold"] = item.gold;
    if (!item.category.empty()) j["category"] = item.category;
    if (!item.subcategory.empty()) j["subcategory"] = item.subcategory;
    if (!item.entry_point.empty()) j["entry_point"] = item.entry_point;
    if (!item.canonical_solution.empty()) j["canonical_solution"] = item.canonical_solution;
    return j.dump();
}

std::vector<EvalItem> load_items(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<EvalItem> items;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::is_blank(line)) continue;
        try {
            items.push_back(item_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return items;
}

void save_items(const std::vector<EvalItem>& items, const fs::path& path) {
    std::string out;
    for (const auto& item : items) out += item_to_jsonl(item) + "\n";
    write_file(path, out);
}

LoadedBenchmark load_benchmark(const fs::path& source, const std::string& name) {
    LoadedBenchmark b;
    b.spec = benchmark_spec(name);
    const fs::path path = fs::is_directory(source) ? source / (name + ".jsonl") : source;
    if (!fs::exists(path)) throw IoError("benchmark file not found: " + path.string());
    b.items = load_items(path);
    std::set<std::string> seen;
    for (const auto& item : b.items) {
        validate_item(item, b.spec);
        if (!seen.insert(item.item_id).second) {
            throw ValidationError(name + ": duplicate item_id '" + item.item_id + "'");
        }
    }
    if (b.items.size() != b.spec.n_items) {
        b.warnings.push_back(name + ": expected " + std::to_string(b.spec.n_items) + " items, found " +
                             std::to_string(b.items.size()));
    }
    return b;
}

std::vector<EvalItem> sample_mmlu_balanced(const std::vector<EvalItem>& pool, std::size_t n, std::uint64_t seed,
                                           std::size_t n_categories) {
    if (n_categories == 0 || n % n_categories != 0) {
        throw ValidationError("sample size " + std::to_string(n) + " is not divisible by " +
                              std::to_string(n_categories) + " categories");
    }
    std::map<std::string, std::vector<const EvalItem*>> by_category;
    for (const auto& item : pool) {
        if (item.category.empty()) throw ValidationError("item '" + item.item_id + "' has no category");
        by_category[item.category].push_back(&item);
    }
    if (by_category.size() != n_categories) {
        throw ValidationError("pool has " + std::to_string(by_category.size()) + " categories, expected " +
                              std::to_string(n_categories));
    }
    const std::size_t per = n / n_categories;
    std::vector<EvalItem> out;
    out.reserve(n);
    SeededRng rng(seed);
    for (auto& [category, items] : by_category) {
        if (items.size() < per) {
            throw ValidationError("category '" + category + "' has " + std::to_string(items.size()) +
                                  " items, need " + std::to_string(per));
        }
        std::sort(items.begin(), items.end(),
                  [](const EvalItem* a, const EvalItem* b) { return a->item_id < b->item_id; });
        rng.shuffle(items);
        for (std::size_t i = 0; i < per; ++i) out.push_back(*items[i]);
    }
    std::sort(out.begin(), out.end(), [](const EvalItem& a, const EvalItem& b) { return a.item_id < b.item_id; });
    return out;
}

llm::CompletionRequest build_zero_shot_prompt(const EvalItem& item, const BenchmarkSpec& spec,
                                              const std::string& model, int max_tokens) {
    std::string body = text::trim(item.question);
    switch (spec.format.kind) {
        case FormatKind::option_letters: {
            body += "\n\n";
            for (const auto& [letter, option] : item.options) body += std::string(1, letter) + ". " + option + "\n";
            const char last = item.options.rbegin()->first;
            body += "\nAnswer with the letter of the correct option (A-" + std::string(1, last) + ").";
            break;
        }
        case FormatKind::yes_no:
            body += "\n\nAnswer yes or no.";
            break;
        case FormatKind::number:
            body += "\n\nGive the final numeric answer on the last line as \"The answer is N.\"";
            break;
        case FormatKind::code:
            body += "\n\nComplete the function above. Reply with the full Python code in one fenced code block.";
            break;
    }
    llm::CompletionRequest req;
    req.model = model;
    req.messages = {{llm::MessageRole::user, body}};
    req.temperature = 0.0;
    req.max_tokens = max_tokens;
    return req;
}

double recompute_metric(const EvalReport& report) {
    if (report.predictions.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& p : report.predictions) correct += p.correct.value_or(false) ? 1 : 0;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(report.predictions.size());
}

namespace {

double failure_rate(const std::vector<Prediction>& preds) {
    if (preds.empty()) return 0.0;
    std::size_t failed = 0;
    for (const auto& p : preds) failed += p.extraction_failed ? 1 : 0;
    return static_cast<double>(failed) / static_cast<double>(preds.size());
}

json prediction_to_json(const Prediction& p) {
    json j;
    j["item_id"] = p.item_id;
    j["raw_output"] = p.raw_output;
    j["extracted"] = p.extracted ? json(*p.extracted) : json(nullptr);
    j["correct"] = p.correct ? json(*p.correct) : json(nullptr);
    j["extraction_failed"] = p.extraction_failed;
    if (!p.note.empty()) j["note"] = p.note;
    if (!p.category.empty()) j["category"] = p.category;
    if (!p.subcategory.empty()) j["subcategory"] = p.subcategory;
    return j;
}

Prediction prediction_from_json(const json& j) {
    Prediction p;
    p.item_id = j.at("item_id").get<std::string>();
    p.raw_output = j.at("raw_output").get<std::string>();
    if (!j.at("extracted").is_null()) p.extracted = j["extracted"].get<std::string>();
    if (!j.at("correct").is_null()) p.correct = j["correct"].get<bool>();
    p.extraction_failed = j.at("extraction_failed").get<bool>();
    p.note = j.value("note", "");
    p.category = j.value("category", "");
    p.subcategory = j.value("subcategory", "");
    return p;
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
    json j;
    j["benchmark"] = r.benchmark;
    j["model"] = r.model;
    j["seed"] = r.seed;
    j["template_id"] = r.template_id ? json(*r.template_id) : json(nullptr);
    j["metric_kind"] = to_string(r.metric_kind);
    j["metric"] = r.metric;
    j["n_scored"] = r.predictions.size();
    j["extraction_failure_rate"] = r.extraction_failure_rate;
    j["skipped"] = r.skipped;
    j["note"] = r.note;
    j["excluded"] = json::array();
    for (const auto& e : r.excluded) j["excluded"].push_back({{"item_id", e.item_id}, {"error", e.error}});
    j["predictions"] = json::array();
    for (const auto& p : r.predictions) j["predictions"].push_back(prediction_to_json(p));
    return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& json_text) {
    try {
        const json j = json::parse(json_text);
        EvalReport r;
        r.benchmark = j.at("benchmark").get<std::string>();
        r.model = j.at("model").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        if (!j.at("template_id").is_null()) r.template_id = j["template_id"].get<int>();
        r.metric_kind = metric_from_string(j.at("metric_kind").get<std::string>());
        r.metric = j.at("metric").get<double>();
        r.extraction_failure_rate = j.at("extraction_failure_rate").get<double>();
        r.skipped = j.at("skipped").get<bool>();
        r.note = j.at("note").get<std::string>();
        for (const auto& e : j.at("excluded")) {
            r.excluded.push_back({e.at("item_id").get<std::string>(), e.at("error").get<std::string>()});
        }
        for (const auto& p : j.at("predictions")) r.predictions.push_back(prediction_from_json(p));
        return r;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed eval report: ") + e.what());
    }
}

CodeScore score_code(const std::string& candidate, const EvalItem& item, const SandboxConfig& sandbox) {
    static std::mutex mu;
    static std::map<std::string, CodeScore> memo;
    const std::string program = humaneval_program(candidate, item.gold, item.entry_point);
    const std::string key = sha256_hex(program) + "|" + std::to_string(sandbox.timeout.count()) + "|" +
                            sandbox.python + "|" + (sandbox.require_isolation ? "1" : "0");
    {
        std::lock_guard lock(mu);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
    }
    const SandboxResult r = run_python(program, sandbox);
    CodeScore score;
    score.passed = r.passed;
    score.timed_out = r.timed_out;
    if (r.timed_out) {
        score.note = "timeout";
    } else if (!r.passed) {
        score.note = "failed (exit " + std::to_string(r.exit_code) + ")";
    }
    std::lock_guard lock(mu);
    memo.emplace(key, score);
    return score;
}

EvalReport run_eval(llm::LlmClient& client, const LoadedBenchmark& benchmark, const EvalConfig& config) {
    const BenchmarkSpec& spec = benchmark.spec;
    EvalReport report;
    report.benchmark = spec.name;
    report.model = config.model;
    report.seed = config.seed;
    report.template_id = config.template_id;
    report.metric_kind = spec.metric;

    if (spec.format.kind == FormatKind::code && !sandbox_available(config.sandbox)) {
        report.skipped = true;
        report.note = "code sandbox unavailable (process or network isolation failed); benchmark skipped";
        return report;
    }

    std::map<std::string, Prediction> done;
    if (config.checkpoint && config.resume && fs::exists(*config.checkpoint)) {
        std::ifstream in(*config.checkpoint);
        std::string line;
        while (std::getline(in, line)) {
            if (text::is_blank(line)) continue;
            try {
                Prediction p = prediction_from_json(json::parse(line));
                done[p.item_id] = std::move(p);
            } catch (const std::exception&) {
                // A torn final line from an interrupted run; the item is redone.
            }
        }
    }
    std::ofstream checkpoint;
    if (config.checkpoint) {
        if (config.checkpoint->has_parent_path()) fs::create_directories(config.checkpoint->parent_path());
        checkpoint.open(*config.checkpoint, config.resume ? std::ios::app : std::ios::trunc);
        if (!checkpoint) throw IoError("cannot write checkpoint " + config.checkpoint->string());
    }

    std::vector<const EvalItem*> todo;
    for (const auto& item : benchmark.items) {
        if (!done.count(item.item_id)) todo.push_back(&item);
    }

    const std::size_t chunk = std::max<std::size_t>(1, config.chunk_size);
    for (std::size_t start = 0; start < todo.size(); start += chunk) {
        const std::size_t end = std::min(todo.size(), start + chunk);
        std::map<std::string, llm::CompletionRequest> requests;
        for (std::size_t i = start; i < end; ++i) {
            llm::CompletionRequest req = build_zero_shot_prompt(*todo[i], spec, config.model, config.max_tokens);
            req.temperature = 0.0;
            requests.emplace(todo[i]->item_id, std::move(req));
        }
        const llm::BatchResult results = client.complete_batch(requests);
        for (std::size_t i = start; i < end; ++i) {
            const EvalItem& item = *todo[i];
            const llm::BatchOutcome& outcome = results.at(item.item_id);
            if (!outcome.ok()) {
                report.excluded.push_back({item.item_id, outcome.error});
                continue;
            }
            Prediction p;
            p.item_id = item.item_id;
            p.raw_output = outcome.response->content;
            p.category = item.category;
            p.subcategory = item.subcategory;
            p.extracted = extract_answer(p.raw_output, spec.format);
            if (!p.extracted) {
                p.extraction_failed = true;
                p.correct = false;
            } else if (spec.format.kind == FormatKind::code) {
                const CodeScore s = score_code(*p.extracted, item, config.sandbox);
                p.correct = s.passed;
                p.note = s.note;
            } else {
                p.correct = answers_match(*p.extracted, item.gold, spec.format);
            }
            if (checkpoint.is_open()) checkpoint << prediction_to_json(p).dump() << "\n" << std::flush;
            done[p.item_id] = std::move(p);
        }
    }

    for (auto& [id, p] : done) report.predictions.push_back(std::move(p));
    std::sort(report.excluded.begin(), report.excluded.end(),
              [](const ExcludedItem& a, const ExcludedItem& b) { return a.item_id < b.item_id; });
    report.metric = recompute_metric(report);
    report.extraction_failure_rate = failure_rate(report.predictions);
    if (!report.excluded.empty()) {
        report.note = std::to_string(report.excluded.size()) + " item(s) excluded after transport failures";
    }
    return report;
}

SeedAggregate aggregate_seeds(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw ValidationError("aggregate_seeds needs at least one report");
    SeedAggregate agg;
    agg.benchmark = reports.front().benchmark;
    agg.model = reports.front().model;
    std::set<std::uint64_t> seeds;
    double sum = 0.0;
    for (const auto& r : reports) {
        if (r.benchmark != agg.benchmark) {
            throw ValidationError("mixed benchmarks in aggregation: " + agg.benchmark + " and " + r.benchmark);
        }
        if (r.model != agg.model) throw ValidationError("mixed models in aggregation: " + agg.model + " and " + r.model);
        if (!seeds.insert(r.seed).second) {
            throw ValidationError("seed " + std::to_string(r.seed) + " appears twice for " + agg.benchmark);
        }
        agg.seeds.push_back(r.seed);
        agg.values.push_back(r.metric);
        sum += r.metric;
    }
    agg.mean = sum / static_cast<double>(reports.size());
    if (reports.size() == 1) {
        agg.warnings.push_back(agg.model + "/" + agg.benchmark + ": single seed, value passed through unaveraged");
    }
    return agg;
}

std::size_t best_average(const std::vector<ResultsRow>& rows) {
    if (rows.empty()) throw ValidationError("no rows to choose from");
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].avg > rows[best].avg) best = i;
    }
    return best;
}

ResultsTable build_results_table(const std::map<std::string, std::vector<EvalReport>>& reports_by_model) {
    ResultsTable table;
    if (reports_by_model.empty()) throw ValidationError("no reports to tabulate");
    std::optional<std::set<std::string>> expected;
    for (const auto& [model, reports] : reports_by_model) {
        std::map<std::string, std::vector<EvalReport>> by_bench;
        std::set<std::string> covered;
        for (const auto& r : reports) {
            covered.insert(r.benchmark);
            if (r.skipped) {
                table.notes.push_back(model + "/" + r.benchmark + " seed " + std::to_string(r.seed) +
                                      " skipped: " + r.note);
                continue;
            }
            by_bench[r.benchmark].push_back(r);
        }
        if (!expected) {
            expected = covered;
        } else if (*expected != covered) {
            throw ValidationError("model '" + model + "' covers a different benchmark set");
        }
        ResultsRow row;
        row.model = model;
        double sum = 0.0;
        for (const auto& [bench, rs] : by_bench) {
            SeedAggregate agg = aggregate_seeds(rs);
            row.values[bench] = agg.mean;
            sum += agg.mean;
            for (auto& w : agg.warnings) table.notes.push_back(std::move(w));
        }
        row.avg = by_bench.empty() ? 0.0 : sum / static_cast<double>(by_bench.size());
        table.rows.push_back(std::move(row));
    }
    for (const auto& spec : benchmark_specs()) {
        if (expected->count(spec.name)) table.benchmarks.push_back(spec.name);
    }
    for (const auto& name : *expected) {
        if (std::find(table.benchmarks.begin(), table.benchmarks.end(), name) == table.benchmarks.end()) {
            table.benchmarks.push_back(name);
        }
    }
    table.rows[best_average(table.rows)].best = true;
    return table;
}

namespace {

std::string column_label(const std::string& bench) {
    static const std::map<std::string, std::string> labels = {
        {"mmlu", "MMLU"},         {"csqa", "CSQA"},           {"strategyqa", "Strategy"}, {"truthfulqa", "Truthful"},
        {"openbookqa", "OpenBook"}, {"humaneval", "HumanEval"}, {"gsm8k", "GSM8K"},         {"date", "Date"},
    };
    auto it = labels.find(bench);
    return it == labels.end() ? bench : it->second;
}

std::string fixed1(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << v;
    return os.str();
}

}  // namespace

std::string results_table_markdown(const ResultsTable& table) {
    std::string out = "| Model |";
    for (const auto& b : table.benchmarks) out += " " + column_label(b) + " |";
    out += " AVG |\n|---|";
    for (std::size_t i = 0; i < table.benchmarks.size(); ++i) out += "---|";
    out += "---|\n";
    for (const auto& row : table.rows) {
        out += "| " + row.model + (row.best ? " (best)" : "") + " |";
        for (const auto& b : table.benchmarks) {
            auto it = row.values.find(b);
            out += " " + (it == row.values.end() ? std::string("skipped") : fixed1(it->second)) + " |";
        }
        out += " " + fixed1(row.avg) + " |\n";
    }
    return out;
}

DomainBreakdown mmlu_domain_breakdown(const EvalReport& report) {
    std::map<std::string, DomainCell> cats;
    std::map<std::pair<std::string, std::string>, DomainCell> subs;
    DomainBreakdown out;
    for (const auto& p : report.predictions) {
        if (p.category.empty()) throw ValidationError("prediction '" + p.item_id + "' has no category");
        const std::size_t hit = p.correct.value_or(false) ? 1 : 0;
        auto& c = cats[p.category];
        c.name = p.category;
        c.n += 1;
        c.correct += hit;
        if (!p.subcategory.empty()) {
            auto& s = subs[{p.category, p.subcategory}];
            s.name = p.subcategory;
            s.parent = p.category;
            s.n += 1;
            s.correct += hit;
        }
        ++out.total;
    }
    auto finish = [](DomainCell c) {
        c.accuracy = c.n == 0 ? 0.0 : 100.0 * static_cast<double>(c.correct) / static_cast<double>(c.n);
        return c;
    };
    for (const auto& [k, c] : cats) out.categories.push_back(finish(c));
    for (const auto& [k, c] : subs) out.subcategories.push_back(finish(c));
    return out;
}

DomainBreakdown mean_breakdown(const std::vector<DomainBreakdown>& parts) {
    if (parts.empty()) throw ValidationError("no breakdowns to average");
    auto merge = [&](auto member) {
        std::map<std::pair<std::string, std::string>, DomainCell> cells;
        std::map<std::pair<std::string, std::string>, double> acc_sum;
        std::map<std::pair<std::string, std::string>, std::size_t> seen;
        for (const auto& part : parts) {
            for (const auto& c : part.*member) {
                const auto key = std::make_pair(c.parent, c.name);
                auto& cell = cells[key];
                cell.name = c.name;
                cell.parent = c.parent;
                cell.n += c.n;
                cell.correct += c.correct;
                acc_sum[key] += c.accuracy;
                seen[key] += 1;
            }
        }
        std::vector<DomainCell> out;
        for (auto& [key, cell] : cells) {
            cell.accuracy = acc_sum[key] / static_cast<double>(seen[key]);
            out.push_back(cell);
        }
        return out;
    };
    DomainBreakdown out;
    out.categories = merge(&DomainBreakdown::categories);
    out.subcategories = merge(&DomainBreakdown::subcategories);
    for (const auto& p : parts) out.total += p.total;
    return out;
}

DomainComparison compare_domains(const DomainBreakdown& a, const DomainBreakdown& b) {
    std::map<std::string, double> bmap;
    for (const auto& c : b.categories) bmap[c.name] = c.accuracy;
    DomainComparison cmp;
    for (const auto& c : a.categories) {
        auto it = bmap.find(c.name);
        if (it == bmap.end()) throw ValidationError("category '" + c.name + "' missing from the second breakdown");
        cmp.rows.push_back({c.name, c.accuracy, it->second});
        if (c.accuracy > it->second) {
            ++cmp.wins_a;
        } else if (c.accuracy < it->second) {
            ++cmp.wins_b;
        } else {
            ++cmp.ties;
        }
    }
    if (cmp.rows.size() != b.categories.size()) throw ValidationError("breakdowns cover different categories");
    return cmp;
}

}  // namespace selfprompt::eval
