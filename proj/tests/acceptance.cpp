// Acceptance checks, one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

#include "extraction_corpus.hpp"
#include "metric_oracle.hpp"
#include "selfprompt/demo_data.hpp"
#include "selfprompt/finetune_driver.hpp"
#include "selfprompt/pipeline.hpp"
#include "selfprompt/preference_judge.hpp"
#include "selfprompt/role_annotator.hpp"
#include "selfprompt/stubs.hpp"
#include "selfprompt/template_forge.hpp"
#include "selfprompt/toy_finetune.hpp"

using namespace selfprompt;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("selfprompt-acceptance-" + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

llm::LlmClient stub_client(llm::StubHandler h) {
    llm::ClientConfig c;
    c.endpoint = "stub:acceptance";
    c.max_retries = 0;
    return llm::LlmClient(c, std::make_shared<llm::StubTransport>(std::move(h)));
}

annotate::AnnotationMap annotate_standin(const corpus::InstructionDataset& ds, annotate::AnnotationResult* raw = nullptr) {
    auto client = stub_client(stubs::annotator_stub(demo::refusal_triggers()));
    auto result = annotate::annotate_dataset(ds, client);
    if (raw) *raw = result;
    return annotate::collect_annotations(result);
}

Outcome criterion1() {
    const auto start = Clock::now();
    const auto ds = demo::make_lima_standin(50);
    annotate::AnnotationResult raw;
    const auto anns = annotate_standin(ds, &raw);
    const auto role_ds = forge::assemble_role_dataset(ds, anns, forge::builtin_template(8));
    std::size_t fallback = 0;
    std::set<std::string> refused_ids;
    for (const auto& [id, a] : anns) {
        if (a.role_description == annotate::kDefaultFallbackRole) ++fallback;
        if (a.refused) refused_ids.insert(id);
    }
    std::set<std::string> expected_ids;
    for (auto i : demo::refusal_indices()) expected_ids.insert(ds.examples[i].id);
    const auto audit = annotate::audit_sample(ds, anns, ds.examples.size(), 0);
    std::size_t fmt_ok = 0;
    for (const auto& item : audit.items) fmt_ok += item.formatting_ok;
    const double secs = seconds_since(start);
    std::ostringstream d;
    d << role_ds.examples.size() << " examples, " << fallback << " fallback roles, formatting " << fmt_ok << "/"
      << audit.items.size() << ", " << secs << " s";
    const bool pass = role_ds.examples.size() == 50 && fallback == 3 && refused_ids == expected_ids &&
                      fmt_ok == audit.items.size() && audit.items.size() == 50 && secs < 10.0;
    return {pass, d.str()};
}

Outcome criterion2() {
    const std::vector<std::string> golden = {
        "",
        "[Question Description].",
        "[Question Description]. As a result, I will solve it like [Role Description].",
        "[Question Description]. Therefore, I will answer it as [Role Description].",
        "[Question Description]. To solve this problem, I will act as [Role Description].",
        "[Question Description]. So I will become [Role Description].",
        "[Question Description]. Fortunately, I am [Role Description].",
        "[Question Description]. For this reason, I will be [Role Description].",
        "[Question Description]. From now on, I will think like [Role Description].",
    };
    const auto templates = forge::builtin_templates();
    std::size_t exact = 0;
    const annotate::RoleAnnotation fixed{"x", "[Question Description]", "[Role Description]", false, "m"};
    for (std::size_t i = 0; i < templates.size() && i < golden.size(); ++i) {
        exact += forge::render_prefix(templates[i], fixed) == golden[i];
    }

    const auto ds = demo::make_lima_standin(50);
    const auto anns = annotate_standin(ds);
    std::vector<corpus::InstructionDataset> role;
    for (const auto& t : templates) role.push_back(forge::assemble_role_dataset(ds, anns, t));
    std::size_t pairs = 0, localized = 0;
    for (int a = 2; a <= 8; ++a) {
        for (int b = a + 1; b <= 8; ++b) {
            const auto r = forge::diff_templates(role[a], role[b]);
            ++pairs;
            localized += r.all_localized && r.differing == ds.examples.size();
        }
    }
    std::ostringstream d;
    d << templates.size() << " templates, " << exact << "/9 golden rows exact, " << localized << "/" << pairs
      << " role-template pairs differ only in junction text";
    return {templates.size() == 9 && exact == 9 && localized == pairs, d.str()};
}

Outcome criterion3() {
    const auto c = train::default_config(train::ModelFamily::mistral);
    const long T = 1000;
    const double e0 = std::fabs(train::lr_at(c, 0, T) - 1e-5);
    const double eT = std::fabs(train::lr_at(c, T, T) - 0.0);
    const double eM = std::fabs(train::lr_at(c, T / 2, T) - 5e-6);
    const double d0 = train::dropout_at(c, 0, 32);
    const double d31 = train::dropout_at(c, 31, 32);
    double residual = 0.0;
    for (int l = 0; l < 32; ++l) {
        const double line = d0 + (d31 - d0) * static_cast<double>(l) / 31.0;
        residual = std::max(residual, std::fabs(train::dropout_at(c, l, 32) - line));
    }
    std::ostringstream d;
    d << "lr errors " << e0 << ", " << eT << ", " << eM << "; dropout " << d0 << " -> " << d31 << ", residual "
      << residual;
    return {e0 < 1e-12 && eT < 1e-12 && eM < 1e-12 && d0 == 0.0 && d31 == 0.25 && residual < 1e-12, d.str()};
}

Outcome criterion4() {
    const train::ChatMarkers mk;
    const auto tok = toy::chat_tokenizer(mk);
    SeededRng rng(2024);
    std::size_t ok = 0;
    for (int i = 0; i < 20; ++i) {
        corpus::DialogueExample e;
        e.id = "m" + std::to_string(i);
        const std::size_t turns = 2 * (1 + rng.below(3));
        std::vector<int> assistant_tokens;
        std::string transcript = mk.system + train::kDefaultSystemPrompt + "\n";
        for (std::size_t t = 0; t < turns; ++t) {
            std::string content;
            const auto len = 1 + rng.below(60);
            for (std::uint64_t k = 0; k < len; ++k) content.push_back(static_cast<char>('!' + rng.below(90)));
            const bool user = t % 2 == 0;
            e.turns.push_back({user ? corpus::Speaker::user : corpus::Speaker::assistant, content});
            if (user) {
                transcript += mk.user + content + "\n" + mk.assistant;
            } else {
                for (unsigned char ch : content) assistant_tokens.push_back(ch);
                assistant_tokens.push_back(tok.special_id(mk.end));
                transcript += content + mk.end;
            }
        }
        const auto f = train::format_chat(e, train::kDefaultSystemPrompt, mk);
        const auto seq = toy::encode_chat(f, tok, 1 << 20);
        std::vector<int> in_loss;
        for (std::size_t k = 0; k < seq.tokens.size(); ++k) {
            if (seq.in_loss[k]) in_loss.push_back(seq.tokens[k]);
        }
        ok += in_loss == assistant_tokens && f.transcript() == transcript && tok.decode(seq.tokens) == transcript;
    }
    return {ok == 20, std::to_string(ok) + "/20 examples with exact mask and lossless transcript"};
}

Outcome criterion5() {
    bool pass = true;
    std::ostringstream d;
    for (const auto& [name, kind] : testutil::extraction_corpora()) {
        const auto cases = testutil::load_extraction_cases(fs::path(SELFPROMPT_TEST_DATA) / "extraction" / (name + ".jsonl"), kind);
        const auto a = testutil::score_extraction(cases);
        pass = pass && cases.size() == 50 && a.rate() >= 0.95;
        d << name << " " << a.agree << "/" << a.total << " ";
    }
    return {pass, d.str()};
}

Outcome criterion6() {
    const auto acc = testutil::metric_oracle(1000, 61, eval::FormatKind::option_letters);
    eval::SandboxConfig sb;
    sb.timeout = std::chrono::milliseconds(5000);
    const bool have_sandbox = eval::sandbox_available(sb);
    testutil::OracleOutcome pass1;
    if (have_sandbox) pass1 = testutil::metric_oracle(1000, 62, eval::FormatKind::code, sb);

    SeededRng rng(63);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 1 + rng.below(8);
        std::vector<eval::EvalReport> rs;
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            eval::EvalReport r;
            r.benchmark = "gsm8k";
            r.model = "m";
            r.seed = i;
            r.metric = 100.0 * rng.uniform();
            sum += r.metric;
            rs.push_back(r);
        }
        worst = std::max(worst, std::fabs(eval::aggregate_seeds(rs).mean - sum / static_cast<double>(n)));
    }
    std::ostringstream d;
    d << "accuracy mismatches " << acc.mismatches << "/" << acc.trials;
    if (have_sandbox) {
        d << ", pass@1 mismatches " << pass1.mismatches << "/" << pass1.trials;
    } else {
        d << ", pass@1 not run (sandbox unavailable)";
    }
    d << ", aggregate error " << worst;
    if (!acc.first_mismatch.empty()) d << " [" << acc.first_mismatch << "]";
    if (!pass1.first_mismatch.empty()) d << " [" << pass1.first_mismatch << "]";
    return {acc.mismatches == 0 && acc.trials == 1000 && have_sandbox && pass1.mismatches == 0 &&
                pass1.trials == 1000 && worst < 1e-12,
            d.str()};
}

Outcome criterion7() {
    std::vector<eval::EvalItem> pool;
    for (int c = 0; c < 10; ++c) {
        for (int i = 0; i < 237 + 11 * c; ++i) {
            eval::EvalItem it;
            it.item_id = "p" + std::to_string(c) + "-" + std::to_string(i);
            it.category = "category-" + std::to_string(c);
            pool.push_back(it);
        }
    }
    const auto a = eval::sample_mmlu_balanced(pool, 2000, 7);
    const auto b = eval::sample_mmlu_balanced(pool, 2000, 7);
    std::map<std::string, std::size_t> per;
    for (const auto& it : a) ++per[it.category];
    bool exact = per.size() == 10;
    for (const auto& [c, n] : per) exact = exact && n == 200;
    std::ostringstream d;
    d << a.size() << " items, " << per.size() << " categories, " << (exact ? "200 each" : "uneven") << ", "
      << (a == b ? "deterministic" : "not deterministic");
    return {a.size() == 2000 && exact && a == b, d.str()};
}

Outcome criterion8() {
    const auto start = Clock::now();
    const auto ds = demo::make_lima_standin(50);
    const auto anns = annotate_standin(ds);
    auto t8 = forge::assemble_role_dataset(ds, anns, forge::builtin_template(8));
    auto t0 = forge::assemble_role_dataset(ds, anns, forge::builtin_template(0));
    t8.examples.resize(32);
    t0.examples.resize(32);
    toy::ToyRunConfig cfg;
    const auto r8 = toy::run_toy_finetune(t8, cfg);
    const auto r0 = toy::run_toy_finetune(t0, cfg);
    const double secs = seconds_since(start);
    std::ostringstream d;
    d << r8.parameter_count << " params; template 8: " << r8.prefix_matches << "/" << r8.generations.size()
      << " prefixed (loss " << r8.initial_loss << " -> " << r8.final_loss << "); template 0: " << r0.prefix_matches
      << " prefixed, " << r0.junction_hits << " junction phrases; " << secs << " s";
    const bool pass = r8.parameter_count <= 10'000'000 && r8.prefix_rate >= 0.8 && r0.prefix_matches == 0 &&
                      r0.junction_hits == 0 && r8.final_loss < r8.initial_loss && secs < 15 * 60;
    return {pass, d.str()};
}

judge::Winner mirror(judge::Winner w) {
    if (w == judge::Winner::a) return judge::Winner::b;
    if (w == judge::Winner::b) return judge::Winner::a;
    return w;
}

Outcome criterion9() {
    const auto questions = demo::make_open_questions(300);
    auto index = std::make_shared<stubs::ItemIndex>();
    auto ma = stub_client(stubs::sim_model_stub(stubs::SimVariant::baseline, index, 0));
    auto mb = stub_client(stubs::sim_model_stub(stubs::SimVariant::role, index, 0));
    std::vector<std::string> warnings;
    const auto ra = judge::generate_responses(ma, questions, "Sim-LIMA", warnings);
    const auto rb = judge::generate_responses(mb, questions, "Sim-Role", warnings);
    const auto templates = forge::builtin_templates();
    const auto cases = judge::build_cases(questions, ra, rb, "Sim-LIMA", "Sim-Role", templates, warnings);
    std::vector<judge::PairwiseCase> flipped;
    for (const auto& c : cases) flipped.push_back(c.swapped());

    std::vector<std::string> forbidden = {"Sim-LIMA", "Sim-Role", "stub:sim-lima", "stub:sim-role"};
    for (const auto& p : forge::junction_phrases(templates)) forbidden.push_back(p);
    judge::JudgeRunConfig cfg;
    cfg.forbidden = {"Sim-LIMA", "Sim-Role", "stub:sim-lima", "stub:sim-role"};

    bool conserved = cases.size() == 300;
    bool symmetric = true;
    std::size_t violations = 0, requests = 0;
    std::ostringstream d;
    for (auto kind : {stubs::JudgeKind::longer, stubs::JudgeKind::tie, stubs::JudgeKind::first,
                      stubs::JudgeKind::refuse}) {
        std::mutex mu;
        auto inner = stubs::judge_stub(kind);
        auto judge = stub_client([&](const llm::CompletionRequest& r) {
            {
                std::lock_guard<std::mutex> lock(mu);
                ++requests;
                violations += judge::blinding_violations(judge::judge_visible_text(r), forbidden).size();
            }
            return inner(r);
        });
        const auto run = judge::judge_cases(judge, cases, cfg);
        const auto back = judge::judge_cases(judge, flipped, cfg);
        const auto& t = run.tally;
        conserved = conserved && t.wins_a + t.wins_b + t.ties + t.unjudged == 300 && run.verdicts.size() == 300;
        symmetric = symmetric && t.wins_a == back.tally.wins_b && t.wins_b == back.tally.wins_a &&
                    t.ties == back.tally.ties && t.unjudged == back.tally.unjudged;
        for (std::size_t i = 0; i < run.verdicts.size() && i < back.verdicts.size(); ++i) {
            symmetric = symmetric && mirror(run.verdicts[i].winner) == back.verdicts[i].winner;
        }
        d << "[" << t.wins_a << "/" << t.ties << "/" << t.wins_b << "/" << t.unjudged << "] ";
    }
    d << requests << " judge requests, " << violations << " blinding violations, "
      << (symmetric ? "swap-symmetric" : "NOT swap-symmetric");
    return {conserved && symmetric && violations == 0 && requests > 0, d.str()};
}

int cli(const std::vector<std::string>& args, std::string& log) {
    std::ostringstream out, err;
    const int code = cli::run_command(args, out, err);
    log += err.str();
    return code;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file() || e.path().filename() == ".timestamps.json") continue;
        files[fs::relative(e.path(), dir).generic_string()] = read_file(e.path());
    }
    return files;
}

bool run_pipeline(const fs::path& root, std::string& log) {
    const auto data = root / "data";
    const auto out = root / "out";
    demo::write_demo_data(data, 50);
    const std::vector<std::string> common = {
        "--output-dir", out.string(), "--dataset", (data / "lima.jsonl").string(), "--benchmarks-dir",
        (data / "benchmarks").string(), "--lima-test", (data / "lima_test.jsonl").string(), "--model-endpoint",
        "Sim-LIMA=stub:sim-lima", "--model-endpoint", "Sim-Role=stub:sim-role"};
    auto step = [&](std::vector<std::string> extra) {
        auto args = common;
        args.insert(args.end(), extra.begin(), extra.end());
        return cli(args, log) == 0;
    };
    return step({"annotate"}) && step({"forge"}) && step({"eval"}) &&
           step({"judge", "--model-a", "Sim-LIMA", "--model-b", "Sim-Role"}) &&
           step({"analyze", "--role-model", "Sim-Role"}) && step({"report"});
}

Outcome criterion10() {
    TempDir dir;
    std::string log;
    const auto start = Clock::now();
    if (!run_pipeline(dir.path(), log)) return {false, "first run failed: " + text::excerpt(log, 400)};
    const auto first = snapshot(dir.path() / "out");
    if (!run_pipeline(dir.path(), log)) return {false, "second run failed: " + text::excerpt(log, 400)};
    const auto second = snapshot(dir.path() / "out");
    std::size_t differing = 0;
    std::string first_diff;
    for (const auto& [name, body] : first) {
        auto it = second.find(name);
        if (it == second.end() || it->second != body) {
            ++differing;
            if (first_diff.empty()) first_diff = name;
        }
    }
    if (second.size() != first.size()) ++differing;

    const auto summary_it = first.find("report/summary.md");
    const bool table1 = summary_it != first.end() &&
                        summary_it->second.find("| Model | MMLU | CSQA | Strategy | Truthful | OpenBook | HumanEval | "
                                                "GSM8K | Date | AVG |") != std::string::npos &&
                        summary_it->second.find("| Sim-LIMA") != std::string::npos &&
                        summary_it->second.find("| Sim-Role") != std::string::npos;
    std::ostringstream d;
    d << first.size() << " artifacts, " << differing << " differ on re-run"
      << (first_diff.empty() ? "" : " (first: " + first_diff + ")") << ", results-table summary "
      << (table1 ? "present" : "missing") << ", " << seconds_since(start) << " s";
    return {differing == 0 && table1, d.str()};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"dataset pipeline", criterion1},  {"template suite", criterion2},     {"schedules", criterion3},
        {"loss masking", criterion4},      {"extraction corpora", criterion5}, {"metrics", criterion6},
        {"balanced MMLU sampler", criterion7}, {"toy fine-tune", criterion8},  {"judge harness", criterion9},
        {"end-to-end offline run", criterion10},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << (i + 1) << " (" << criteria[i].first
                  << "): " << o.detail << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
              << " acceptance criteria passed" << std::endl;
    return failed;
}
