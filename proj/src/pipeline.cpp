#include "selfprompt/pipeline.hpp"

#include <algorithm>
#include <ctime>
#include <iostream>
#include <map>
#include <memory>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "selfprompt/corpus.hpp"
#include "selfprompt/eval_harness.hpp"
#include "selfprompt/finetune_driver.hpp"
#include "selfprompt/llm_client.hpp"
#include "selfprompt/preference_judge.hpp"
#include "selfprompt/role_analysis.hpp"
#include "selfprompt/role_annotator.hpp"
#include "selfprompt/stubs.hpp"
#include "selfprompt/template_forge.hpp"
#include "selfprompt/toy_finetune.hpp"

namespace selfprompt::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

ModelEndpoint parse_model_endpoint(const std::string& spec) {
    const auto eq = spec.find('=');
    ModelEndpoint m;
    if (eq == std::string::npos) {
        m.name = spec;
        m.endpoint = spec;
    } else {
        m.name = text::trim(spec.substr(0, eq));
        m.endpoint = text::trim(spec.substr(eq + 1));
    }
    if (m.name.empty() || m.endpoint.empty()) throw ValidationError("bad model spec '" + spec + "', want NAME=ENDPOINT");
    if (m.name.find_first_of("/\\") != std::string::npos || m.name == "." || m.name == "..") {
        throw ValidationError("model name '" + m.name + "' cannot be used as a directory name");
    }
    return m;
}

void PipelineConfig::validate() const {
    if (template_id < 0 || template_id > 8) throw ValidationError("template id must be in 0..8");
    if (!(sandbox_timeout > 0.0)) throw ValidationError("sandbox timeout must be positive");
    if (seeds.empty()) throw ValidationError("at least one seed is required");
    if (output_dir.empty()) throw ValidationError("output directory is empty");
}

namespace {

struct Options {
    PipelineConfig cfg;
    // annotate
    std::string annotator_model = "gpt-4";
    std::string fallback_role = annotate::kDefaultFallbackRole;
    std::size_t audit_size = 100;
    std::uint64_t audit_seed = 0;
    // forge
    fs::path annotations;
    fs::path templates_file;
    // train-plan / toy-train
    std::string family = "mistral";
    fs::path train_dataset;
    std::size_t toy_limit = 32;
    int toy_steps = 500;
    int toy_batch = 8;
    double toy_lr = 3e-3;
    double toy_dropout_top = 0.25;
    int toy_d_model = 64;
    std::uint64_t toy_seed = 0;
    // eval
    std::vector<std::string> benchmarks = {"all"};
    std::vector<std::string> model_templates;
    bool resume = false;
    bool keep_checkpoints = false;
    std::uint64_t mmlu_seed = 0;
    int max_tokens = 512;
    // judge
    std::string model_a;
    std::string model_b;
    std::string judge_model = "gpt-4";
    // analyze
    std::string role_model;
};

std::string now_iso() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void record_timestamp(const fs::path& out_dir, const std::string& command, const std::string& started) {
    const fs::path path = out_dir / ".timestamps.json";
    ojson j = ojson::object();
    if (fs::exists(path)) {
        try {
            j = ojson::parse(read_file(path));
        } catch (const std::exception&) {
            j = ojson::object();
        }
    }
    j[command] = {{"started", started}, {"finished", now_iso()}};
    write_file(path, j.dump(2) + "\n");
}

void require_path(const fs::path& p, const std::string& what, const std::string& hint = {}) {
    if (p.empty()) throw ValidationError(what + " is not set" + (hint.empty() ? "" : "; " + hint));
    if (!fs::exists(p)) {
        throw IoError("missing " + what + ": " + p.string() + (hint.empty() ? "" : " (" + hint + ")"));
    }
}

llm::ClientConfig client_config(const PipelineConfig& cfg, const std::string& endpoint) {
    llm::ClientConfig c;
    c.endpoint = endpoint;
    c.max_retries = cfg.max_retries;
    c.max_concurrent = cfg.max_concurrent;
    c.jitter_seed = 0;
    if (endpoint.rfind("stub:", 0) != 0) c.auth_env = cfg.auth_env;
    return c;
}

std::vector<forge::PromptTemplate> templates_for(const Options& o) {
    return o.templates_file.empty() ? forge::builtin_templates() : forge::load_templates(o.templates_file);
}

const forge::PromptTemplate& find_template(const std::vector<forge::PromptTemplate>& ts, int id) {
    for (const auto& t : ts) {
        if (t.template_id == id) return t;
    }
    throw ValidationError("template " + std::to_string(id) + " is not defined");
}

fs::path role_dataset_path(const Options& o) {
    if (!o.train_dataset.empty()) return o.train_dataset;
    if (o.cfg.dataset.empty()) throw ValidationError("pass --train-dataset or --dataset");
    return o.cfg.output_dir / "datasets" /
           (o.cfg.dataset.stem().string() + "-t" + std::to_string(o.cfg.template_id) + ".jsonl");
}

// ---------------------------------------------------------------------------

int cmd_annotate(const Options& o, std::ostream& out) {
    const auto& cfg = o.cfg;
    require_path(cfg.dataset, "dataset", "--dataset");
    auto loaded = corpus::load_dataset(cfg.dataset);
    for (const auto& w : loaded.warnings) out << "warning: " << w << "\n";
    const auto& ds = loaded.dataset;

    annotate::AnnotatorOptions opts;
    opts.model = o.annotator_model;
    opts.fallback_role = o.fallback_role;
    llm::LlmClient client(client_config(cfg, cfg.annotator_endpoint));
    const auto result = annotate::annotate_dataset(ds, client, opts);
    const auto anns = annotate::collect_annotations(result);
    annotate::save_annotations(anns, cfg.output_dir / "annotations.jsonl");

    ojson errors = ojson::array();
    for (const auto& [id, outcome] : result) {
        if (!outcome.ok()) errors.push_back({{"id", id}, {"error", outcome.error}});
    }
    write_file(cfg.output_dir / "annotation_errors.json", errors.dump(2) + "\n");

    std::size_t refused = 0;
    for (const auto& [id, a] : anns) refused += a.refused ? 1 : 0;

    const std::size_t n = std::min(o.audit_size, ds.examples.size());
    auto audit = annotate::audit_sample(ds, anns, n, o.audit_seed, o.fallback_role);
    fs::create_directories(cfg.output_dir / "audit");
    annotate::write_audit_checklist(audit, cfg.output_dir / "audit" / "checklist.csv");
    write_file(cfg.output_dir / "audit" / "audit.json", annotate::audit_report_json(audit));
    std::size_t fmt_ok = 0;
    for (const auto& item : audit.items) fmt_ok += item.formatting_ok ? 1 : 0;

    out << "annotated " << anns.size() << "/" << ds.examples.size() << " examples, " << refused
        << " fallback roles, formatting ok on " << fmt_ok << "/" << audit.items.size() << " audited\n";
    if (!errors.empty()) {
        out << errors.size() << " examples failed; see annotation_errors.json\n";
        return 1;
    }
    return 0;
}

int cmd_forge(const Options& o, std::ostream& out) {
    const auto& cfg = o.cfg;
    require_path(cfg.dataset, "dataset", "--dataset");
    const fs::path ann_path = o.annotations.empty() ? cfg.output_dir / "annotations.jsonl" : o.annotations;
    require_path(ann_path, "annotations file", "run `annotate` first or pass --annotations");
    const auto templates = templates_for(o);
    const auto& t = find_template(templates, cfg.template_id);

    const auto base = corpus::load_dataset(cfg.dataset).dataset;
    const auto anns = annotate::load_annotations(ann_path);
    const auto role = forge::assemble_role_dataset(base, anns, t);
    const fs::path path = cfg.output_dir / "datasets" /
                          (cfg.dataset.stem().string() + "-t" + std::to_string(cfg.template_id) + ".jsonl");
    corpus::save_dataset(role, path);
    out << "wrote " << path.string() << " (" << role.examples.size() << " examples, template " << t.template_id
        << ")\n";
    return 0;
}

int cmd_train_plan(const Options& o, std::ostream& out) {
    const fs::path path = role_dataset_path(o);
    require_path(path, "role dataset", "run `forge` first or pass --train-dataset");
    train::TrainConfig c = train::default_config(o.family);
    c.seeds = o.cfg.seeds;
    const auto plan =
        train::emit_train_plan(c, path, o.cfg.output_dir / "train_plans" / (o.family + "-" + path.stem().string()));
    for (const auto& w : plan.warnings) out << "warning: " << w << "\n";
    out << "wrote " << plan.path.string() << " (" << plan.runs << " runs, " << plan.total_steps << " steps each)\n";
    return 0;
}

int cmd_toy_train(const Options& o, std::ostream& out) {
    const fs::path path = role_dataset_path(o);
    require_path(path, "role dataset", "run `forge` first or pass --train-dataset");
    auto ds = corpus::load_dataset(path).dataset;
    if (ds.examples.size() > o.toy_limit) ds.examples.resize(o.toy_limit);
    toy::ToyRunConfig tc;
    tc.steps = o.toy_steps;
    tc.batch_size = o.toy_batch;
    tc.peak_lr = o.toy_lr;
    tc.dropout_top = o.toy_dropout_top;
    tc.model.d_model = o.toy_d_model;
    tc.seed = o.toy_seed;
    const auto r = toy::run_toy_finetune(ds, tc, templates_for(o));
    const fs::path dest = o.cfg.output_dir / "toy" / path.stem() / "result.json";
    write_file(dest, toy::toy_result_json(r));
    out << "toy model: " << r.parameter_count << " parameters, loss " << r.initial_loss << " -> " << r.final_loss
        << ", template prefix on " << r.prefix_matches << "/" << r.generations.size() << " prompts\n";
    out << "wrote " << dest.string() << "\n";
    return 0;
}

std::vector<std::string> selected_benchmarks(const std::vector<std::string>& requested) {
    std::vector<std::string> out;
    for (const auto& b : requested) {
        if (b == "all") {
            for (const auto& s : eval::benchmark_specs()) out.push_back(s.name);
        } else {
            eval::benchmark_spec(b);
            out.push_back(b);
        }
    }
    std::vector<std::string> uniq;
    for (const auto& b : out) {
        if (std::find(uniq.begin(), uniq.end(), b) == uniq.end()) uniq.push_back(b);
    }
    return uniq;
}

int cmd_eval(const Options& o, std::ostream& out) {
    const auto& cfg = o.cfg;
    if (cfg.models.empty()) throw ValidationError("eval needs at least one --model-endpoint NAME=ENDPOINT");
    require_path(cfg.benchmarks_dir, "benchmarks directory", "--benchmarks-dir");
    std::vector<ModelEndpoint> models;
    for (const auto& m : cfg.models) models.push_back(parse_model_endpoint(m));
    std::map<std::string, int> tags;
    for (const auto& spec : o.model_templates) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw ValidationError("--model-template wants NAME=ID, got '" + spec + "'");
        tags[spec.substr(0, eq)] = std::stoi(spec.substr(eq + 1));
    }

    std::vector<eval::LoadedBenchmark> benches;
    auto index = std::make_shared<stubs::ItemIndex>();
    for (const auto& name : selected_benchmarks(o.benchmarks)) {
        auto lb = eval::load_benchmark(cfg.benchmarks_dir, name);
        if (name == "mmlu" && lb.items.size() > eval::kMmluSampleSize) {
            lb.items = eval::sample_mmlu_balanced(lb.items, eval::kMmluSampleSize, o.mmlu_seed);
            lb.warnings.clear();
        }
        for (const auto& w : lb.warnings) out << "warning: " << w << "\n";
        index->add(lb.spec, lb.items);
        benches.push_back(std::move(lb));
    }

    eval::SandboxConfig sandbox;
    sandbox.python = cfg.python;
    sandbox.timeout = std::chrono::milliseconds(static_cast<long>(cfg.sandbox_timeout * 1000.0));
    sandbox.require_isolation = !cfg.no_isolation;

    for (const auto seed : cfg.seeds) {
        stubs::install_sim_models(index, seed);
        for (const auto& m : models) {
            llm::LlmClient client(client_config(cfg, m.endpoint));
            for (const auto& lb : benches) {
                const fs::path dir = cfg.output_dir / "eval" / m.name / lb.spec.name;
                fs::create_directories(dir);
                eval::EvalConfig ec;
                ec.model = m.name;
                ec.seed = seed;
                if (auto it = tags.find(m.name); it != tags.end()) ec.template_id = it->second;
                ec.max_tokens = o.max_tokens;
                ec.sandbox = sandbox;
                ec.checkpoint = dir / ("seed-" + std::to_string(seed) + ".ckpt.jsonl");
                ec.resume = o.resume;
                const auto report = eval::run_eval(client, lb, ec);
                write_file(dir / ("seed-" + std::to_string(seed) + ".json"), eval::report_to_json(report));
                if (!o.keep_checkpoints) fs::remove(*ec.checkpoint);
                out << m.name << " " << lb.spec.name << " seed " << seed << ": ";
                if (report.skipped) {
                    out << "skipped (" << report.note << ")\n";
                } else {
                    out << report.metric << " (" << report.predictions.size() << " scored, " << report.excluded.size()
                        << " excluded)\n";
                }
            }
        }
    }
    return 0;
}

std::string audit_jsonl(const llm::AuditLog& log) {
    auto entries = log.entries();
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return std::tie(a.request, a.attempt, a.response) < std::tie(b.request, b.attempt, b.response);
    });
    std::string s;
    for (const auto& e : entries) {
        ojson j;
        j["endpoint"] = e.endpoint;
        j["attempt"] = e.attempt;
        j["status"] = e.status;
        j["request"] = e.request;
        j["response"] = e.response;
        s += j.dump() + "\n";
    }
    return s;
}

int cmd_judge(const Options& o, std::ostream& out) {
    const auto& cfg = o.cfg;
    require_path(cfg.lima_test, "LIMA-test questions", "--lima-test");
    std::string spec_a = o.model_a, spec_b = o.model_b;
    if (spec_a.empty() && spec_b.empty() && cfg.models.size() == 2) {
        spec_a = cfg.models[0];
        spec_b = cfg.models[1];
    }
    if (spec_a.empty() || spec_b.empty()) throw ValidationError("judge needs --model-a and --model-b (NAME=ENDPOINT)");
    auto resolve = [&](const std::string& spec) {
        if (spec.find('=') == std::string::npos) {
            for (const auto& m : cfg.models) {
                auto known = parse_model_endpoint(m);
                if (known.name == spec) return known;
            }
        }
        return parse_model_endpoint(spec);
    };
    const auto a = resolve(spec_a);
    const auto b = resolve(spec_b);
    const auto questions = judge::load_test_questions(cfg.lima_test);
    stubs::install_sim_models(nullptr, cfg.seeds.front());

    std::vector<std::string> warnings;
    llm::LlmClient client_a(client_config(cfg, a.endpoint));
    llm::LlmClient client_b(client_config(cfg, b.endpoint));
    const auto resp_a = judge::generate_responses(client_a, questions, a.name, warnings);
    const auto resp_b = judge::generate_responses(client_b, questions, b.name, warnings);
    const fs::path dir = cfg.output_dir / "judge";
    write_file(dir / "responses-a.jsonl", judge::responses_jsonl(resp_a));
    write_file(dir / "responses-b.jsonl", judge::responses_jsonl(resp_b));

    judge::JudgeRunConfig jc;
    jc.prompt.model = o.judge_model;
    jc.templates = templates_for(o);
    jc.forbidden = {a.name, b.name, a.endpoint, b.endpoint};
    const auto cases = judge::build_cases(questions, resp_a, resp_b, a.name, b.name, jc.templates, warnings);

    auto audit = std::make_shared<llm::AuditLog>();
    llm::LlmClient judge_client(client_config(cfg, cfg.judge_endpoint), audit);
    auto run = judge::judge_cases(judge_client, cases, jc);
    run.warnings.insert(run.warnings.begin(), warnings.begin(), warnings.end());

    write_file(dir / "verdicts.jsonl", judge::verdicts_jsonl(run));
    write_file(dir / "summary.json", judge::summary_json(run));
    write_file(dir / "plot.csv", judge::plot_csv(run));
    write_file(dir / "judge_requests.jsonl", audit_jsonl(*audit));

    for (const auto& w : run.warnings) out << "warning: " << w << "\n";
    out << a.name << " vs " << b.name << ": " << run.tally.wins_a << " wins / " << run.tally.ties << " ties / "
        << run.tally.wins_b << " losses, " << run.tally.unjudged << " unjudged\n";
    return 0;
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (directories ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<eval::EvalReport> seed_reports(const fs::path& dir) {
    std::vector<eval::EvalReport> out;
    for (const auto& f : sorted_entries(dir, false)) {
        const std::string name = f.filename().string();
        if (name.rfind("seed-", 0) != 0 || f.extension() != ".json" || name.find(".ckpt") != std::string::npos) {
            continue;
        }
        out.push_back(eval::report_from_json(read_file(f)));
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.seed < y.seed; });
    return out;
}

int cmd_analyze(const Options& o, std::ostream& out) {
    const auto& cfg = o.cfg;
    std::string name = o.role_model;
    if (name.empty() && cfg.models.size() == 1) name = parse_model_endpoint(cfg.models[0]).name;
    if (name.empty()) throw ValidationError("analyze needs --role-model NAME");
    const fs::path dir = cfg.output_dir / "eval" / name / "mmlu";
    require_path(dir, "MMLU eval outputs for " + name, "run `eval --benchmark mmlu` first");
    const auto reports = seed_reports(dir);
    if (reports.empty()) throw IoError("no seed reports under " + dir.string());

    const auto templates = templates_for(o);
    std::vector<roles::RoleExtraction> extractions;
    std::size_t found = 0;
    for (const auto& r : reports) {
        for (const auto& p : r.predictions) {
            auto e = roles::extract_role(p.item_id, p.category, p.raw_output, templates);
            found += e.role_phrase ? 1 : 0;
            extractions.push_back(std::move(e));
        }
    }
    const auto tables = roles::role_frequencies(extractions);
    const auto files = roles::export_wordcloud_data(tables, cfg.output_dir / "analysis" / "roles");
    write_file(cfg.output_dir / "analysis" / "roles.json", roles::aggregate_json(tables));
    out << "extracted roles from " << found << "/" << extractions.size() << " MMLU outputs of " << name << "; "
        << files.size() << " domain tables\n";
    return 0;
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

int cmd_report(const Options& o, std::ostream& out) {
    const auto& cfg = o.cfg;
    const fs::path eval_dir = cfg.output_dir / "eval";
    require_path(eval_dir, "eval outputs", "run `eval` first");
    const fs::path verdicts_path = cfg.output_dir / "judge" / "verdicts.jsonl";
    require_path(verdicts_path, "judge verdicts file", "run `judge` first");
    const fs::path judge_summary_path = cfg.output_dir / "judge" / "summary.json";
    require_path(judge_summary_path, "judge summary file", "run `judge` first");

    std::map<std::string, std::vector<eval::EvalReport>> by_model;
    for (const auto& mdir : sorted_entries(eval_dir, true)) {
        auto& list = by_model[mdir.filename().string()];
        for (const auto& bdir : sorted_entries(mdir, true)) {
            for (auto& r : seed_reports(bdir)) list.push_back(std::move(r));
        }
        if (list.empty()) by_model.erase(mdir.filename().string());
    }
    if (by_model.empty()) throw IoError("no eval reports under " + eval_dir.string());
    const auto table = eval::build_results_table(by_model);

    const auto verdicts = judge::load_verdicts(verdicts_path);
    const auto t = judge::tally(verdicts);
    const auto jsum = ojson::parse(read_file(judge_summary_path));
    const std::string sys_a = jsum.value("system_a", "a");
    const std::string sys_b = jsum.value("system_b", "b");

    ojson j;
    j["benchmarks"] = table.benchmarks;
    auto rows = ojson::array();
    for (const auto& r : table.rows) {
        ojson row;
        row["model"] = r.model;
        ojson vals = ojson::object();
        for (const auto& b : table.benchmarks) {
            if (auto it = r.values.find(b); it != r.values.end()) vals[b] = it->second;
        }
        row["values"] = vals;
        row["avg"] = r.avg;
        row["best"] = r.best;
        rows.push_back(row);
    }
    j["rows"] = rows;
    j["notes"] = table.notes;

    const double judged = static_cast<double>(t.judged());
    auto share = [&](std::size_t n) { return judged > 0 ? 100.0 * static_cast<double>(n) / judged : 0.0; };
    j["judge"] = {{"system_a", sys_a},       {"system_b", sys_b},     {"wins_a", t.wins_a},
                  {"wins_b", t.wins_b},      {"ties", t.ties},        {"unjudged", t.unjudged},
                  {"win_pct", share(t.wins_a)}, {"tie_pct", share(t.ties)}, {"loss_pct", share(t.wins_b)}};

    std::string md = "# Summary\n\n## Benchmarks\n\nZero-shot greedy decoding, mean over seeds.\n\n";
    md += eval::results_table_markdown(table);
    for (const auto& n : table.notes) md += "\n- " + n;
    if (!table.notes.empty()) md += "\n";
    md += "\n## Pairwise preference (" + sys_a + " vs " + sys_b + ")\n\n";
    md += "| Outcome | Count | Percent |\n|---|---|---|\n";
    md += "| " + sys_a + " wins | " + std::to_string(t.wins_a) + " | " + pct(share(t.wins_a)) + " |\n";
    md += "| Tie | " + std::to_string(t.ties) + " | " + pct(share(t.ties)) + " |\n";
    md += "| " + sys_b + " wins | " + std::to_string(t.wins_b) + " | " + pct(share(t.wins_b)) + " |\n";
    md += "\nUnjudged: " + std::to_string(t.unjudged) + " of " + std::to_string(t.total()) + ".\n";

    // Per-domain MMLU comparison of the two judged systems, when both have MMLU runs.
    auto mmlu_breakdown = [&](const std::string& model) -> std::optional<eval::DomainBreakdown> {
        auto it = by_model.find(model);
        if (it == by_model.end()) return std::nullopt;
        std::vector<eval::DomainBreakdown> parts;
        for (const auto& r : it->second) {
            if (r.benchmark == "mmlu" && !r.skipped) parts.push_back(eval::mmlu_domain_breakdown(r));
        }
        if (parts.empty()) return std::nullopt;
        return eval::mean_breakdown(parts);
    };
    const auto da = mmlu_breakdown(sys_a);
    const auto db = mmlu_breakdown(sys_b);
    if (da && db) {
        const auto cmp = eval::compare_domains(*da, *db);
        md += "\n## MMLU by domain\n\n| Domain | " + sys_a + " | " + sys_b + " |\n|---|---|---|\n";
        auto drows = ojson::array();
        for (const auto& r : cmp.rows) {
            md += "| " + r.category + " | " + pct(r.a) + " | " + pct(r.b) + " |\n";
            drows.push_back({{"category", r.category}, {"a", r.a}, {"b", r.b}});
        }
        md += "\n" + sys_a + " higher in " + std::to_string(cmp.wins_a) + ", " + sys_b + " higher in " +
              std::to_string(cmp.wins_b) + ", equal in " + std::to_string(cmp.ties) + ".\n";
        j["domains"] = {{"rows", drows}, {"wins_a", cmp.wins_a}, {"wins_b", cmp.wins_b}, {"ties", cmp.ties}};
    }

    write_file(cfg.output_dir / "report" / "summary.md", md);
    write_file(cfg.output_dir / "report" / "summary.json", j.dump(2) + "\n");
    out << md;
    return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    auto& cfg = o.cfg;
    CLI::App app{"Role-play prefix pipeline: annotate, forge, train, evaluate, judge, analyze, report."};
    app.name("selfprompt");
    app.set_config("--config", "", "Key/value config file (INI or TOML)");
    app.allow_config_extras(false);
    app.fallthrough();
    app.require_subcommand(1);

    std::string output_dir = cfg.output_dir.string(), dataset, benchmarks_dir, lima_test;
    app.add_option("--output-dir,-o", output_dir, "Directory for every artifact")->capture_default_str();
    app.add_option("--dataset", dataset, "Base dialogue corpus (JSONL)");
    app.add_option("--benchmarks-dir", benchmarks_dir, "Directory holding <benchmark>.jsonl files");
    app.add_option("--lima-test", lima_test, "Open-ended test questions (JSONL)");
    app.add_option("--annotator-endpoint", cfg.annotator_endpoint, "Annotator endpoint URL or stub:<name>")
        ->capture_default_str();
    app.add_option("--judge-endpoint", cfg.judge_endpoint, "Judge endpoint URL or stub:<name>")->capture_default_str();
    app.add_option("--model-endpoint", cfg.models, "Model under evaluation, NAME=ENDPOINT (repeatable)");
    app.add_option("--seed", cfg.seeds, "Seeds (repeatable)")->capture_default_str();
    app.add_option("--template-id,--template", cfg.template_id, "Prefix template 0-8")
        ->check(CLI::Range(0, 8))
        ->capture_default_str();
    app.add_option("--sandbox-timeout", cfg.sandbox_timeout, "Seconds per code problem")->capture_default_str();
    app.add_option("--python", cfg.python, "Interpreter for code problems")->capture_default_str();
    app.add_flag("--no-isolation", cfg.no_isolation, "Run code without a private network namespace");
    app.add_option("--max-concurrent", cfg.max_concurrent, "Parallel requests per client")->capture_default_str();
    app.add_option("--max-retries", cfg.max_retries, "Retries per request")->capture_default_str();
    app.add_option("--auth-env", cfg.auth_env, "Environment variable with the bearer token for HTTP endpoints");
    std::string templates_file, annotations, train_dataset;
    app.add_option("--templates-file", templates_file, "Custom template list, one pattern per line");

    auto* annotate = app.add_subcommand("annotate", "Annotate each example with a summary and an expert role");
    annotate->add_option("--annotator-model", o.annotator_model)->capture_default_str();
    annotate->add_option("--fallback-role", o.fallback_role)->capture_default_str();
    annotate->add_option("--audit-size", o.audit_size)->capture_default_str();
    annotate->add_option("--audit-seed", o.audit_seed)->capture_default_str();

    auto* forge = app.add_subcommand("forge", "Prefix first answers with the chosen template");
    forge->add_option("--annotations", annotations, "Defaults to <output-dir>/annotations.jsonl");

    auto* plan = app.add_subcommand("train-plan", "Write the fine-tuning manifest for a role dataset");
    plan->add_option("--family", o.family, "mistral or llama")->capture_default_str();
    plan->add_option("--train-dataset", train_dataset, "Defaults to the forged dataset for --template-id");

    auto* toy_train = app.add_subcommand("toy-train", "Overfit the toy transformer and check its prefixes");
    toy_train->add_option("--train-dataset", train_dataset, "Defaults to the forged dataset for --template-id");
    toy_train->add_option("--limit", o.toy_limit, "Examples to train on")->capture_default_str();
    toy_train->add_option("--steps", o.toy_steps)->capture_default_str();
    toy_train->add_option("--batch-size", o.toy_batch)->capture_default_str();
    toy_train->add_option("--peak-lr", o.toy_lr)->capture_default_str();
    toy_train->add_option("--dropout-top", o.toy_dropout_top, "Attention dropout on the last layer")
        ->capture_default_str();
    toy_train->add_option("--d-model", o.toy_d_model)->capture_default_str();
    toy_train->add_option("--toy-seed", o.toy_seed)->capture_default_str();

    auto* ev = app.add_subcommand("eval", "Zero-shot benchmark evaluation");
    ev->add_option("--benchmark", o.benchmarks, "Benchmark name or all (repeatable)")->capture_default_str();
    ev->add_option("--model-template", o.model_templates, "Record NAME=ID as the model's prefix template");
    ev->add_flag("--resume", o.resume, "Continue from per-item checkpoints");
    ev->add_flag("--keep-checkpoints", o.keep_checkpoints);
    ev->add_option("--mmlu-seed", o.mmlu_seed, "Seed for the balanced MMLU sample")->capture_default_str();
    ev->add_option("--max-tokens", o.max_tokens)->capture_default_str();

    auto* jd = app.add_subcommand("judge", "Blinded pairwise preference on the open-ended test set");
    jd->add_option("--model-a", o.model_a, "NAME=ENDPOINT, or a NAME given to --model-endpoint");
    jd->add_option("--model-b", o.model_b, "NAME=ENDPOINT, or a NAME given to --model-endpoint");
    jd->add_option("--judge-model", o.judge_model)->capture_default_str();

    auto* an = app.add_subcommand("analyze", "Role frequency tables from MMLU outputs");
    an->add_option("--role-model", o.role_model, "Model whose MMLU outputs to scan");

    auto* rep = app.add_subcommand("report", "Collate benchmark and preference results");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    cfg.output_dir = output_dir;
    cfg.dataset = dataset;
    cfg.benchmarks_dir = benchmarks_dir;
    cfg.lima_test = lima_test;
    o.templates_file = templates_file;
    o.annotations = annotations;
    o.train_dataset = train_dataset;

    std::string command;
    try {
        cfg.validate();
        if (!o.templates_file.empty()) require_path(o.templates_file, "templates file");
        fs::create_directories(cfg.output_dir);
        stubs::install_default_stubs();
        const std::string started = now_iso();
        int rc = 0;
        if (annotate->parsed()) {
            command = "annotate";
            rc = cmd_annotate(o, out);
        } else if (forge->parsed()) {
            command = "forge";
            rc = cmd_forge(o, out);
        } else if (plan->parsed()) {
            command = "train-plan";
            rc = cmd_train_plan(o, out);
        } else if (toy_train->parsed()) {
            command = "toy-train";
            rc = cmd_toy_train(o, out);
        } else if (ev->parsed()) {
            command = "eval";
            rc = cmd_eval(o, out);
        } else if (jd->parsed()) {
            command = "judge";
            rc = cmd_judge(o, out);
        } else if (an->parsed()) {
            command = "analyze";
            rc = cmd_analyze(o, out);
        } else if (rep->parsed()) {
            command = "report";
            rc = cmd_report(o, out);
        }
        record_timestamp(cfg.output_dir, command, started);
        return rc;
    } catch (const std::exception& e) {
        err << "selfprompt" << (command.empty() ? "" : " " + command) << ": error: " << e.what() << "\n";
        return 1;
    }
}

int run_command(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_command(args, std::cout, std::cerr);
}

}  // namespace selfprompt::cli
