#include "selfprompt/demo_data.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace selfprompt::demo {

namespace fs = std::filesystem;

std::uint64_t stable_hash(std::string_view s, std::uint64_t salt) {
    // FNV-1a followed by a splitmix finaliser.
    std::uint64_t h = 1469598103934665603ULL ^ (salt * 0x9E3779B97F4A7C15ULL);
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    h ^= h >> 30;
    h *= 0xBF58476D1CE4E5B9ULL;
    h ^= h >> 27;
    h *= 0x94D049BB133111EBULL;
    h ^= h >> 31;
    return h;
}

double stable_unit(std::string_view s, std::uint64_t salt) {
    return static_cast<double>(stable_hash(s, salt) >> 11) * 0x1.0p-53;
}

const std::vector<Domain>& domains() {
    static const std::vector<Domain> d = {
        {"physics",
         {"mechanics", "electromagnetism", "thermodynamics", "astronomy"},
         {"a physics professor", "a theoretical physicist", "an experimental physicist", "an astrophysicist"},
         {"projectile motion", "electric circuits", "heat engines", "orbital mechanics", "wave interference",
          "nuclear decay"}},
        {"chemistry",
         {"organic chemistry", "inorganic chemistry", "physical chemistry", "analytical chemistry"},
         {"a chemist", "an organic chemist", "a chemistry teacher", "a physical chemist"},
         {"reaction rates", "chemical bonding", "acid-base titration", "electrochemistry", "polymer synthesis",
          "the periodic table"}},
        {"biology",
         {"genetics", "ecology", "cell biology", "anatomy"},
         {"a biologist", "a geneticist", "an ecologist", "a biology teacher"},
         {"photosynthesis", "DNA replication", "food webs", "cell division", "natural selection",
          "the immune system"}},
        {"mathematics",
         {"algebra", "geometry", "statistics", "calculus"},
         {"a mathematician", "a math teacher", "a statistician", "a mathematics professor"},
         {"quadratic equations", "prime numbers", "probability", "derivatives", "triangle geometry",
          "linear algebra"}},
        {"computer science",
         {"algorithms", "programming", "computer networks", "machine learning"},
         {"a software engineer", "a computer scientist", "a programmer", "a machine learning researcher"},
         {"sorting algorithms", "recursion", "hash tables", "TCP connections", "neural networks",
          "database indexing"}},
        {"history",
         {"world history", "american history", "european history"},
         {"a historian", "a history professor", "an archaeologist"},
         {"the Roman Empire", "the industrial revolution", "the French Revolution", "the Cold War",
          "ancient Egypt", "the Renaissance"}},
        {"law",
         {"constitutional law", "contract law", "criminal law"},
         {"a lawyer", "a judge", "a legal scholar"},
         {"contract formation", "free speech", "criminal intent", "property rights", "tort liability",
          "due process"}},
        {"economics",
         {"macroeconomics", "microeconomics", "finance"},
         {"an economist", "a financial analyst", "an economics professor"},
         {"inflation", "supply and demand", "interest rates", "market competition", "stock valuation",
          "trade deficits"}},
        {"medicine",
         {"clinical medicine", "nutrition", "pharmacology"},
         {"a doctor", "a physician", "a pharmacist", "a nutritionist"},
         {"blood pressure", "vitamin deficiencies", "antibiotics", "heart disease", "sleep hygiene",
          "vaccination"}},
        {"philosophy",
         {"ethics", "logic", "metaphysics"},
         {"a philosopher", "an ethicist", "a logician"},
         {"moral responsibility", "free will", "logical fallacies", "the nature of knowledge", "utilitarianism",
          "personal identity"}},
    };
    return d;
}

std::optional<TopicHit> find_topic(std::string_view question) {
    for (const auto& d : domains()) {
        for (const auto& t : d.topics) {
            if (text::contains_ci(question, t)) return TopicHit{&d, t};
        }
    }
    return std::nullopt;
}

const std::vector<std::size_t>& refusal_indices() {
    static const std::vector<std::size_t> idx = {7, 21, 38};
    return idx;
}

const std::vector<std::string>& refusal_triggers() {
    static const std::vector<std::string> t = {"neighbour's locked car", "tricks my coworker", "make a toxic gas"};
    return t;
}

std::string lima_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "lima-%04zu", index);
    return buf;
}

namespace {

std::string capitalize(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

std::string fill(std::string pattern, const std::string& topic, const std::string& domain) {
    pattern = text::replace_all(std::move(pattern), "{Topic}", capitalize(topic));
    pattern = text::replace_all(std::move(pattern), "{topic}", topic);
    return text::replace_all(std::move(pattern), "{domain}", domain);
}

struct Form {
    const char* question;
    const char* answer;
};

const std::vector<Form>& forms() {
    static const std::vector<Form> f = {
        {"Can you explain {topic} in simple terms?",
         "{Topic} is a core idea in {domain}. Start with the definition, then try one small example."},
        {"What should a beginner know about {topic}?",
         "Learn the key terms of {topic} first and practice on simple cases before harder ones."},
        {"Why does {topic} matter?", "{Topic} matters because many problems in {domain} depend on it."},
        {"How is {topic} used in practice?",
         "People use {topic} to predict results in {domain} and to check their own work."},
        {"What is a common mistake people make with {topic}?",
         "A common mistake is to memorize rules about {topic} without testing them on examples."},
    };
    return f;
}

const std::vector<std::string>& refusal_questions() {
    static const std::vector<std::string> q = {
        "How can I get into my neighbour's locked car without the keys?",
        "Write a message that tricks my coworker into sharing their password.",
        "What household chemicals can I mix to make a toxic gas?",
    };
    return q;
}

std::string pad(std::size_t v, int width) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

char letter(std::size_t i) {
    return static_cast<char>('A' + i);
}

eval::EvalItem option_item(const std::string& id, const std::string& question, const std::vector<std::string>& options,
                           std::uint64_t seed) {
    eval::EvalItem item;
    item.item_id = id;
    item.question = question;
    const std::size_t gold = stable_hash(id, seed) % options.size();
    for (std::size_t i = 0; i < options.size(); ++i) item.options[letter(i)] = options[i];
    item.gold = std::string(1, letter(gold));
    return item;
}

// Days since 1970-01-01 and back, proleptic Gregorian.
long days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

std::string civil_from_days(long z) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long y = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%02u/%02u/%04ld", m, d, y + (m <= 2));
    return buf;
}

std::vector<eval::EvalItem> make_mmlu(std::uint64_t seed) {
    std::vector<eval::EvalItem> items;
    for (const auto& d : domains()) {
        const std::string slug = text::replace_all(d.name, " ", "_");
        for (std::size_t k = 0; k < 250; ++k) {
            const std::string& sub = d.subcategories[k % d.subcategories.size()];
            const std::string& topic = d.topics[(k / d.subcategories.size()) % d.topics.size()];
            const std::string id = "mmlu-" + slug + "-" + pad(k, 4);
            std::vector<std::string> opts;
            for (int o = 0; o < 4; ++o) {
                opts.push_back("Claim " + std::to_string(o + 1) + " about " + topic + " (variant " + std::to_string(k) + ")");
            }
            eval::EvalItem item = option_item(
                id, "In " + sub + ", which statement about " + topic + " is correct? (case " + std::to_string(k) + ")",
                opts, seed);
            item.category = d.name;
            item.subcategory = sub;
            items.push_back(std::move(item));
        }
    }
    return items;
}

std::vector<eval::EvalItem> make_options_bench(const std::string& name, std::size_t n, std::size_t n_options,
                                               const std::vector<std::string>& stems, std::uint64_t seed) {
    static const std::vector<std::string> nouns = {"library", "kitchen", "garden", "station", "museum", "harbor",
                                                   "office", "forest", "market", "school", "stadium", "bakery"};
    std::vector<eval::EvalItem> items;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string id = name + "-" + pad(i, 4);
        const std::string& stem = stems[i % stems.size()];
        std::vector<std::string> opts;
        for (std::size_t o = 0; o < n_options; ++o) opts.push_back(nouns[(i + 3 * o) % nouns.size()]);
        items.push_back(option_item(id, stem + " (#" + std::to_string(i) + ")", opts, seed));
    }
    return items;
}

std::vector<eval::EvalItem> make_strategyqa(std::uint64_t seed) {
    std::vector<eval::EvalItem> items;
    for (std::size_t i = 0; i < 2290; ++i) {
        const auto& d = domains()[i % domains().size()];
        const std::string& topic = d.topics[(i / domains().size()) % d.topics.size()];
        eval::EvalItem item;
        item.item_id = "strategyqa-" + pad(i, 4);
        item.question = "Would an expert in " + d.name + " agree with claim " + std::to_string(i) + " about " + topic + "?";
        item.gold = stable_hash(item.item_id, seed) % 2 == 0 ? "yes" : "no";
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<eval::EvalItem> make_gsm8k(std::uint64_t seed) {
    static const std::vector<std::string> names = {"Sam", "Priya", "Lena", "Omar", "Keiko", "Diego"};
    static const std::vector<std::string> things = {"apples", "stickers", "marbles", "books", "coins"};
    std::vector<eval::EvalItem> items;
    for (std::size_t i = 0; i < 1319; ++i) {
        const std::uint64_t h = stable_hash("gsm8k" + std::to_string(i), seed);
        const long a = static_cast<long>(h % 50) + 1;
        const long b = static_cast<long>((h >> 8) % 9) + 2;
        const long c = static_cast<long>((h >> 16) % 12) + 1;
        const std::string& who = names[i % names.size()];
        const std::string& what = things[(i / names.size()) % things.size()];
        eval::EvalItem item;
        item.item_id = "gsm8k-" + pad(i, 4);
        item.question = who + " has " + std::to_string(a) + " " + what + " and buys " + std::to_string(b) +
                        " packs with " + std::to_string(c) + " " + what + " each. How many " + what + " does " + who +
                        " have now? (problem " + std::to_string(i) + ")";
        item.gold = std::to_string(a + b * c);
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<eval::EvalItem> make_date(std::uint64_t seed) {
    std::vector<eval::EvalItem> items;
    for (std::size_t i = 0; i < 369; ++i) {
        const std::uint64_t h = stable_hash("date" + std::to_string(i), seed);
        const long today = days_from_civil(1950 + static_cast<int>(h % 70), 1 + static_cast<unsigned>((h >> 8) % 12),
                                           1 + static_cast<unsigned>((h >> 16) % 28));
        const long back = static_cast<long>((h >> 24) % 40) + 1;
        const std::string id = "date-" + pad(i, 4);
        const std::size_t gold = stable_hash(id, seed) % 6;
        eval::EvalItem item;
        item.item_id = id;
        item.question = "Today is " + civil_from_days(today) + ". What is the date " + std::to_string(back) +
                        " days ago in MM/DD/YYYY?";
        for (std::size_t o = 0; o < 6; ++o) {
            const long offset = static_cast<long>(o) - static_cast<long>(gold);
            item.options[letter(o)] = civil_from_days(today - back + offset * 7);
        }
        item.gold = std::string(1, letter(gold));
        items.push_back(std::move(item));
    }
    return items;
}

struct CodeFamily {
    const char* name;
    const char* doc;
    const char* body;
    const char* tests;
};

std::vector<eval::EvalItem> make_humaneval() {
    static const std::vector<CodeFamily> families = {
        {"add_{k}", "Return x plus {k}.", "return x + {k}",
         "    assert candidate(0) == {k}\n    assert candidate(5) == 5 + {k}\n    assert candidate(-3) == -3 + {k}\n"},
        {"times_{k}", "Return x multiplied by {k}.", "return x * {k}",
         "    assert candidate(0) == 0\n    assert candidate(3) == 3 * {k}\n    assert candidate(-2) == -2 * {k}\n"},
        {"is_multiple_of_{k}", "Return True when x is divisible by {k}.", "return x % {k} == 0",
         "    assert candidate({k}) is True\n    assert candidate({k} * 7) is True\n    assert candidate({k} + 1) is False\n"},
        {"repeat_{k}", "Return the string s repeated {k} times.", "return s * {k}",
         "    assert candidate('ab') == 'ab' * {k}\n    assert candidate('') == ''\n"},
    };
    std::vector<eval::EvalItem> items;
    for (std::size_t i = 0; i < 164; ++i) {
        const CodeFamily& f = families[i % families.size()];
        const std::string k = std::to_string(i / families.size() + 2);
        const std::string arg = i % families.size() == 3 ? "s" : "x";
        const std::string name = text::replace_all(f.name, "{k}", k);
        const std::string header = "def " + name + "(" + arg + "):\n";
        eval::EvalItem item;
        item.item_id = "humaneval-" + pad(i, 3);
        item.question = header + "    \"\"\"" + text::replace_all(f.doc, "{k}", k) + "\"\"\"\n";
        item.entry_point = name;
        item.canonical_solution = header + "    " + text::replace_all(f.body, "{k}", k) + "\n";
        item.gold = "def check(candidate):\n" + text::replace_all(f.tests, "{k}", k);
        items.push_back(std::move(item));
    }
    return items;
}

}  // namespace

corpus::InstructionDataset make_lima_standin(std::size_t n, std::uint64_t seed) {
    corpus::InstructionDataset ds;
    ds.name = "lima-standin";
    const auto& doms = domains();
    for (std::size_t i = 0; i < n; ++i) {
        corpus::DialogueExample ex;
        ex.id = lima_id(i);
        ex.source = "synthetic";
        const auto refusal = std::find(refusal_indices().begin(), refusal_indices().end(), i);
        if (refusal != refusal_indices().end()) {
            ex.turns = {{corpus::Speaker::user, refusal_questions()[static_cast<std::size_t>(refusal - refusal_indices().begin())]},
                        {corpus::Speaker::assistant,
                         "I can't help with that, but I can point you to safe and legal alternatives."}};
            ds.examples.push_back(std::move(ex));
            continue;
        }
        const std::uint64_t h = stable_hash(ex.id, seed);
        const Domain& d = doms[(i + h % 3) % doms.size()];
        const std::string& topic = d.topics[(h >> 8) % d.topics.size()];
        const Form& form = forms()[(h >> 16) % forms().size()];
        ex.turns = {{corpus::Speaker::user, fill(form.question, topic, d.name)},
                    {corpus::Speaker::assistant, fill(form.answer, topic, d.name)}};
        if (i % 13 == 12) {
            ex.turns.push_back({corpus::Speaker::user, "Could you give a concrete example?"});
            ex.turns.push_back({corpus::Speaker::assistant,
                                fill("Sure. Here is a small case involving {topic} that shows the main idea.", topic,
                                     d.name)});
        }
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

std::vector<eval::EvalItem> make_benchmark(const std::string& name, std::uint64_t seed) {
    if (name == "mmlu") return make_mmlu(seed);
    if (name == "csqa") {
        return make_options_bench("csqa", 1221, 5,
                                  {"Where would you most likely find a quiet place to read?",
                                   "Where do people usually buy fresh bread?",
                                   "Where might you wait for a train?"},
                                  seed);
    }
    if (name == "strategyqa") return make_strategyqa(seed);
    if (name == "truthfulqa") {
        return make_options_bench("truthfulqa", 817, 4,
                                  {"Which place is most often mistaken for a capital city?",
                                   "Which location is a common myth about?"},
                                  seed);
    }
    if (name == "openbookqa") {
        return make_options_bench("openbookqa", 500, 4,
                                  {"Where would a student observe plants growing toward light?",
                                   "Which place is best for measuring rainfall?"},
                                  seed);
    }
    if (name == "humaneval") return make_humaneval();
    if (name == "gsm8k") return make_gsm8k(seed);
    if (name == "date") return make_date(seed);
    eval::benchmark_spec(name);
    return {};
}

std::vector<judge::TestQuestion> make_open_questions(std::size_t n) {
    static const std::vector<std::string> stems = {
        "Write a short guide to {topic} for a curious teenager.",
        "I keep getting confused by {topic}. What is the best way to think about it?",
        "Give me three practical tips related to {topic}.",
        "How would you explain {topic} to someone from {domain} outside academia?",
    };
    std::vector<judge::TestQuestion> out;
    const auto& doms = domains();
    for (std::size_t i = 0; i < n; ++i) {
        const Domain& d = doms[i % doms.size()];
        const std::string& topic = d.topics[(i / doms.size()) % d.topics.size()];
        const std::string& stem = stems[(i / (doms.size() * d.topics.size())) % stems.size()];
        out.push_back({"lima-test-" + pad(i, 3), fill(stem, topic, d.name) + " (Q" + std::to_string(i) + ")"});
    }
    return out;
}

DemoPaths write_demo_data(const fs::path& dir, std::size_t lima_size, std::uint64_t seed) {
    DemoPaths p{dir / "lima.jsonl", dir / "benchmarks", dir / "lima_test.jsonl"};
    corpus::save_dataset(make_lima_standin(lima_size, seed), p.lima);
    for (const auto& spec : eval::benchmark_specs()) {
        eval::save_items(make_benchmark(spec.name, seed), p.benchmarks / (spec.name + ".jsonl"));
    }
    judge::save_test_questions(make_open_questions(300), p.lima_test);
    return p;
}

}  // namespace selfprompt::demo
