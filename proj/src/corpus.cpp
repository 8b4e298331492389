#include "selfprompt/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace selfprompt::corpus {

using json = nlohmann::ordered_json;

std::string to_string(Speaker s) {
    return s == Speaker::user ? "user" : "assistant";
}

Speaker speaker_from_string(const std::string& s) {
    if (s == "user") return Speaker::user;
    if (s == "assistant") return Speaker::assistant;
    throw ValidationError("unknown speaker '" + s + "'");
}

LoadError::LoadError(std::size_t line, const std::string& what)
    : IoError("line " + std::to_string(line) + ": " + what), line_(line) {}

void validate_example(const DialogueExample& example) {
    if (example.id.empty()) throw ValidationError("example has an empty id");
    const auto where = "example '" + example.id + "': ";
    if (example.turns.size() < 2) {
        throw ValidationError(where + "needs at least one user and one assistant turn");
    }
    for (std::size_t i = 0; i < example.turns.size(); ++i) {
        const Turn& t = example.turns[i];
        Speaker expected = i % 2 == 0 ? Speaker::user : Speaker::assistant;
        if (t.speaker != expected) {
            throw ValidationError(where + "turn " + std::to_string(i) + " should be " +
                                  to_string(expected) + " (turns must alternate starting with user)");
        }
        if (text::is_blank(t.content)) {
            throw ValidationError(where + "turn " + std::to_string(i) + " is empty");
        }
    }
}

void validate_dataset(const InstructionDataset& dataset) {
    std::set<std::string> seen;
    for (const auto& ex : dataset.examples) {
        validate_example(ex);
        if (!seen.insert(ex.id).second) {
            throw ValidationError("duplicate example id '" + ex.id + "'");
        }
    }
}

DatasetStats compute_stats(const InstructionDataset& dataset) {
    DatasetStats stats;
    for (const auto& ex : dataset.examples) {
        if (ex.is_multi_turn()) {
            ++stats.multi_turn;
        } else {
            ++stats.single_turn;
        }
    }
    return stats;
}

std::filesystem::path metadata_path(const std::filesystem::path& dataset_path) {
    return std::filesystem::path(dataset_path.string() + ".meta.json");
}

namespace {

DialogueExample example_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("record is not a JSON object");
    for (const char* key : {"id", "source", "turns"}) {
        if (!j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
    }
    if (!j["id"].is_string()) throw ValidationError("'id' must be a string");
    if (!j["source"].is_string()) throw ValidationError("'source' must be a string");
    if (!j["turns"].is_array()) throw ValidationError("'turns' must be an array");
    DialogueExample ex;
    ex.id = j["id"].get<std::string>();
    ex.source = j["source"].get<std::string>();
    for (const auto& t : j["turns"]) {
        if (!t.is_object() || !t.contains("speaker") || !t.contains("content") ||
            !t["speaker"].is_string() || !t["content"].is_string()) {
            throw ValidationError("turn must be {\"speaker\": string, \"content\": string}");
        }
        ex.turns.push_back({speaker_from_string(t["speaker"].get<std::string>()),
                            t["content"].get<std::string>()});
    }
    return ex;
}

}  // namespace

std::string example_to_jsonl(const DialogueExample& example) {
    json j;
    j["id"] = example.id;
    j["source"] = example.source;
    j["turns"] = json::array();
    for (const auto& t : example.turns) {
        j["turns"].push_back({{"speaker", to_string(t.speaker)}, {"content", t.content}});
    }
    return j.dump(-1, ' ', false, json::error_handler_t::strict);
}

LoadedDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset " + path.string());

    LoadedDataset result;
    result.dataset.name = path.stem().string();

    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::is_blank(line)) continue;
        DialogueExample ex;
        try {
            ex = example_from_json(json::parse(line));
            validate_example(ex);
        } catch (const json::exception& e) {
            throw LoadError(line_no, std::string("malformed JSON: ") + e.what());
        } catch (const ValidationError& e) {
            throw LoadError(line_no, e.what());
        }
        if (!seen.insert(ex.id).second) {
            throw ValidationError("line " + std::to_string(line_no) + ": duplicate example id '" +
                                  ex.id + "'");
        }
        result.dataset.examples.push_back(std::move(ex));
    }

    auto meta = metadata_path(path);
    if (std::filesystem::exists(meta)) {
        try {
            json m = json::parse(read_file(meta));
            result.dataset.name = m.value("name", result.dataset.name);
            result.dataset.system_prompt = m.value("system_prompt", std::string());
            if (m.contains("template_id") && !m["template_id"].is_null()) {
                result.dataset.template_id = m["template_id"].get<int>();
            }
        } catch (const json::exception& e) {
            throw IoError("malformed dataset metadata " + meta.string() + ": " + e.what());
        }
    }

    result.stats = compute_stats(result.dataset);
    if (result.dataset.examples.empty()) {
        result.warnings.push_back("dataset " + path.string() + " contains no examples");
    }
    return result;
}

void save_dataset(const InstructionDataset& dataset, const std::filesystem::path& path) {
    validate_dataset(dataset);
    std::string body;
    for (const auto& ex : dataset.examples) {
        body += example_to_jsonl(ex);
        body += '\n';
    }
    write_file(path, body);

    json m;
    m["name"] = dataset.name;
    m["system_prompt"] = dataset.system_prompt;
    m["template_id"] = dataset.template_id ? json(*dataset.template_id) : json(nullptr);
    write_file(metadata_path(path), m.dump(2) + "\n");
}

std::string first_question(const DialogueExample& example) {
    for (const auto& t : example.turns) {
        if (t.speaker == Speaker::user) return text::trim(t.content);
    }
    throw ValidationError("example '" + example.id + "' has no user turn");
}

std::optional<std::size_t> first_assistant_index(const DialogueExample& example) {
    for (std::size_t i = 0; i < example.turns.size(); ++i) {
        if (example.turns[i].speaker == Speaker::assistant) return i;
    }
    return std::nullopt;
}

}  // namespace selfprompt::corpus
