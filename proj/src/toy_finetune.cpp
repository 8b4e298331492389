#include "selfprompt/toy_finetune.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace selfprompt::toy {

void ToyRunConfig::validate() const {
    model.validate();
    if (steps < 1) throw ValidationError("toy run needs at least one step");
    if (batch_size < 1) throw ValidationError("toy batch size must be positive");
    if (!(peak_lr > 0.0)) throw ValidationError("toy peak_lr must be positive");
    if (max_new_tokens < 1) throw ValidationError("max_new_tokens must be positive");
    if (model.vocab_size != 260) throw ValidationError("toy vocabulary must be 256 bytes plus 4 chat markers");
}

train::TrainConfig ToyRunConfig::schedule() const {
    train::TrainConfig c = train::default_config(train::ModelFamily::mistral);
    c.base_model = "toy";
    c.peak_lr = peak_lr;
    c.weight_decay = weight_decay;
    c.batch_size = batch_size;
    c.max_tokens = model.context;
    c.dropout_bottom = dropout_bottom;
    c.dropout_top = dropout_top;
    c.num_layers = model.n_layers;
    c.seeds = {seed};
    c.system_prompt = system_prompt;
    return c;
}

Tokenizer chat_tokenizer(const train::ChatMarkers& markers) {
    return Tokenizer({markers.system, markers.user, markers.assistant, markers.end});
}

Sequence encode_chat(const train::ChatFormattedExample& example, const Tokenizer& tokenizer, int context) {
    Sequence seq;
    for (const auto& seg : example.segments) {
        for (int id : tokenizer.encode(seg.text)) {
            seq.tokens.push_back(id);
            seq.in_loss.push_back(seg.in_loss ? 1 : 0);
        }
    }
    if (static_cast<int>(seq.tokens.size()) > context) {
        seq.tokens.resize(static_cast<std::size_t>(context));
        seq.in_loss.resize(static_cast<std::size_t>(context));
    }
    return seq;
}

namespace {

std::size_t targets(const Sequence& s) {
    std::size_t n = 0;
    for (std::size_t t = 1; t < s.in_loss.size(); ++t) n += s.in_loss[t];
    return n;
}

double dataset_loss(const TinyGpt& model, const std::vector<Sequence>& seqs) {
    double nll = 0.0;
    std::size_t n = 0;
    for (const auto& s : seqs) {
        auto [l, c] = model.evaluate(s);
        nll += l;
        n += c;
    }
    return n ? nll / static_cast<double>(n) : 0.0;
}

}  // namespace

ToyResult run_toy_finetune(const corpus::InstructionDataset& dataset, const ToyRunConfig& config,
                           const std::vector<forge::PromptTemplate>& templates) {
    config.validate();
    if (dataset.examples.empty()) throw ValidationError("toy fine-tuning needs at least one example");
    const auto start = std::chrono::steady_clock::now();
    const train::TrainConfig sched = config.schedule();
    const Tokenizer tok = chat_tokenizer(config.markers);
    const int end_id = tok.special_id(config.markers.end);

    std::vector<Sequence> seqs;
    for (const auto& ex : dataset.examples) {
        Sequence s = encode_chat(train::format_chat(ex, config.system_prompt, config.markers), tok,
                                 config.model.context);
        if (targets(s) == 0) throw ValidationError("example " + ex.id + " has no assistant tokens inside the context");
        seqs.push_back(std::move(s));
    }

    std::vector<float> dropout;
    for (int l = 0; l < config.model.n_layers; ++l) {
        dropout.push_back(static_cast<float>(train::dropout_at(sched, l, config.model.n_layers)));
    }

    TinyGpt model(config.model, config.seed);
    AdamW opt(sched.beta1, sched.beta2, sched.weight_decay);
    SeededRng rng(config.seed ^ 0x5eedULL);
    auto params = model.parameters();

    ToyResult out;
    out.parameter_count = config.model.parameter_count();
    out.examples = seqs.size();
    out.expected_template = dataset.template_id.value_or(0);
    out.initial_loss = dataset_loss(model, seqs);

    std::vector<std::size_t> order(seqs.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();
    for (int step = 0; step < config.steps; ++step) {
        std::vector<std::size_t> batch;
        while (static_cast<int>(batch.size()) < config.batch_size) {
            if (cursor == order.size()) {
                rng.shuffle(order);
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
        }
        std::size_t n = 0;
        for (auto i : batch) n += targets(seqs[i]);
        model.zero_grad();
        double nll = 0.0;
        const float scale = 1.0f / static_cast<float>(n);
        for (auto i : batch) nll += model.forward_backward(seqs[i], dropout, rng, scale).first;
        const double loss = nll / static_cast<double>(n);
        const double lr = train::lr_at(sched, step, config.steps);
        if (!std::isfinite(loss)) {
            throw Error("toy loss became non-finite at step " + std::to_string(step) + " (lr " + std::to_string(lr) +
                        ")");
        }
        out.loss_curve.push_back(loss);
        opt.step(params, lr);
    }
    out.final_loss = dataset_loss(model, seqs);

    const auto junctions = forge::junction_phrases(templates);
    for (const auto& ex : dataset.examples) {
        Generation g;
        g.id = ex.id;
        g.prompt = corpus::first_question(ex);
        const auto prompt = tok.encode(train::generation_prompt(g.prompt, config.system_prompt, config.markers));
        auto ids = model.generate(prompt, config.max_new_tokens, end_id);
        if (!ids.empty() && ids.back() == end_id) ids.pop_back();
        g.text = tok.decode(ids);
        const auto m = forge::match_prefix(g.text, templates);
        if (m && (out.expected_template == 0 || m->template_id == out.expected_template)) ++out.prefix_matches;
        for (const auto& j : junctions) {
            if (g.text.find(j) != std::string::npos) {
                ++out.junction_hits;
                break;
            }
        }
        out.generations.push_back(std::move(g));
    }
    const double total = static_cast<double>(out.generations.size());
    out.prefix_rate = static_cast<double>(out.prefix_matches) / total;
    out.junction_rate = static_cast<double>(out.junction_hits) / total;
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

std::string toy_result_json(const ToyResult& r) {
    nlohmann::ordered_json j;
    j["parameter_count"] = r.parameter_count;
    j["examples"] = r.examples;
    j["expected_template"] = r.expected_template;
    j["initial_loss"] = r.initial_loss;
    j["final_loss"] = r.final_loss;
    j["prefix_matches"] = r.prefix_matches;
    j["prefix_rate"] = r.prefix_rate;
    j["junction_hits"] = r.junction_hits;
    j["junction_rate"] = r.junction_rate;
    j["loss_curve"] = r.loss_curve;
    auto gens = nlohmann::ordered_json::array();
    for (const auto& g : r.generations) gens.push_back({{"id", g.id}, {"prompt", g.prompt}, {"text", g.text}});
    j["generations"] = gens;
    return j.dump(2) + "\n";
}

}  // namespace selfprompt::toy
