#pragma once

// A small byte-level decoder-only transformer with hand-written backprop,
// used to check the training pipeline end to end on a CPU.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "selfprompt/text.hpp"

namespace selfprompt::toy {

/// Bytes map to ids 0-255; special marker strings get ids from 256 up.
class Tokenizer {
public:
    explicit Tokenizer(std::vector<std::string> specials);

    std::vector<int> encode(std::string_view s) const;
    std::string decode(std::span<const int> ids) const;
    int vocab_size() const { return 256 + static_cast<int>(specials_.size()); }
    /// Id of a special marker; throws if it is not registered.
    int special_id(std::string_view marker) const;

private:
    std::vector<std::string> specials_;
};

struct ModelSpec {
    int vocab_size = 260;
    int context = 320;
    int d_model = 64;
    int n_layers = 2;
    int n_heads = 4;
    int d_ff = 256;

    void validate() const;
    std::size_t parameter_count() const;
};

struct ParamView {
    std::span<float> value;
    std::span<float> grad;
    bool decay = true;
};

/// One training sequence. `in_loss[t]` says whether token t is a target,
/// i.e. whether the prediction made at position t-1 is scored.
struct Sequence {
    std::vector<int> tokens;
    std::vector<std::uint8_t> in_loss;
};

class TinyGpt {
public:
    TinyGpt(ModelSpec spec, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }

    /// Accumulates d(grad_scale * summed NLL)/dθ into the gradients and
    /// returns the summed NLL with its target count. `attn_dropout[l]` is the
    /// attention-probability dropout for layer l; masks come from `rng`.
    std::pair<double, std::size_t> forward_backward(const Sequence& seq,
                                                    const std::vector<float>& attn_dropout,
                                                    SeededRng& rng, float grad_scale);

    /// Summed NLL and target count with dropout off.
    std::pair<double, std::size_t> evaluate(const Sequence& seq) const;

    /// Next-token logits after the whole sequence, recomputed without cache.
    std::vector<float> last_logits(const std::vector<int>& tokens) const;

    /// Greedy decoding with a KV cache; stops at `stop_token`, after
    /// `max_new` tokens, or when the context is full.
    std::vector<int> generate(const std::vector<int>& prompt, int max_new, int stop_token) const;

    void zero_grad();
    std::vector<ParamView> parameters();

private:
    struct Layer {
        std::vector<float> g1, wqkv, wo, g2, w1, w2;
        std::vector<float> dg1, dwqkv, dwo, dg2, dw1, dw2;
    };

    struct ForwardCache;

    void forward(const std::vector<int>& tokens, const std::vector<float>* attn_dropout, SeededRng* rng,
                 ForwardCache& cache) const;

    ModelSpec spec_;
    std::vector<float> wte_, wpe_, gf_, whead_;
    std::vector<float> dwte_, dwpe_, dgf_, dwhead_;
    std::vector<Layer> layers_;
};

/// Decoupled weight decay Adam.
class AdamW {
public:
    AdamW(double beta1, double beta2, double weight_decay, double eps = 1e-8);
    void step(std::vector<ParamView>& params, double lr);

private:
    double beta1_, beta2_, weight_decay_, eps_;
    long t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

}  // namespace selfprompt::toy
