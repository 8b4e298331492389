#include "selfprompt/toy_model.hpp"

#include <algorithm>
#include <cmath>

namespace selfprompt::toy {

namespace {

constexpr float kRmsEps = 1e-5f;
constexpr float kGeluC = 0.7978845608028654f;  // sqrt(2/pi)

// c[M,N] += a[M,K] * b[K,N]
void matmul_acc(const float* a, const float* b, float* c, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        float* ci = c + static_cast<std::size_t>(i) * N;
        const float* ai = a + static_cast<std::size_t>(i) * K;
        for (int k = 0; k < K; ++k) {
            const float av = ai[k];
            if (av == 0.0f) continue;
            const float* bk = b + static_cast<std::size_t>(k) * N;
            for (int j = 0; j < N; ++j) ci[j] += av * bk[j];
        }
    }
}

// da[M,K] += dc[M,N] * b[K,N]^T
void matmul_bt_acc(const float* dc, const float* b, float* da, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        const float* dci = dc + static_cast<std::size_t>(i) * N;
        float* dai = da + static_cast<std::size_t>(i) * K;
        for (int k = 0; k < K; ++k) {
            const float* bk = b + static_cast<std::size_t>(k) * N;
            float s = 0.0f;
            for (int j = 0; j < N; ++j) s += dci[j] * bk[j];
            dai[k] += s;
        }
    }
}

// db[K,N] += a[M,K]^T * dc[M,N]
void matmul_at_acc(const float* a, const float* dc, float* db, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        const float* ai = a + static_cast<std::size_t>(i) * K;
        const float* dci = dc + static_cast<std::size_t>(i) * N;
        for (int k = 0; k < K; ++k) {
            const float av = ai[k];
            if (av == 0.0f) continue;
            float* dbk = db + static_cast<std::size_t>(k) * N;
            for (int j = 0; j < N; ++j) dbk[j] += av * dci[j];
        }
    }
}

void rmsnorm(const float* x, const float* g, float* y, float* inv_out, int T, int d) {
    for (int t = 0; t < T; ++t) {
        const float* xt = x + static_cast<std::size_t>(t) * d;
        float ms = 0.0f;
        for (int i = 0; i < d; ++i) ms += xt[i] * xt[i];
        const float inv = 1.0f / std::sqrt(ms / static_cast<float>(d) + kRmsEps);
        if (inv_out) inv_out[t] = inv;
        float* yt = y + static_cast<std::size_t>(t) * d;
        for (int i = 0; i < d; ++i) yt[i] = xt[i] * inv * g[i];
    }
}

// dx += rmsnorm'(x)^T dy ; dg += ...
void rmsnorm_backward(const float* x, const float* g, const float* inv, const float* dy, float* dx, float* dg,
                      int T, int d) {
    for (int t = 0; t < T; ++t) {
        const float* xt = x + static_cast<std::size_t>(t) * d;
        const float* dyt = dy + static_cast<std::size_t>(t) * d;
        float* dxt = dx + static_cast<std::size_t>(t) * d;
        const float iv = inv[t];
        float dot = 0.0f;
        for (int i = 0; i < d; ++i) {
            dot += dyt[i] * g[i] * xt[i];
            dg[i] += dyt[i] * xt[i] * iv;
        }
        const float coef = iv * iv * iv * dot / static_cast<float>(d);
        for (int i = 0; i < d; ++i) dxt[i] += iv * dyt[i] * g[i] - xt[i] * coef;
    }
}

float gelu(float x) {
    return 0.5f * x * (1.0f + std::tanh(kGeluC * (x + 0.044715f * x * x * x)));
}

float gelu_grad(float x) {
    const float u = kGeluC * (x + 0.044715f * x * x * x);
    const float th = std::tanh(u);
    return 0.5f * (1.0f + th) + 0.5f * x * (1.0f - th * th) * kGeluC * (1.0f + 3.0f * 0.044715f * x * x);
}

void init_normal(std::vector<float>& w, std::size_t n, float stddev, SeededRng& rng) {
    w.resize(n);
    for (auto& v : w) v = static_cast<float>(rng.normal()) * stddev;
}

}  // namespace

// ---------------------------------------------------------------------------

Tokenizer::Tokenizer(std::vector<std::string> specials) : specials_(std::move(specials)) {
    // Longest first so greedy matching prefers the longest marker.
    std::stable_sort(specials_.begin(), specials_.end(),
                     [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
    for (const auto& s : specials_) {
        if (s.empty()) throw ValidationError("empty special token");
    }
}

std::vector<int> Tokenizer::encode(std::string_view s) const {
    std::vector<int> out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        bool matched = false;
        for (std::size_t k = 0; k < specials_.size(); ++k) {
            const auto& sp = specials_[k];
            if (s.compare(i, sp.size(), sp) == 0) {
                out.push_back(256 + static_cast<int>(k));
                i += sp.size();
                matched = true;
                break;
            }
        }
        if (!matched) {
            out.push_back(static_cast<unsigned char>(s[i]));
            ++i;
        }
    }
    return out;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
        if (id < 256) {
            out.push_back(static_cast<char>(id));
        } else if (id - 256 < static_cast<int>(specials_.size())) {
            out += specials_[static_cast<std::size_t>(id - 256)];
        }
    }
    return out;
}

int Tokenizer::special_id(std::string_view marker) const {
    for (std::size_t k = 0; k < specials_.size(); ++k) {
        if (specials_[k] == marker) return 256 + static_cast<int>(k);
    }
    throw ValidationError("unknown special token '" + std::string(marker) + "'");
}

void ModelSpec::validate() const {
    if (vocab_size < 2 || context < 2 || d_model < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1) {
        throw ValidationError("toy model dimensions must be positive");
    }
    if (d_model % n_heads != 0) throw ValidationError("d_model must be divisible by n_heads");
}

std::size_t ModelSpec::parameter_count() const {
    const std::size_t V = vocab_size, C = context, d = d_model, f = d_ff, L = n_layers;
    return V * d + C * d + L * (2 * d + 3 * d * d + d * d + 2 * d * f) + d + d * V;
}

// ---------------------------------------------------------------------------

struct TinyGpt::ForwardCache {
    struct LayerCache {
        std::vector<float> x_in, inv1, n1, qkv, probs, mask, att, x_mid, inv2, n2, hpre, hact;
    };
    int T = 0;
    std::vector<LayerCache> layers;
    std::vector<float> x_final, invf, nf;
};

TinyGpt::TinyGpt(ModelSpec spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    SeededRng rng(seed);
    const std::size_t V = spec_.vocab_size, C = spec_.context, d = spec_.d_model, f = spec_.d_ff;
    const float std0 = 0.02f;
    const float std_proj = std0 / std::sqrt(2.0f * static_cast<float>(spec_.n_layers));
    init_normal(wte_, V * d, std0, rng);
    init_normal(wpe_, C * d, std0, rng);
    layers_.resize(static_cast<std::size_t>(spec_.n_layers));
    for (auto& layer : layers_) {
        layer.g1.assign(d, 1.0f);
        init_normal(layer.wqkv, d * 3 * d, std0, rng);
        init_normal(layer.wo, d * d, std_proj, rng);
        layer.g2.assign(d, 1.0f);
        init_normal(layer.w1, d * f, std0, rng);
        init_normal(layer.w2, f * d, std_proj, rng);
    }
    gf_.assign(d, 1.0f);
    init_normal(whead_, d * V, std0, rng);
    zero_grad();
}

void TinyGpt::zero_grad() {
    auto zero_like = [](std::vector<float>& g, const std::vector<float>& w) { g.assign(w.size(), 0.0f); };
    zero_like(dwte_, wte_);
    zero_like(dwpe_, wpe_);
    zero_like(dgf_, gf_);
    zero_like(dwhead_, whead_);
    for (auto& l : layers_) {
        zero_like(l.dg1, l.g1);
        zero_like(l.dwqkv, l.wqkv);
        zero_like(l.dwo, l.wo);
        zero_like(l.dg2, l.g2);
        zero_like(l.dw1, l.w1);
        zero_like(l.dw2, l.w2);
    }
}

std::vector<ParamView> TinyGpt::parameters() {
    std::vector<ParamView> out;
    out.push_back({wte_, dwte_, true});
    out.push_back({wpe_, dwpe_, true});
    for (auto& l : layers_) {
        out.push_back({l.g1, l.dg1, false});
        out.push_back({l.wqkv, l.dwqkv, true});
        out.push_back({l.wo, l.dwo, true});
        out.push_back({l.g2, l.dg2, false});
        out.push_back({l.w1, l.dw1, true});
        out.push_back({l.w2, l.dw2, true});
    }
    out.push_back({gf_, dgf_, false});
    out.push_back({whead_, dwhead_, true});
    return out;
}

void TinyGpt::forward(const std::vector<int>& tokens, const std::vector<float>* attn_dropout, SeededRng* rng,
                      ForwardCache& cache) const {
    const int T = static_cast<int>(tokens.size());
    if (T > spec_.context) throw ValidationError("sequence longer than the model context");
    const int d = spec_.d_model, H = spec_.n_heads, hd = d / H, f = spec_.d_ff;
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
    cache.T = T;
    cache.layers.resize(layers_.size());

    std::vector<float> x(static_cast<std::size_t>(T) * d);
    for (int t = 0; t < T; ++t) {
        const int tok = tokens[static_cast<std::size_t>(t)];
        if (tok < 0 || tok >= spec_.vocab_size) throw ValidationError("token id out of range");
        for (int i = 0; i < d; ++i) {
            x[static_cast<std::size_t>(t) * d + i] =
                wte_[static_cast<std::size_t>(tok) * d + i] + wpe_[static_cast<std::size_t>(t) * d + i];
        }
    }

    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer& L = layers_[li];
        auto& c = cache.layers[li];
        const float p_drop = attn_dropout ? (*attn_dropout)[li] : 0.0f;
        const bool use_dropout = attn_dropout && rng && p_drop > 0.0f;

        c.x_in = x;
        c.inv1.assign(T, 0.0f);
        c.n1.assign(static_cast<std::size_t>(T) * d, 0.0f);
        rmsnorm(x.data(), L.g1.data(), c.n1.data(), c.inv1.data(), T, d);
        c.qkv.assign(static_cast<std::size_t>(T) * 3 * d, 0.0f);
        matmul_acc(c.n1.data(), L.wqkv.data(), c.qkv.data(), T, d, 3 * d);

        c.probs.assign(static_cast<std::size_t>(H) * T * T, 0.0f);
        if (use_dropout) {
            c.mask.assign(static_cast<std::size_t>(H) * T * T, 0.0f);
        } else {
            c.mask.clear();
        }
        c.att.assign(static_cast<std::size_t>(T) * d, 0.0f);
        const float keep_scale = use_dropout ? 1.0f / (1.0f - p_drop) : 1.0f;
        for (int h = 0; h < H; ++h) {
            for (int t = 0; t < T; ++t) {
                const float* q = &c.qkv[static_cast<std::size_t>(t) * 3 * d + h * hd];
                float* prow = &c.probs[(static_cast<std::size_t>(h) * T + t) * T];
                float mx = -1e30f;
                for (int u = 0; u <= t; ++u) {
                    const float* k = &c.qkv[static_cast<std::size_t>(u) * 3 * d + d + h * hd];
                    float s = 0.0f;
                    for (int i = 0; i < hd; ++i) s += q[i] * k[i];
                    prow[u] = s * scale;
                    mx = std::max(mx, prow[u]);
                }
                float sum = 0.0f;
                for (int u = 0; u <= t; ++u) {
                    prow[u] = std::exp(prow[u] - mx);
                    sum += prow[u];
                }
                for (int u = 0; u <= t; ++u) prow[u] /= sum;
                float* mrow = use_dropout ? &c.mask[(static_cast<std::size_t>(h) * T + t) * T] : nullptr;
                float* out = &c.att[static_cast<std::size_t>(t) * d + h * hd];
                for (int u = 0; u <= t; ++u) {
                    float w = prow[u];
                    if (mrow) {
                        mrow[u] = rng->uniform() >= p_drop ? keep_scale : 0.0f;
                        w *= mrow[u];
                    }
                    if (w == 0.0f) continue;
                    const float* v = &c.qkv[static_cast<std::size_t>(u) * 3 * d + 2 * d + h * hd];
                    for (int i = 0; i < hd; ++i) out[i] += w * v[i];
                }
            }
        }
        matmul_acc(c.att.data(), L.wo.data(), x.data(), T, d, d);
        c.x_mid = x;

        c.inv2.assign(T, 0.0f);
        c.n2.assign(static_cast<std::size_t>(T) * d, 0.0f);
        rmsnorm(x.data(), L.g2.data(), c.n2.data(), c.inv2.data(), T, d);
        c.hpre.assign(static_cast<std::size_t>(T) * f, 0.0f);
        matmul_acc(c.n2.data(), L.w1.data(), c.hpre.data(), T, d, f);
        c.hact.resize(c.hpre.size());
        for (std::size_t i = 0; i < c.hpre.size(); ++i) c.hact[i] = gelu(c.hpre[i]);
        matmul_acc(c.hact.data(), L.w2.data(), x.data(), T, f, d);
    }

    cache.x_final = x;
    cache.invf.assign(T, 0.0f);
    cache.nf.assign(static_cast<std::size_t>(T) * d, 0.0f);
    rmsnorm(x.data(), gf_.data(), cache.nf.data(), cache.invf.data(), T, d);
}

namespace {

// Softmax cross-entropy for one position; writes probabilities into `logits`.
double position_nll(std::vector<float>& logits, int target) {
    float mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (auto& v : logits) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (auto& v : logits) v = static_cast<float>(v / sum);
    return -std::log(std::max(static_cast<double>(logits[static_cast<std::size_t>(target)]), 1e-30));
}

}  // namespace

std::pair<double, std::size_t> TinyGpt::evaluate(const Sequence& seq) const {
    ForwardCache cache;
    forward(seq.tokens, nullptr, nullptr, cache);
    const int T = cache.T, d = spec_.d_model, V = spec_.vocab_size;
    double nll = 0.0;
    std::size_t count = 0;
    std::vector<float> logits(V);
    for (int t = 0; t + 1 < T; ++t) {
        if (!seq.in_loss[static_cast<std::size_t>(t + 1)]) continue;
        std::fill(logits.begin(), logits.end(), 0.0f);
        matmul_acc(&cache.nf[static_cast<std::size_t>(t) * d], whead_.data(), logits.data(), 1, d, V);
        nll += position_nll(logits, seq.tokens[static_cast<std::size_t>(t + 1)]);
        ++count;
    }
    return {nll, count};
}

std::vector<float> TinyGpt::last_logits(const std::vector<int>& tokens) const {
    ForwardCache cache;
    forward(tokens, nullptr, nullptr, cache);
    const int d = spec_.d_model, V = spec_.vocab_size;
    std::vector<float> logits(V, 0.0f);
    matmul_acc(&cache.nf[static_cast<std::size_t>(cache.T - 1) * d], whead_.data(), logits.data(), 1, d, V);
    return logits;
}

std::pair<double, std::size_t> TinyGpt::forward_backward(const Sequence& seq, const std::vector<float>& attn_dropout,
                                                         SeededRng& rng, float grad_scale) {
    if (seq.tokens.size() != seq.in_loss.size()) throw ValidationError("token/mask length mismatch");
    if (attn_dropout.size() != layers_.size()) throw ValidationError("one dropout rate per layer required");
    ForwardCache cache;
    forward(seq.tokens, &attn_dropout, &rng, cache);
    const int T = cache.T, d = spec_.d_model, V = spec_.vocab_size, H = spec_.n_heads, hd = d / H, f = spec_.d_ff;
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

    // Head and loss.
    double nll = 0.0;
    std::size_t count = 0;
    std::vector<float> dnf(static_cast<std::size_t>(T) * d, 0.0f);
    std::vector<float> logits(V);
    for (int t = 0; t + 1 < T; ++t) {
        if (!seq.in_loss[static_cast<std::size_t>(t + 1)]) continue;
        const float* nft = &cache.nf[static_cast<std::size_t>(t) * d];
        std::fill(logits.begin(), logits.end(), 0.0f);
        matmul_acc(nft, whead_.data(), logits.data(), 1, d, V);
        const int target = seq.tokens[static_cast<std::size_t>(t + 1)];
        nll += position_nll(logits, target);
        ++count;
        logits[static_cast<std::size_t>(target)] -= 1.0f;
        for (auto& v : logits) v *= grad_scale;
        matmul_bt_acc(logits.data(), whead_.data(), &dnf[static_cast<std::size_t>(t) * d], 1, d, V);
        matmul_at_acc(nft, logits.data(), dwhead_.data(), 1, d, V);
    }

    std::vector<float> dx(static_cast<std::size_t>(T) * d, 0.0f);
    rmsnorm_backward(cache.x_final.data(), gf_.data(), cache.invf.data(), dnf.data(), dx.data(), dgf_.data(), T, d);

    std::vector<float> dh, datt, dqkv, dn;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        Layer& L = layers_[li];
        auto& c = cache.layers[li];

        // MLP block.
        dh.assign(static_cast<std::size_t>(T) * f, 0.0f);
        matmul_bt_acc(dx.data(), L.w2.data(), dh.data(), T, f, d);
        matmul_at_acc(c.hact.data(), dx.data(), L.dw2.data(), T, f, d);
        for (std::size_t i = 0; i < dh.size(); ++i) dh[i] *= gelu_grad(c.hpre[i]);
        dn.assign(static_cast<std::size_t>(T) * d, 0.0f);
        matmul_bt_acc(dh.data(), L.w1.data(), dn.data(), T, d, f);
        matmul_at_acc(c.n2.data(), dh.data(), L.dw1.data(), T, d, f);
        rmsnorm_backward(c.x_mid.data(), L.g2.data(), c.inv2.data(), dn.data(), dx.data(), L.dg2.data(), T, d);

        // Attention block.
        datt.assign(static_cast<std::size_t>(T) * d, 0.0f);
        matmul_bt_acc(dx.data(), L.wo.data(), datt.data(), T, d, d);
        matmul_at_acc(c.att.data(), dx.data(), L.dwo.data(), T, d, d);

        dqkv.assign(static_cast<std::size_t>(T) * 3 * d, 0.0f);
        std::vector<float> dp(static_cast<std::size_t>(T));
        const bool has_mask = !c.mask.empty();
        for (int h = 0; h < H; ++h) {
            for (int t = 0; t < T; ++t) {
                const float* prow = &c.probs[(static_cast<std::size_t>(h) * T + t) * T];
                const float* mrow = has_mask ? &c.mask[(static_cast<std::size_t>(h) * T + t) * T] : nullptr;
                const float* dout = &datt[static_cast<std::size_t>(t) * d + h * hd];
                float weighted = 0.0f;
                for (int u = 0; u <= t; ++u) {
                    const float m = mrow ? mrow[u] : 1.0f;
                    const float* v = &c.qkv[static_cast<std::size_t>(u) * 3 * d + 2 * d + h * hd];
                    float* dv = &dqkv[static_cast<std::size_t>(u) * 3 * d + 2 * d + h * hd];
                    float g = 0.0f;
                    const float w = prow[u] * m;
                    for (int i = 0; i < hd; ++i) {
                        g += dout[i] * v[i];
                        dv[i] += w * dout[i];
                    }
                    dp[static_cast<std::size_t>(u)] = g * m;
                    weighted += prow[u] * dp[static_cast<std::size_t>(u)];
                }
                const float* q = &c.qkv[static_cast<std::size_t>(t) * 3 * d + h * hd];
                float* dq = &dqkv[static_cast<std::size_t>(t) * 3 * d + h * hd];
                for (int u = 0; u <= t; ++u) {
                    const float ds = prow[u] * (dp[static_cast<std::size_t>(u)] - weighted) * scale;
                    if (ds == 0.0f) continue;
                    const float* k = &c.qkv[static_cast<std::size_t>(u) * 3 * d + d + h * hd];
                    float* dk = &dqkv[static_cast<std::size_t>(u) * 3 * d + d + h * hd];
                    for (int i = 0; i < hd; ++i) {
                        dq[i] += ds * k[i];
                        dk[i] += ds * q[i];
                    }
                }
            }
        }
        dn.assign(static_cast<std::size_t>(T) * d, 0.0f);
        matmul_bt_acc(dqkv.data(), L.wqkv.data(), dn.data(), T, d, 3 * d);
        matmul_at_acc(c.n1.data(), dqkv.data(), L.dwqkv.data(), T, d, 3 * d);
        rmsnorm_backward(c.x_in.data(), L.g1.data(), c.inv1.data(), dn.data(), dx.data(), L.dg1.data(), T, d);
    }

    for (int t = 0; t < T; ++t) {
        const std::size_t tok = static_cast<std::size_t>(seq.tokens[static_cast<std::size_t>(t)]);
        for (int i = 0; i < d; ++i) {
            const float g = dx[static_cast<std::size_t>(t) * d + i];
            dwte_[tok * d + i] += g;
            dwpe_[static_cast<std::size_t>(t) * d + i] += g;
        }
    }
    return {nll, count};
}

std::vector<int> TinyGpt::generate(const std::vector<int>& prompt, int max_new, int stop_token) const {
    const int d = spec_.d_model, H = spec_.n_heads, hd = d / H, f = spec_.d_ff, V = spec_.vocab_size;
    const int C = spec_.context;
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
    std::vector<int> out;
    if (prompt.empty() || static_cast<int>(prompt.size()) >= C) return out;

    const std::size_t nl = layers_.size();
    std::vector<std::vector<float>> kcache(nl, std::vector<float>(static_cast<std::size_t>(C) * d));
    std::vector<std::vector<float>> vcache(nl, std::vector<float>(static_cast<std::size_t>(C) * d));
    std::vector<float> x(d), n(d), qkv(3 * d), att(d), hbuf(f), scores(C), logits(V);

    auto step = [&](int tok, int pos) {
        for (int i = 0; i < d; ++i) {
            x[i] = wte_[static_cast<std::size_t>(tok) * d + i] + wpe_[static_cast<std::size_t>(pos) * d + i];
        }
        for (std::size_t li = 0; li < nl; ++li) {
            const Layer& L = layers_[li];
            rmsnorm(x.data(), L.g1.data(), n.data(), nullptr, 1, d);
            std::fill(qkv.begin(), qkv.end(), 0.0f);
            matmul_acc(n.data(), L.wqkv.data(), qkv.data(), 1, d, 3 * d);
            std::copy(qkv.begin() + d, qkv.begin() + 2 * d, kcache[li].begin() + static_cast<std::ptrdiff_t>(pos) * d);
            std::copy(qkv.begin() + 2 * d, qkv.end(), vcache[li].begin() + static_cast<std::ptrdiff_t>(pos) * d);
            std::fill(att.begin(), att.end(), 0.0f);
            for (int h = 0; h < H; ++h) {
                float mx = -1e30f;
                for (int u = 0; u <= pos; ++u) {
                    const float* k = &kcache[li][static_cast<std::size_t>(u) * d + h * hd];
                    float s = 0.0f;
                    for (int i = 0; i < hd; ++i) s += qkv[h * hd + i] * k[i];
                    scores[u] = s * scale;
                    mx = std::max(mx, scores[u]);
                }
                float sum = 0.0f;
                for (int u = 0; u <= pos; ++u) {
                    scores[u] = std::exp(scores[u] - mx);
                    sum += scores[u];
                }
                for (int u = 0; u <= pos; ++u) {
                    const float w = scores[u] / sum;
                    const float* v = &vcache[li][static_cast<std::size_t>(u) * d + h * hd];
                    for (int i = 0; i < hd; ++i) att[h * hd + i] += w * v[i];
                }
            }
            matmul_acc(att.data(), L.wo.data(), x.data(), 1, d, d);
            rmsnorm(x.data(), L.g2.data(), n.data(), nullptr, 1, d);
            std::fill(hbuf.begin(), hbuf.end(), 0.0f);
            matmul_acc(n.data(), L.w1.data(), hbuf.data(), 1, d, f);
            for (auto& v : hbuf) v = gelu(v);
            matmul_acc(hbuf.data(), L.w2.data(), x.data(), 1, f, d);
        }
        rmsnorm(x.data(), gf_.data(), n.data(), nullptr, 1, d);
        std::fill(logits.begin(), logits.end(), 0.0f);
        matmul_acc(n.data(), whead_.data(), logits.data(), 1, d, V);
        return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    };

    int pos = 0;
    int next = 0;
    for (int tok : prompt) next = step(tok, pos++);
    while (static_cast<int>(out.size()) < max_new) {
        out.push_back(next);
        if (next == stop_token || pos >= C) break;
        next = step(next, pos++);
    }
    return out;
}

// ---------------------------------------------------------------------------

AdamW::AdamW(double beta1, double beta2, double weight_decay, double eps)
    : beta1_(beta1), beta2_(beta2), weight_decay_(weight_decay), eps_(eps) {}

void AdamW::step(std::vector<ParamView>& params, double lr) {
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.value.size(), 0.0f);
            v_.emplace_back(p.value.size(), 0.0f);
        }
    }
    if (m_.size() != params.size()) throw ValidationError("AdamW parameter set changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        auto& m = m_[k];
        auto& v = v_[k];
        const float decay = p.decay ? static_cast<float>(1.0 - lr * weight_decay_) : 1.0f;
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const float g = p.grad[i];
            m[i] = b1 * m[i] + (1.0f - b1) * g;
            v[i] = b2 * v[i] + (1.0f - b2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value[i] = static_cast<float>(p.value[i] * decay - lr * mhat / (std::sqrt(vhat) + eps_));
        }
    }
}

}  // namespace selfprompt::toy
