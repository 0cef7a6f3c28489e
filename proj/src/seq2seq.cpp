#include "monattn/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "monattn/gradcheck.hpp"

namespace monattn {

namespace {

uint64_t fnv1a_bytes(uint64_t hash, const unsigned char* data, size_t n) {
    constexpr uint64_t kPrime = 1099511628211ULL;
    for (size_t i = 0; i < n; ++i) {
        hash ^= data[i];
        hash *= kPrime;
    }
    return hash;
}

uint64_t fnv1a_u64(uint64_t hash, uint64_t value) {
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
    return fnv1a_bytes(hash, bytes, 8);
}

constexpr uint64_t kFnvOffset = 14695981039346656037ULL;

Vec vcat(const Vec& a, const Vec& b) {
    Vec r(a.size() + b.size());
    r << a, b;
    return r;
}

void require_token(int tok, int limit, const char* what) {
    if (tok < 0 || tok >= limit) {
        throw std::domain_error(std::string(what) + ": token out of vocabulary");
    }
}

}  // namespace

TaskSpec generate_task(uint64_t seed, int vocab_size) {
    if (vocab_size < 2) {
        throw std::domain_error("generate_task: vocab_size must be at least 2");
    }
    TaskSpec task;
    task.vocab_size = vocab_size;
    task.seed = seed;
    SeededRng rng(seed, 0);
    task.expansion.resize(static_cast<size_t>(vocab_size));
    for (auto& out : task.expansion) {
        const int len = rng.bernoulli(0.5) ? 2 : 1;
        out.resize(static_cast<size_t>(len));
        for (int& sym : out) {
            sym = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(vocab_size));
        }
    }
    return task;
}

uint64_t task_hash(const TaskSpec& task) {
    uint64_t h = kFnvOffset;
    h = fnv1a_u64(h, static_cast<uint64_t>(task.vocab_size));
    h = fnv1a_u64(h, task.seed);
    for (const auto& out : task.expansion) {
        h = fnv1a_u64(h, out.size());
        for (int sym : out) h = fnv1a_u64(h, static_cast<uint64_t>(sym));
    }
    return h;
}

TokenPair sample_pair(const TaskSpec& task, SeededRng& rng, int min_len,
                      int max_len) {
    if (min_len < 1 || max_len > 64 || min_len > max_len) {
        throw std::domain_error("sample_pair: length range must lie within [1, 64]");
    }
    const int span = max_len - min_len + 1;
    const int len = min_len + static_cast<int>(rng.next_u64() %
                                               static_cast<uint64_t>(span));
    TokenPair pair;
    pair.input.resize(static_cast<size_t>(len));
    for (int& tok : pair.input) {
        tok = static_cast<int>(rng.next_u64() %
                               static_cast<uint64_t>(task.vocab_size));
    }
    for (int tok : pair.input) {
        const auto& out = task.expansion[static_cast<size_t>(tok)];
        pair.target.insert(pair.target.end(), out.begin(), out.end());
    }
    pair.target.push_back(task.eos());
    return pair;
}

Vec gru_forward(const GruParams& params, const Vec& x, const Vec& h_prev) {
    return gru_forward_cached(params, x, h_prev).h_new;
}

GruCache gru_forward_cached(const GruParams& params, const Vec& x,
                            const Vec& h_prev) {
    GruCache c;
    c.x = x;
    c.h_prev = h_prev;
    const Vec az = params.Wz * x + params.Uz * h_prev + params.bz;
    const Vec ar = params.Wr * x + params.Ur * h_prev + params.br;
    c.z.resize(az.size());
    c.r.resize(ar.size());
    for (Eigen::Index i = 0; i < az.size(); ++i) c.z[i] = sigmoid(az[i]);
    for (Eigen::Index i = 0; i < ar.size(); ++i) c.r[i] = sigmoid(ar[i]);
    c.rh = c.r.array() * h_prev.array();
    c.n = (params.Wn * x + params.Un * c.rh + params.bn).array().tanh();
    c.h_new = c.z.array() * h_prev.array() + (1.0 - c.z.array()) * c.n.array();
    return c;
}

void gru_backward(const GruParams& params, const GruCache& cache,
                  const Vec& d_h_new, GruParams& grads, Vec& d_x, Vec& d_h_prev) {
    const Vec dz = d_h_new.array() * (cache.h_prev.array() - cache.n.array());
    const Vec dn = d_h_new.array() * (1.0 - cache.z.array());
    d_h_prev = d_h_new.array() * cache.z.array();

    const Vec dan = dn.array() * (1.0 - cache.n.array().square());
    grads.Wn += dan * cache.x.transpose();
    grads.Un += dan * cache.rh.transpose();
    grads.bn += dan;
    d_x = params.Wn.transpose() * dan;
    const Vec drh = params.Un.transpose() * dan;
    const Vec dr = drh.array() * cache.h_prev.array();
    d_h_prev += (drh.array() * cache.r.array()).matrix();

    const Vec daz = dz.array() * cache.z.array() * (1.0 - cache.z.array());
    grads.Wz += daz * cache.x.transpose();
    grads.Uz += daz * cache.h_prev.transpose();
    grads.bz += daz;
    d_x += params.Wz.transpose() * daz;
    d_h_prev += params.Uz.transpose() * daz;

    const Vec dar = dr.array() * cache.r.array() * (1.0 - cache.r.array());
    grads.Wr += dar * cache.x.transpose();
    grads.Ur += dar * cache.h_prev.transpose();
    grads.br += dar;
    d_x += params.Wr.transpose() * dar;
    d_h_prev += params.Ur.transpose() * dar;
}

namespace {

void push_mat(std::vector<NamedTensor>& out, const std::string& name, Mat& m) {
    out.push_back({name, m.data(), m.size(), {m.rows(), m.cols()}});
}

void push_vec(std::vector<NamedTensor>& out, const std::string& name, Vec& v) {
    out.push_back({name, v.data(), v.size(), {v.size()}});
}

void push_gru(std::vector<NamedTensor>& out, const std::string& prefix,
              GruParams& g) {
    push_mat(out, prefix + "_wz", g.Wz);
    push_mat(out, prefix + "_uz", g.Uz);
    push_vec(out, prefix + "_bz", g.bz);
    push_mat(out, prefix + "_wr", g.Wr);
    push_mat(out, prefix + "_ur", g.Ur);
    push_vec(out, prefix + "_br", g.br);
    push_mat(out, prefix + "_wn", g.Wn);
    push_mat(out, prefix + "_un", g.Un);
    push_vec(out, prefix + "_bn", g.bn);
}

GruParams make_gru(Eigen::Index d_in, Eigen::Index d_h) {
    GruParams g;
    g.Wz = Mat::Zero(d_h, d_in);
    g.Uz = Mat::Zero(d_h, d_h);
    g.bz = Vec::Zero(d_h);
    g.Wr = Mat::Zero(d_h, d_in);
    g.Ur = Mat::Zero(d_h, d_h);
    g.br = Vec::Zero(d_h);
    g.Wn = Mat::Zero(d_h, d_in);
    g.Un = Mat::Zero(d_h, d_h);
    g.bn = Vec::Zero(d_h);
    return g;
}

ModelParams make_model_shell(const ModelDims& dims) {
    ModelParams p;
    p.dims = dims;
    const Eigen::Index total = dims.vocab + 2;
    p.embed = Mat::Zero(total, dims.d_emb);
    p.enc = make_gru(dims.d_emb, dims.d_h);
    p.dec = make_gru(dims.d_emb + dims.d_h, dims.d_s);
    if (dims.energy == EnergyKind::kModified) {
        p.attn.W = Mat::Zero(dims.d_a, dims.d_s);
        p.attn.V = Mat::Zero(dims.d_a, dims.d_h);
        p.attn.b = Vec::Zero(dims.d_a);
        p.attn.v = Vec::Zero(dims.d_a);
        p.attn.g = 0.0;
        p.attn.r = 0.0;
    } else {
        p.attn_dot.W = Mat::Zero(dims.d_s, dims.d_h);
        p.attn_dot.g = 0.0;
        p.attn_dot.r = 0.0;
    }
    p.W_out = Mat::Zero(total, dims.d_s + dims.d_h);
    p.b_out = Vec::Zero(total);
    return p;
}

}  // namespace

std::vector<NamedTensor> named_tensors(ModelParams& params) {
    std::vector<NamedTensor> out;
    push_mat(out, "embed", params.embed);
    push_gru(out, "enc", params.enc);
    push_gru(out, "dec", params.dec);
    if (params.dims.energy == EnergyKind::kModified) {
        push_mat(out, "attn_query_w", params.attn.W);
        push_mat(out, "attn_memory_w", params.attn.V);
        push_vec(out, "attn_b", params.attn.b);
        push_vec(out, "attn_v", params.attn.v);
        out.push_back({"attn_g", &params.attn.g, 1, {1}});
        out.push_back({"attn_r", &params.attn.r, 1, {1}});
    } else {
        push_mat(out, "attn_dot_w", params.attn_dot.W);
        out.push_back({"attn_g", &params.attn_dot.g, 1, {1}});
        out.push_back({"attn_r", &params.attn_dot.r, 1, {1}});
    }
    push_mat(out, "out_w", params.W_out);
    push_vec(out, "out_b", params.b_out);
    return out;
}

Eigen::Index param_count(const ModelParams& params) {
    Eigen::Index n = 0;
    for (const auto& t : named_tensors(const_cast<ModelParams&>(params))) {
        n += t.size;
    }
    return n;
}

ModelParams zeros_like(const ModelParams& params) {
    return make_model_shell(params.dims);
}

ModelParams zero_model(const ModelDims& dims) { return make_model_shell(dims); }

ModelParams init_model(const ModelDims& dims, double init_scale, double energy_r,
                       SeededRng& rng) {
    ModelParams p = make_model_shell(dims);
    for (auto& t : named_tensors(p)) {
        if (t.name == "attn_g" || t.name == "attn_r") continue;
        for (Eigen::Index i = 0; i < t.size; ++i) {
            t.data[i] = init_scale * (2.0 * rng.next_unit() - 1.0);
        }
    }
    if (dims.energy == EnergyKind::kModified) {
        p.attn.g = 1.0 / std::sqrt(static_cast<double>(dims.d_a));
        p.attn.r = energy_r;
    } else {
        // The dot energy contracts over d_s, so that is the scale to undo.
        p.attn_dot.g = 1.0 / std::sqrt(static_cast<double>(dims.d_s));
        p.attn_dot.r = energy_r;
    }
    return p;
}

namespace {

struct EncodeTrace {
    Mat states;
    std::vector<GruCache> caches;
};

EncodeTrace encode_cached(const ModelParams& params, const std::vector<int>& input) {
    if (input.empty()) {
        throw std::domain_error("encode: input must be non-empty");
    }
    const Eigen::Index T = static_cast<Eigen::Index>(input.size());
    EncodeTrace trace;
    trace.states = Mat(T, params.dims.d_h);
    trace.caches.reserve(input.size());
    Vec h = Vec::Zero(params.dims.d_h);
    for (Eigen::Index t = 0; t < T; ++t) {
        require_token(input[static_cast<size_t>(t)], params.dims.vocab, "encode");
        const Vec x = params.embed.row(input[static_cast<size_t>(t)]).transpose();
        trace.caches.push_back(gru_forward_cached(params.enc, x, h));
        h = trace.caches.back().h_new;
        trace.states.row(t) = h.transpose();
    }
    return trace;
}

struct StepTrace {
    Vec s_prev;
    AttentionWeights alpha_prev;
    SoftStepTrace attn;
    int y_prev = 0;
    GruCache dec_cache;
    Vec cat;      // [s_i; c_i]
    Vec probs;    // softmax over logits, reused by the backward pass
    int target_tok = 0;
};

struct DecodeTrace {
    std::vector<StepTrace> steps;
    double loss = 0.0;
    Mat alphas;
};

DecodeTrace decode_forward(const ModelParams& params, const Memory& memory,
                           const std::vector<int>& target,
                           const MonotonicConfig& cfg, SeededRng* noise_rng) {
    if (target.empty()) {
        throw std::domain_error("decode_train: target must be non-empty");
    }
    const int eos = params.dims.vocab + 1;
    if (target.back() != eos) {
        throw std::domain_error("decode_train: target must end with EOS");
    }
    const Eigen::Index T = memory.length();
    const Eigen::Index U = static_cast<Eigen::Index>(target.size());
    const int total = params.dims.vocab + 2;

    DecodeTrace trace;
    trace.steps.reserve(target.size());
    trace.alphas = Mat(U, T);

    Vec s = Vec::Zero(params.dims.d_s);
    AttentionWeights alpha = AttentionWeights::initial(T);
    int y_prev = params.dims.vocab;  // SOS
    double total_loss = 0.0;
    for (Eigen::Index i = 0; i < U; ++i) {
        const int tok = target[static_cast<size_t>(i)];
        require_token(tok, total, "decode_train");
        StepTrace st;
        st.s_prev = s;
        st.alpha_prev = alpha;
        st.y_prev = y_prev;
        st.target_tok = tok;

        const Vec noise = (noise_rng != nullptr && cfg.noise_std > 0.0)
                              ? noise_rng->gaussian(T, cfg.noise_std)
                              : Vec::Zero(T);
        st.attn = params.dims.energy == EnergyKind::kModified
                      ? soft_step_record(params.attn, s, memory, alpha, noise)
                      : soft_step_record(params.attn_dot, s, memory, alpha, noise);

        const Vec x = vcat(params.embed.row(y_prev).transpose(), st.attn.context);
        st.dec_cache = gru_forward_cached(params.dec, x, s);
        s = st.dec_cache.h_new;
        st.cat = vcat(s, st.attn.context);

        const Vec logits = params.W_out * st.cat + params.b_out;
        const double m = logits.maxCoeff();
        const double lse = m + std::log((logits.array() - m).exp().sum());
        total_loss += lse - logits[tok];
        st.probs = (logits.array() - lse).exp();

        trace.alphas.row(i) = st.attn.alpha.alpha.transpose();
        alpha = st.attn.alpha;
        y_prev = tok;  // teacher forcing: next step conditions on this token
        trace.steps.push_back(std::move(st));
    }
    trace.loss = total_loss / static_cast<double>(U);
    return trace;
}

}  // namespace

Memory encode(const ModelParams& params, const std::vector<int>& input) {
    return Memory(encode_cached(params, input).states);
}

TrainForward decode_train(const ModelParams& params, const Memory& memory,
                          const std::vector<int>& target,
                          const MonotonicConfig& cfg, SeededRng* noise_rng) {
    DecodeTrace trace = decode_forward(params, memory, target, cfg, noise_rng);
    return {trace.loss, std::move(trace.alphas)};
}

double example_gradient(const ModelParams& params, const std::vector<int>& input,
                        const std::vector<int>& target, const MonotonicConfig& cfg,
                        SeededRng* noise_rng, ModelParams& grads,
                        Mat* alphas_out) {
    const EncodeTrace enc = encode_cached(params, input);
    const Memory memory(enc.states);
    const DecodeTrace trace = decode_forward(params, memory, target, cfg,
                                             noise_rng);
    if (alphas_out != nullptr) *alphas_out = trace.alphas;

    const Eigen::Index T = memory.length();
    const Eigen::Index U = static_cast<Eigen::Index>(trace.steps.size());
    const Eigen::Index d_s = params.dims.d_s;
    const Eigen::Index d_h = params.dims.d_h;
    const Eigen::Index d_emb = params.dims.d_emb;
    const double inv_u = 1.0 / static_cast<double>(U);

    Vec ds_carry = Vec::Zero(d_s);
    Vec dalpha_carry = Vec::Zero(T);
    Mat d_memory = Mat::Zero(T, d_h);
    Vec dx, ds_prev;
    for (Eigen::Index i = U - 1; i >= 0; --i) {
        const StepTrace& st = trace.steps[static_cast<size_t>(i)];
        Vec dlogits = st.probs * inv_u;
        dlogits[st.target_tok] -= inv_u;
        grads.W_out += dlogits * st.cat.transpose();
        grads.b_out += dlogits;
        const Vec dcat = params.W_out.transpose() * dlogits;

        const Vec ds = dcat.head(d_s) + ds_carry;
        Vec dc = dcat.tail(d_h);
        gru_backward(params.dec, st.dec_cache, ds, grads.dec, dx, ds_prev);
        grads.embed.row(st.y_prev) += dx.head(d_emb).transpose();
        dc += dx.tail(d_h);

        if (params.dims.energy == EnergyKind::kModified) {
            const SoftStepGradsMod ag = backward_full_step(
                params.attn, st.s_prev, memory, st.alpha_prev, st.attn, dc,
                dalpha_carry);
            grads.attn.W += ag.d_params.dW;
            grads.attn.V += ag.d_params.dV;
            grads.attn.b += ag.d_params.db;
            grads.attn.v += ag.d_params.dv;
            grads.attn.g += ag.d_params.dg;
            grads.attn.r += ag.d_params.dr;
            d_memory += ag.d_memory;
            ds_carry = ds_prev + ag.d_s_prev;
            dalpha_carry = ag.d_alpha_prev;
        } else {
            const SoftStepGradsDot ag = backward_full_step(
                params.attn_dot, st.s_prev, memory, st.alpha_prev, st.attn, dc,
                dalpha_carry);
            grads.attn_dot.W += ag.d_params.dW;
            grads.attn_dot.g += ag.d_params.dg;
            grads.attn_dot.r += ag.d_params.dr;
            d_memory += ag.d_memory;
            ds_carry = ds_prev + ag.d_s_prev;
            dalpha_carry = ag.d_alpha_prev;
        }
    }
    // s_0 and alpha_0 are constants; their sensitivities stop here.

    Vec dh_carry = Vec::Zero(d_h);
    Vec dx_e, dh_prev;
    for (Eigen::Index t = T - 1; t >= 0; --t) {
        const Vec dh = d_memory.row(t).transpose() + dh_carry;
        gru_backward(params.enc, enc.caches[static_cast<size_t>(t)], dh,
                     grads.enc, dx_e, dh_prev);
        grads.embed.row(input[static_cast<size_t>(t)]) += dx_e.transpose();
        dh_carry = dh_prev;
    }
    return trace.loss;
}

HardDecodeResult decode_greedy_hard(const ModelParams& params,
                                    const Memory& memory, int max_len,
                                    const MonotonicConfig& cfg) {
    if (max_len < 1) {
        throw std::domain_error("decode_greedy_hard: max_len must be at least 1");
    }
    const Eigen::Index T = memory.length();
    const int eos = params.dims.vocab + 1;
    HardDecodeResult out;
    Vec s = Vec::Zero(params.dims.d_s);
    MonotonicState state;
    int y_prev = params.dims.vocab;  // SOS
    bool fell_off = false;
    for (int i = 1; i <= max_len; ++i) {
        Vec context;
        if (!fell_off) {
            const HardStepResult hr =
                params.dims.energy == EnergyKind::kModified
                    ? hard_monotonic_step(params.attn, s, memory, state, cfg)
                    : hard_monotonic_step(params.attn_dot, s, memory, state, cfg);
            out.energy_evals += hr.energy_evals;
            context = hr.context;
            state = hr.state;
            out.selected.push_back(hr.selected.value_or(0));
            if (!hr.selected) fell_off = true;  // zero contexts from here on
        } else {
            context = Vec::Zero(memory.dim());
            out.selected.push_back(0);
        }
        if (out.energy_evals > static_cast<int>(T) + i) {
            throw std::logic_error(
                "decode_greedy_hard: energy evaluation bound violated");
        }
        const Vec x = vcat(params.embed.row(y_prev).transpose(), context);
        s = gru_forward(params.dec, x, s);
        const Vec logits = params.W_out * vcat(s, context) + params.b_out;
        Eigen::Index tok = 0;
        logits.maxCoeff(&tok);
        if (static_cast<int>(tok) == eos) break;
        out.tokens.push_back(static_cast<int>(tok));
        y_prev = static_cast<int>(tok);
    }
    return out;
}

std::vector<int> decode_greedy_soft(const ModelParams& params,
                                    const Memory& memory, int max_len,
                                    const MonotonicConfig& cfg,
                                    Mat* alphas_out) {
    if (max_len < 1) {
        throw std::domain_error("decode_greedy_soft: max_len must be at least 1");
    }
    const Eigen::Index T = memory.length();
    const int eos = params.dims.vocab + 1;
    std::vector<int> tokens;
    std::vector<Vec> alpha_rows;
    Vec s = Vec::Zero(params.dims.d_s);
    AttentionWeights alpha = AttentionWeights::initial(T);
    int y_prev = params.dims.vocab;
    for (int i = 1; i <= max_len; ++i) {
        const AttentionResult ar =
            params.dims.energy == EnergyKind::kModified
                ? soft_monotonic_step(params.attn, s, memory, alpha, cfg, nullptr)
                : soft_monotonic_step(params.attn_dot, s, memory, alpha, cfg,
                                      nullptr);
        alpha = ar.weights;
        if (alphas_out != nullptr) alpha_rows.push_back(alpha.alpha);
        const Vec x = vcat(params.embed.row(y_prev).transpose(), ar.context);
        s = gru_forward(params.dec, x, s);
        const Vec logits = params.W_out * vcat(s, ar.context) + params.b_out;
        Eigen::Index tok = 0;
        logits.maxCoeff(&tok);
        if (static_cast<int>(tok) == eos) break;
        tokens.push_back(static_cast<int>(tok));
        y_prev = static_cast<int>(tok);
    }
    if (alphas_out != nullptr) {
        alphas_out->resize(static_cast<Eigen::Index>(alpha_rows.size()), T);
        for (std::size_t r = 0; r < alpha_rows.size(); ++r) {
            alphas_out->row(static_cast<Eigen::Index>(r)) =
                alpha_rows[r].transpose();
        }
    }
    return tokens;
}

EvalMetrics evaluate(const TaskSpec& task, const ModelParams& params,
                     const MonotonicConfig& cfg, int n_examples, SeededRng& rng,
                     int min_len, int max_len) {
    if (n_examples < 1) {
        throw std::domain_error("evaluate: n_examples must be at least 1");
    }
    long soft_hits = 0, hard_hits = 0, token_total = 0;
    long seq_hits = 0, agree_hits = 0;
    for (int k = 0; k < n_examples; ++k) {
        const TokenPair pair = sample_pair(task, rng, min_len, max_len);
        const std::vector<int> core(pair.target.begin(), pair.target.end() - 1);
        const Memory memory = encode(params, pair.input);
        const int cap = 2 * static_cast<int>(pair.input.size()) + 2;
        const std::vector<int> soft = decode_greedy_soft(params, memory, cap, cfg);
        const HardDecodeResult hard = decode_greedy_hard(params, memory, cap, cfg);

        token_total += static_cast<long>(core.size());
        for (size_t j = 0; j < core.size(); ++j) {
            if (j < soft.size() && soft[j] == core[j]) ++soft_hits;
            if (j < hard.tokens.size() && hard.tokens[j] == core[j]) ++hard_hits;
        }
        if (soft == core) ++seq_hits;
        if (hard.tokens == soft) ++agree_hits;
    }
    EvalMetrics m;
    m.token_accuracy_soft = static_cast<double>(soft_hits) /
                            static_cast<double>(token_total);
    m.token_accuracy_hard = static_cast<double>(hard_hits) /
                            static_cast<double>(token_total);
    m.sequence_accuracy = static_cast<double>(seq_hits) /
                          static_cast<double>(n_examples);
    m.hard_soft_agreement = static_cast<double>(agree_hits) /
                            static_cast<double>(n_examples);
    return m;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::string out = "step,loss,token_acc_soft,token_acc_hard,seq_acc,agreement\n";
    char line[256];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%ld,%.8g,%.8g,%.8g,%.8g,%.8g\n", r.step,
                      r.loss, r.token_acc_soft, r.token_acc_hard, r.seq_acc,
                      r.agreement);
        out += line;
    }
    return out;
}

namespace {

double global_grad_norm(ModelParams& grads) {
    double sq = 0.0;
    for (const auto& t : named_tensors(grads)) {
        for (Eigen::Index i = 0; i < t.size; ++i) sq += t.data[i] * t.data[i];
    }
    return std::sqrt(sq);
}

void scale_all(ModelParams& grads, double c) {
    for (const auto& t : named_tensors(grads)) {
        for (Eigen::Index i = 0; i < t.size; ++i) t.data[i] *= c;
    }
}

void zero_all(ModelParams& grads) { scale_all(grads, 0.0); }

}  // namespace

TrainResult train_loop(const TaskSpec& task, const TrainConfig& cfg,
                       const std::function<void(const MetricsRow&)>& on_eval) {
    if (!(cfg.lr > 0.0) || !(cfg.clip_norm > 0.0) || cfg.batch_size < 1 ||
        cfg.max_steps < 1 || cfg.eval_interval < 1) {
        throw std::domain_error("train_loop: invalid config");
    }
    if (!(cfg.lr_decay_rate > 0.0) || cfg.lr_decay_rate > 1.0 ||
        cfg.lr_decay_steps < 0) {
        throw std::domain_error("train_loop: invalid lr decay schedule");
    }
    if (cfg.noise_off_step < 0) {
        throw std::domain_error("train_loop: noise_off_step must be >= 0");
    }
    ModelDims dims = cfg.dims;
    dims.vocab = task.vocab_size;

    SeededRng init_rng(cfg.seed, 0);
    SeededRng batch_rng(cfg.seed, 1);
    SeededRng noise_rng(cfg.seed, 2);

    TrainResult result;
    result.params = init_model(dims, cfg.init_scale, cfg.energy_r, init_rng);
    ModelParams grads = zeros_like(result.params);

    const Eigen::Index n_params = param_count(result.params);
    Vec adam_m = Vec::Zero(n_params);
    Vec adam_v = Vec::Zero(n_params);

    auto run_eval = [&]() {
        SeededRng eval_rng(cfg.seed, 3);  // fixed held-out set each time
        return evaluate(task, result.params, cfg.attn, cfg.eval_examples,
                        eval_rng, cfg.min_len, cfg.max_len);
    };

    double window_loss = 0.0;
    int window_count = 0;
    for (int step = 1; step <= cfg.max_steps; ++step) {
        MonotonicConfig step_attn = cfg.attn;
        if (cfg.noise_off_step > 0 && step >= cfg.noise_off_step) {
            step_attn.noise_std = 0.0;
        }
        zero_all(grads);
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const TokenPair pair = sample_pair(task, batch_rng, cfg.min_len,
                                               cfg.max_len);
            batch_loss += example_gradient(result.params, pair.input, pair.target,
                                           step_attn, &noise_rng, grads);
        }
        batch_loss /= cfg.batch_size;
        if (!std::isfinite(batch_loss)) {
            throw std::runtime_error("train_loop: non-finite loss at step " +
                                     std::to_string(step));
        }
        if (step == 1) {
            const EvalMetrics m = run_eval();
            result.history.push_back({0, batch_loss, m.token_accuracy_soft,
                                      m.token_accuracy_hard, m.sequence_accuracy,
                                      m.hard_soft_agreement});
            if (on_eval) on_eval(result.history.back());
        }
        scale_all(grads, 1.0 / cfg.batch_size);
        const double norm = global_grad_norm(grads);
        if (!std::isfinite(norm)) {
            throw std::runtime_error("train_loop: non-finite gradient at step " +
                                     std::to_string(step));
        }
        if (norm > cfg.clip_norm) scale_all(grads, cfg.clip_norm / norm);

        const double bc1 = 1.0 - std::pow(cfg.beta1, step);
        const double bc2 = 1.0 - std::pow(cfg.beta2, step);
        const double lr =
            cfg.lr_decay_steps > 0
                ? cfg.lr * std::pow(cfg.lr_decay_rate, step / cfg.lr_decay_steps)
                : cfg.lr;
        Eigen::Index off = 0;
        auto tensors = named_tensors(result.params);
        auto grad_tensors = named_tensors(grads);
        for (size_t ti = 0; ti < tensors.size(); ++ti) {
            double* p = tensors[ti].data;
            const double* g = grad_tensors[ti].data;
            for (Eigen::Index i = 0; i < tensors[ti].size; ++i, ++off) {
                adam_m[off] = cfg.beta1 * adam_m[off] + (1.0 - cfg.beta1) * g[i];
                adam_v[off] = cfg.beta2 * adam_v[off] +
                              (1.0 - cfg.beta2) * g[i] * g[i];
                p[i] -= lr * (adam_m[off] / bc1) /
                        (std::sqrt(adam_v[off] / bc2) + cfg.adam_eps);
            }
        }

        window_loss += batch_loss;
        ++window_count;
        result.step = step;
        if (step % cfg.eval_interval == 0 || step == cfg.max_steps) {
            const EvalMetrics m = run_eval();
            result.history.push_back({step, window_loss / window_count,
                                      m.token_accuracy_soft, m.token_accuracy_hard,
                                      m.sequence_accuracy, m.hard_soft_agreement});
            if (on_eval) on_eval(result.history.back());
            window_loss = 0.0;
            window_count = 0;
            if (step == cfg.max_steps) break;
        }
    }
    result.batch_counter = batch_rng.counter();
    result.noise_counter = noise_rng.counter();
    return result;
}

}  // namespace monattn
