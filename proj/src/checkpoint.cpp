#include "monattn/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace monattn {

namespace {

using nlohmann::json;

uint64_t fnv1a(const std::string& s) {
    uint64_t hash = 14695981039346656037ULL;
    for (unsigned char c : s) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json dims_to_json(const ModelDims& d) {
    return {{"vocab", d.vocab}, {"d_emb", d.d_emb}, {"d_h", d.d_h},
            {"d_s", d.d_s},     {"d_a", d.d_a},
            {"energy", d.energy == EnergyKind::kModified ? "modified" : "dot"}};
}

ModelDims dims_from_json(const json& j) {
    ModelDims d;
    d.vocab = j.at("vocab").get<int>();
    d.d_emb = j.at("d_emb").get<int>();
    d.d_h = j.at("d_h").get<int>();
    d.d_s = j.at("d_s").get<int>();
    d.d_a = j.at("d_a").get<int>();
    const std::string kind = j.at("energy").get<std::string>();
    if (kind == "modified") {
        d.energy = EnergyKind::kModified;
    } else if (kind == "dot") {
        d.energy = EnergyKind::kDot;
    } else {
        throw std::runtime_error("checkpoint: unknown energy kind '" + kind + "'");
    }
    return d;
}

json attn_to_json(const MonotonicConfig& c) {
    return {{"noise_std", c.noise_std},
            {"tau", c.tau},
            {"eps", c.eps},
            {"denom_mode", c.denom_mode == DenomMode::kClamped ? "clamped" : "unit"},
            {"seed", c.seed}};
}

MonotonicConfig attn_from_json(const json& j) {
    MonotonicConfig c;
    c.noise_std = j.at("noise_std").get<double>();
    c.tau = j.at("tau").get<double>();
    c.eps = j.at("eps").get<double>();
    const std::string mode = j.at("denom_mode").get<std::string>();
    if (mode == "clamped") {
        c.denom_mode = DenomMode::kClamped;
    } else if (mode == "unit") {
        c.denom_mode = DenomMode::kUnit;
    } else {
        throw std::runtime_error("checkpoint: unknown denom_mode '" + mode + "'");
    }
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

json config_to_json(const TrainConfig& c) {
    return {{"lr", c.lr},
            {"lr_decay_rate", c.lr_decay_rate},
            {"lr_decay_steps", c.lr_decay_steps},
            {"noise_off_step", c.noise_off_step},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"adam_eps", c.adam_eps},
            {"clip_norm", c.clip_norm},
            {"batch_size", c.batch_size},
            {"max_steps", c.max_steps},
            {"eval_interval", c.eval_interval},
            {"eval_examples", c.eval_examples},
            {"min_len", c.min_len},
            {"max_len", c.max_len},
            {"init_scale", c.init_scale},
            {"energy_r", c.energy_r},
            {"dims", dims_to_json(c.dims)},
            {"attn", attn_to_json(c.attn)},
            {"seed", c.seed}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.lr = j.at("lr").get<double>();
    c.lr_decay_rate = j.at("lr_decay_rate").get<double>();
    c.lr_decay_steps = j.at("lr_decay_steps").get<int>();
    c.noise_off_step = j.at("noise_off_step").get<int>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.clip_norm = j.at("clip_norm").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.max_steps = j.at("max_steps").get<int>();
    c.eval_interval = j.at("eval_interval").get<int>();
    c.eval_examples = j.at("eval_examples").get<int>();
    c.min_len = j.at("min_len").get<int>();
    c.max_len = j.at("max_len").get<int>();
    c.init_scale = j.at("init_scale").get<double>();
    c.energy_r = j.at("energy_r").get<double>();
    c.dims = dims_from_json(j.at("dims"));
    c.attn = attn_from_json(j.at("attn"));
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

}  // namespace

std::string checkpoint_to_text(const Checkpoint& ckpt) {
    json tensors = json::object();
    auto& params = const_cast<ModelParams&>(ckpt.params);
    for (const auto& t : named_tensors(params)) {
        json dims = json::array();
        for (Eigen::Index d : t.dims) dims.push_back(d);
        json data = json::array();
        for (Eigen::Index i = 0; i < t.size; ++i) data.push_back(t.data[i]);
        tensors[t.name] = {{"dims", dims}, {"data", data}};
    }
    json payload = {{"step", ckpt.step},
                    {"task",
                     {{"seed", ckpt.task_seed},
                      {"vocab_size", ckpt.task_vocab},
                      {"digest", ckpt.task_digest}}},
                    {"rng",
                     {{"batch_counter", ckpt.batch_counter},
                      {"noise_counter", ckpt.noise_counter}}},
                    {"config", config_to_json(ckpt.config)},
                    {"tensors", tensors}};
    json doc = {{"format_version", 1},
                {"payload", payload},
                {"checksum", hex64(fnv1a(payload.dump()))}};
    return doc.dump() + "\n";
}

Checkpoint checkpoint_from_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("checkpoint: malformed document: ") +
                                 e.what());
    }
    try {
        if (doc.at("format_version").get<int>() != 1) {
            throw std::runtime_error("checkpoint: unsupported format version");
        }
        const json& payload = doc.at("payload");
        const std::string expect = doc.at("checksum").get<std::string>();
        const std::string actual = hex64(fnv1a(payload.dump()));
        if (expect != actual) {
            throw std::runtime_error("checkpoint: checksum mismatch (corrupt file)");
        }

        Checkpoint ckpt;
        ckpt.step = payload.at("step").get<long>();
        ckpt.task_seed = payload.at("task").at("seed").get<uint64_t>();
        ckpt.task_vocab = payload.at("task").at("vocab_size").get<int>();
        ckpt.task_digest = payload.at("task").at("digest").get<uint64_t>();
        ckpt.batch_counter = payload.at("rng").at("batch_counter").get<uint64_t>();
        ckpt.noise_counter = payload.at("rng").at("noise_counter").get<uint64_t>();
        ckpt.config = config_from_json(payload.at("config"));

        ckpt.params = zero_model(ckpt.config.dims);
        const json& tensors = payload.at("tensors");
        size_t seen = 0;
        for (auto& t : named_tensors(ckpt.params)) {
            const json& entry = tensors.at(t.name);
            const json& dims = entry.at("dims");
            if (dims.size() != t.dims.size()) {
                throw std::runtime_error("checkpoint: rank mismatch for " + t.name);
            }
            for (size_t d = 0; d < t.dims.size(); ++d) {
                if (dims[d].get<Eigen::Index>() != t.dims[d]) {
                    throw std::runtime_error("checkpoint: shape mismatch for " +
                                             t.name);
                }
            }
            const json& data = entry.at("data");
            if (static_cast<Eigen::Index>(data.size()) != t.size) {
                throw std::runtime_error("checkpoint: size mismatch for " + t.name);
            }
            for (Eigen::Index i = 0; i < t.size; ++i) {
                t.data[i] = data[static_cast<size_t>(i)].get<double>();
            }
            ++seen;
        }
        if (seen != tensors.size()) {
            throw std::runtime_error("checkpoint: unexpected extra tensors");
        }
        return ckpt;
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("checkpoint: missing or invalid field: ") +
                                 e.what());
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("checkpoint: cannot open '" + path +
                                 "' for writing");
    }
    out << checkpoint_to_text(ckpt);
    if (!out) {
        throw std::runtime_error("checkpoint: write to '" + path + "' failed");
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return checkpoint_from_text(buf.str());
}

}  // namespace monattn
