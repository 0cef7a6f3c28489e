#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "monattn/checkpoint.hpp"

using namespace monattn;

namespace {

Checkpoint example_checkpoint() {
    Checkpoint ckpt;
    ckpt.config.dims.vocab = 5;
    ckpt.config.dims.d_emb = 3;
    ckpt.config.dims.d_h = 4;
    ckpt.config.dims.d_s = 4;
    ckpt.config.dims.d_a = 3;
    ckpt.config.seed = 12345;
    ckpt.config.attn.noise_std = 1.5;
    ckpt.config.lr_decay_rate = 0.5;
    ckpt.config.lr_decay_steps = 6000;
    ckpt.config.noise_off_step = 12000;
    SeededRng rng(9, 0);
    ckpt.params = init_model(ckpt.config.dims, 0.1, -2.0, rng);
    const TaskSpec task = generate_task(11, 5);
    ckpt.task_seed = task.seed;
    ckpt.task_vocab = task.vocab_size;
    ckpt.task_digest = task_hash(task);
    ckpt.step = 321;
    ckpt.batch_counter = 987654;
    ckpt.noise_counter = 1234567;
    return ckpt;
}

Vec pack(ModelParams& p) {
    Vec x(param_count(p));
    Eigen::Index off = 0;
    for (const auto& t : named_tensors(p)) {
        for (Eigen::Index i = 0; i < t.size; ++i) x[off++] = t.data[i];
    }
    return x;
}

}  // namespace

TEST_CASE("checkpoint text round-trips every field bit-exactly") {
    Checkpoint ckpt = example_checkpoint();
    const std::string text = checkpoint_to_text(ckpt);
    Checkpoint back = checkpoint_from_text(text);

    CHECK(back.step == ckpt.step);
    CHECK(back.task_seed == ckpt.task_seed);
    CHECK(back.task_vocab == ckpt.task_vocab);
    CHECK(back.task_digest == ckpt.task_digest);
    CHECK(back.batch_counter == ckpt.batch_counter);
    CHECK(back.noise_counter == ckpt.noise_counter);
    CHECK(back.config.seed == ckpt.config.seed);
    CHECK(back.config.attn.noise_std == ckpt.config.attn.noise_std);
    CHECK(back.config.lr == ckpt.config.lr);
    CHECK(back.config.lr_decay_rate == ckpt.config.lr_decay_rate);
    CHECK(back.config.lr_decay_steps == ckpt.config.lr_decay_steps);
    CHECK(back.config.noise_off_step == ckpt.config.noise_off_step);
    CHECK(pack(back.params) == pack(ckpt.params));

    // serialize -> parse -> serialize is byte-identical
    CHECK(checkpoint_to_text(back) == text);
}

TEST_CASE("dot-energy checkpoints round-trip with their own tensor set") {
    Checkpoint ckpt = example_checkpoint();
    ckpt.config.dims.energy = EnergyKind::kDot;
    SeededRng rng(4, 0);
    ckpt.params = init_model(ckpt.config.dims, 0.1, -2.0, rng);

    const std::string text = checkpoint_to_text(ckpt);
    CHECK(text.find("attn_dot_w") != std::string::npos);
    CHECK(text.find("attn_query_w") == std::string::npos);
    CHECK(text.find("\"dot\"") != std::string::npos);

    Checkpoint back = checkpoint_from_text(text);
    CHECK(back.config.dims.energy == EnergyKind::kDot);
    CHECK(pack(back.params) == pack(ckpt.params));
    CHECK(checkpoint_to_text(back) == text);
}

TEST_CASE("checkpoint survives a file round trip byte for byte") {
    Checkpoint ckpt = example_checkpoint();
    const std::string path_a = "ckpt_test_a.json";
    const std::string path_b = "ckpt_test_b.json";
    save_checkpoint(ckpt, path_a);
    Checkpoint loaded = load_checkpoint(path_a);
    save_checkpoint(loaded, path_b);

    std::ifstream fa(path_a, std::ios::binary), fb(path_b, std::ios::binary);
    std::string a((std::istreambuf_iterator<char>(fa)),
                  std::istreambuf_iterator<char>());
    std::string b((std::istreambuf_iterator<char>(fb)),
                  std::istreambuf_iterator<char>());
    CHECK(a == b);
    CHECK(!a.empty());
    std::remove(path_a.c_str());
    std::remove(path_b.c_str());
}

TEST_CASE("loading a checkpoint preserves evaluation metrics bit-exactly") {
    Checkpoint ckpt = example_checkpoint();
    const TaskSpec task = generate_task(ckpt.task_seed, ckpt.task_vocab);
    REQUIRE(task_hash(task) == ckpt.task_digest);

    Checkpoint back = checkpoint_from_text(checkpoint_to_text(ckpt));
    SeededRng rng_a(4, 0), rng_b(4, 0);
    const EvalMetrics ma = evaluate(task, ckpt.params, ckpt.config.attn, 16,
                                    rng_a, 2, 6);
    const EvalMetrics mb = evaluate(task, back.params, back.config.attn, 16,
                                    rng_b, 2, 6);
    CHECK(ma.token_accuracy_soft == mb.token_accuracy_soft);
    CHECK(ma.token_accuracy_hard == mb.token_accuracy_hard);
    CHECK(ma.sequence_accuracy == mb.sequence_accuracy);
    CHECK(ma.hard_soft_agreement == mb.hard_soft_agreement);
}

TEST_CASE("corrupt or truncated checkpoints fail loudly but cleanly") {
    Checkpoint ckpt = example_checkpoint();
    const std::string text = checkpoint_to_text(ckpt);

    CHECK_THROWS_AS(checkpoint_from_text(text.substr(0, text.size() / 2)),
                    std::runtime_error);
    CHECK_THROWS_AS(checkpoint_from_text(""), std::runtime_error);
    CHECK_THROWS_AS(checkpoint_from_text("{}"), std::runtime_error);

    // flip one digit inside the payload: checksum must catch it
    std::string tampered = text;
    const size_t pos = tampered.find("\"step\":321");
    REQUIRE(pos != std::string::npos);
    tampered.replace(pos, 10, "\"step\":322");
    CHECK_THROWS_AS(checkpoint_from_text(tampered), std::runtime_error);

    CHECK_THROWS_AS(load_checkpoint("does_not_exist.json"), std::runtime_error);
}
