// monattn — command-line front end for the monotonic-attention toolkit.
//
// Subcommands: train, decode, simulate, checkgrad, bench.
// Exit codes: 0 success, 1 runtime/validation failure, 2 usage error.
// Every subcommand echoes its fully resolved configuration before doing
// any work, so a logged invocation is reproducible from its output alone.
//
// Config files are flat `key = value` text ('#' or ';' starts a comment
// line); keys name long flags without the leading dashes, and flags given
// on the command line override file values. MONATTN_LOG ∈ {quiet, info,
// debug} controls progress output (the config echo is always printed).

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "monattn/attention.hpp"
#include "monattn/bench.hpp"
#include "monattn/checkpoint.hpp"
#include "monattn/gradsuite.hpp"
#include "monattn/oracle.hpp"
#include "monattn/rng.hpp"
#include "monattn/seq2seq.hpp"

namespace {

using namespace monattn;

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level() {
    const char* env = std::getenv("MONATTN_LOG");
    if (env == nullptr) return LogLevel::kInfo;
    const std::string v(env);
    if (v == "quiet") return LogLevel::kQuiet;
    if (v == "debug") return LogLevel::kDebug;
    return LogLevel::kInfo;
}

bool log_info() { return log_level() >= LogLevel::kInfo; }
bool log_debug() { return log_level() >= LogLevel::kDebug; }

// ---------------------------------------------------------------------------
// Config-file expansion: `key = value` lines become `--key=value` tokens
// injected right after the subcommand, except for keys the user already
// passed on the command line (flags override the file).

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("config: cannot open '" + path + "'");
    }
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') {
            continue;
        }
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config: " + path + ":" +
                                     std::to_string(lineno) +
                                     ": expected 'key = value'");
        }
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw std::runtime_error("config: " + path + ":" +
                                     std::to_string(lineno) + ": empty key");
        }
        std::replace(key.begin(), key.end(), '_', '-');
        entries.emplace_back(std::move(key), std::move(value));
    }
    return entries;
}

std::vector<std::string> expand_config_args(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config_path = args[i + 1];
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
            break;
        }
    }
    if (config_path.empty()) return args;

    const auto entries = read_config_file(config_path);
    const auto user_has = [&args](const std::string& flag) {
        return std::any_of(args.begin(), args.end(), [&](const std::string& t) {
            return t == flag || t.rfind(flag + "=", 0) == 0;
        });
    };
    std::vector<std::string> injected;
    for (const auto& [key, value] : entries) {
        const std::string flag = "--" + key;
        if (!user_has(flag)) injected.push_back(flag + "=" + value);
    }
    // Insert after the subcommand token so the options resolve in its scope.
    args.insert(args.begin() + 1, injected.begin(), injected.end());
    return args;
}

// ---------------------------------------------------------------------------
// Resolved-config echo (always printed: it is the reproducibility record).

class EchoBlock {
public:
    explicit EchoBlock(std::string command) : command_(std::move(command)) {}

    void add(const std::string& key, const std::string& value) {
        rows_.emplace_back(key, value);
    }
    void add(const std::string& key, const char* value) {
        rows_.emplace_back(key, std::string(value));
    }
    void add(const std::string& key, bool value) {
        rows_.emplace_back(key, value ? "true" : "false");
    }
    template <typename T>
    void add(const std::string& key, const T& value) {
        std::ostringstream os;
        os << value;
        rows_.emplace_back(key, os.str());
    }
    template <typename T>
    void add(const std::string& key, const std::vector<T>& values) {
        std::ostringstream os;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i > 0) os << ',';
            os << values[i];
        }
        rows_.emplace_back(key, os.str());
    }

    void print() const {
        std::cout << "resolved config (" << command_ << "):\n";
        for (const auto& [key, value] : rows_) {
            std::cout << "  " << key << " = " << value << "\n";
        }
        std::cout.flush();
    }

private:
    std::string command_;
    std::vector<std::pair<std::string, std::string>> rows_;
};

std::string join_tokens(const std::vector<int>& tokens) {
    std::ostringstream os;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) os << ' ';
        os << tokens[i];
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// train

struct TrainFlags {
    std::string out;
    std::string metrics;
    std::string config;
    std::string energy = "modified";
    std::uint64_t seed = 1;
    std::uint64_t task_seed = 7;
    int vocab = 20;
    TrainConfig cfg;  // carries all remaining defaults
};

int run_train(const TrainFlags& f) {
    TrainConfig cfg = f.cfg;
    cfg.dims.vocab = f.vocab;
    cfg.dims.energy =
        f.energy == "dot" ? EnergyKind::kDot : EnergyKind::kModified;
    cfg.seed = f.seed;
    const std::string metrics_path =
        f.metrics.empty() ? f.out + ".metrics.csv" : f.metrics;

    EchoBlock echo("train");
    echo.add("out", f.out);
    echo.add("metrics", metrics_path);
    echo.add("config", f.config);
    echo.add("seed", f.seed);
    echo.add("task-seed", f.task_seed);
    echo.add("vocab", f.vocab);
    echo.add("energy", f.energy);
    echo.add("steps", cfg.max_steps);
    echo.add("batch", cfg.batch_size);
    echo.add("lr", cfg.lr);
    echo.add("lr-decay-rate", cfg.lr_decay_rate);
    echo.add("lr-decay-steps", cfg.lr_decay_steps);
    echo.add("clip", cfg.clip_norm);
    echo.add("noise", cfg.attn.noise_std);
    echo.add("noise-off-step", cfg.noise_off_step);
    echo.add("tau", cfg.attn.tau);
    echo.add("min-len", cfg.min_len);
    echo.add("max-len", cfg.max_len);
    echo.add("eval-interval", cfg.eval_interval);
    echo.add("eval-examples", cfg.eval_examples);
    echo.add("init-scale", cfg.init_scale);
    echo.add("energy-r", cfg.energy_r);
    echo.add("d-emb", cfg.dims.d_emb);
    echo.add("d-h", cfg.dims.d_h);
    echo.add("d-s", cfg.dims.d_s);
    echo.add("d-a", cfg.dims.d_a);
    echo.print();

    const TaskSpec task = generate_task(f.task_seed, f.vocab);
    const auto on_eval = [](const MetricsRow& row) {
        if (!log_info()) return;
        std::printf("step %6ld  loss %.4f  soft %.3f  hard %.3f  seq %.3f  agree %.3f\n",
                    row.step, row.loss, row.token_acc_soft, row.token_acc_hard,
                    row.seq_acc, row.agreement);
        std::fflush(stdout);
    };
    const TrainResult result = train_loop(task, cfg, on_eval);

    Checkpoint ckpt;
    ckpt.params = result.params;
    ckpt.task_seed = task.seed;
    ckpt.task_vocab = task.vocab_size;
    ckpt.task_digest = task_hash(task);
    ckpt.config = cfg;
    ckpt.step = result.step;
    ckpt.batch_counter = result.batch_counter;
    ckpt.noise_counter = result.noise_counter;
    save_checkpoint(ckpt, f.out);

    std::ofstream metrics_out(metrics_path);
    if (!metrics_out) {
        throw std::runtime_error("train: cannot open metrics path '" +
                                 metrics_path + "'");
    }
    metrics_out << metrics_csv(result.history);
    if (!metrics_out.good()) {
        throw std::runtime_error("train: failed writing metrics to '" +
                                 metrics_path + "'");
    }

    const MetricsRow& last = result.history.back();
    std::printf("final: step %ld loss %.6f soft %.4f hard %.4f seq %.4f agree %.4f\n",
                last.step, last.loss, last.token_acc_soft, last.token_acc_hard,
                last.seq_acc, last.agreement);
    std::printf("wrote checkpoint: %s\n", f.out.c_str());
    std::printf("wrote metrics: %s\n", metrics_path.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// decode

struct DecodeFlags {
    std::string ckpt;
    std::string mode = "soft";
    std::string config;
    std::vector<int> input;
    std::uint64_t seed = 0;
    int max_len = 0;  // 0 = 2 * input length + 2
    bool dump_alpha = false;
};

int run_decode(const DecodeFlags& f) {
    EchoBlock echo("decode");
    echo.add("ckpt", f.ckpt);
    echo.add("mode", f.mode);
    echo.add("config", f.config);
    echo.add("input", f.input);
    echo.add("seed", f.seed);
    echo.add("max-len", f.max_len);
    echo.add("dump-alpha", f.dump_alpha);
    echo.print();

    const Checkpoint ckpt = load_checkpoint(f.ckpt);
    const TaskSpec task = generate_task(ckpt.task_seed, ckpt.task_vocab);
    if (task_hash(task) != ckpt.task_digest) {
        throw std::runtime_error("decode: checkpoint task digest mismatch");
    }

    std::vector<int> input = f.input;
    std::vector<int> reference;
    if (input.empty()) {
        SeededRng pair_rng(f.seed, 0);
        const TokenPair pair = sample_pair(task, pair_rng, ckpt.config.min_len,
                                           ckpt.config.max_len);
        input = pair.input;
        reference = pair.target;
        if (!reference.empty()) reference.pop_back();  // strip EOS for display
    }
    for (const int tok : input) {
        if (tok < 0 || tok >= ckpt.task_vocab) {
            throw std::runtime_error("decode: input token " +
                                     std::to_string(tok) +
                                     " outside vocab [0, " +
                                     std::to_string(ckpt.task_vocab) + ")");
        }
    }
    const int max_len =
        f.max_len > 0 ? f.max_len : static_cast<int>(input.size()) * 2 + 2;

    MonotonicConfig attn = ckpt.config.attn;
    attn.noise_std = 0.0;  // decoding is deterministic: no energy noise

    const Memory memory = encode(ckpt.params, input);
    std::printf("input: %s\n", join_tokens(input).c_str());
    if (!reference.empty()) {
        std::printf("reference: %s\n", join_tokens(reference).c_str());
    }

    if (f.mode == "soft") {
        Mat alphas;
        const std::vector<int> tokens = decode_greedy_soft(
            ckpt.params, memory, max_len, attn, f.dump_alpha ? &alphas : nullptr);
        std::printf("tokens (soft): %s\n", join_tokens(tokens).c_str());
        if (f.dump_alpha) {
            std::printf("# attention weights, one row per decode step\n");
            std::printf("step");
            for (Eigen::Index j = 0; j < alphas.cols(); ++j) {
                std::printf(",alpha_%ld", static_cast<long>(j + 1));
            }
            std::printf("\n");
            for (Eigen::Index i = 0; i < alphas.rows(); ++i) {
                std::printf("%ld", static_cast<long>(i + 1));
                for (Eigen::Index j = 0; j < alphas.cols(); ++j) {
                    std::printf(",%.9g", alphas(i, j));
                }
                std::printf("\n");
                if (log_debug()) {
                    std::fprintf(stderr, "[debug] alpha row %ld sum %.12f\n",
                                 static_cast<long>(i + 1), alphas.row(i).sum());
                }
            }
        }
    } else {
        const HardDecodeResult hard =
            decode_greedy_hard(ckpt.params, memory, max_len, attn);
        std::printf("tokens (hard): %s\n", join_tokens(hard.tokens).c_str());
        std::printf("energy evals: %d (bound T+U = %ld)\n", hard.energy_evals,
                    static_cast<long>(memory.length()) + max_len);
        if (f.dump_alpha) {
            std::printf("# selected memory index per decode step (0 = fell off)\n");
            std::printf("step,selected\n");
            for (std::size_t i = 0; i < hard.selected.size(); ++i) {
                std::printf("%ld,%d\n", static_cast<long>(i + 1),
                            hard.selected[i]);
            }
        }
    }
    return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateFlags {
    int T = 5;
    int U = 4;
    std::uint64_t seed = 0;
    double tol = 1e-9;
    std::string semantics = "absorbing";
    std::string config;
    bool report_gap = false;
    int mc_samples = 100000;
};

int run_simulate(const SimulateFlags& f) {
    EchoBlock echo("simulate");
    echo.add("T", f.T);
    echo.add("U", f.U);
    echo.add("seed", f.seed);
    echo.add("tol", f.tol);
    echo.add("semantics", f.semantics);
    echo.add("report-gap", f.report_gap);
    echo.add("mc-samples", f.mc_samples);
    echo.add("config", f.config);
    echo.print();

    SeededRng rng(f.seed, 0);
    Mat p(f.U, f.T);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
            p(i, j) = 0.02 + 0.96 * rng.next_unit();
        }
    }

    const Mat exact = enumerate_alpha_exact(p);
    Mat rec(f.U, f.T), scan(f.U, f.T);
    AttentionWeights prev_rec = AttentionWeights::initial(f.T);
    AttentionWeights prev_scan = AttentionWeights::initial(f.T);
    const MonotonicConfig scan_cfg;  // clamped denominators, default eps
    for (int i = 0; i < f.U; ++i) {
        const Vec p_row = p.row(i).transpose();
        prev_rec = monotonic_alpha_recurrence(p_row, prev_rec);
        prev_scan = monotonic_alpha_scan(p_row, prev_scan, scan_cfg);
        rec.row(i) = prev_rec.alpha.transpose();
        scan.row(i) = prev_scan.alpha.transpose();
    }
    const double max_rec = (rec - exact).cwiseAbs().maxCoeff();
    const double max_scan = (scan - exact).cwiseAbs().maxCoeff();
    std::printf("max |recurrence - exact| = %.6e\n", max_rec);
    std::printf("max |scan - exact| = %.6e\n", max_scan);

    if (f.report_gap) {
        const HardSemantics sem = f.semantics == "rescanning"
                                      ? HardSemantics::kRescanning
                                      : HardSemantics::kAbsorbing;
        const Mat mc = monte_carlo_alpha(p, f.mc_samples, f.seed + 1, sem);
        const double gap = (mc - exact).cwiseAbs().maxCoeff();
        std::printf("%s-vs-absorbing gap (monte carlo, n=%d) = %.6e\n",
                    f.semantics.c_str(), f.mc_samples, gap);
    }

    const bool pass = max_rec < f.tol && max_scan < f.tol;
    std::printf("%s (tol %.3e)\n", pass ? "PASS" : "FAIL", f.tol);
    return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// checkgrad

struct CheckgradFlags {
    std::string op;  // empty = all
    std::string config;
    double h = 1e-6;
    int instances = 50;
    std::uint64_t seed = 0;
};

std::string resolve_op_name(const std::string& requested) {
    // Friendly aliases for the most commonly probed operations.
    if (requested == "monotonic_alpha") return "alpha_recurrence";
    if (requested == "monotonic_alpha_scan") return "alpha_scan_clamped";
    return requested;
}

int run_checkgrad(const CheckgradFlags& f) {
    constexpr double kRelTol = 1e-5;  // acceptance bar; not configurable
    const std::vector<std::string> names = gradcheck_op_names();

    std::vector<std::string> selected;
    if (f.op.empty()) {
        selected = names;
    } else {
        const std::string resolved = resolve_op_name(f.op);
        if (std::find(names.begin(), names.end(), resolved) == names.end()) {
            std::ostringstream os;
            os << "checkgrad: unknown op '" << f.op << "'; valid ops:";
            for (const auto& n : names) os << ' ' << n;
            std::cerr << os.str() << "\n";
            return 2;
        }
        selected.push_back(resolved);
    }

    EchoBlock echo("checkgrad");
    echo.add("op", f.op.empty() ? std::string("(all)") : f.op);
    echo.add("h", f.h);
    echo.add("instances", f.instances);
    echo.add("rel-tol", kRelTol);
    echo.add("seed", f.seed);
    echo.add("config", f.config);
    echo.print();

    bool all_pass = true;
    std::printf("%-22s %9s %14s %14s  %s\n", "op", "instances", "worst-rel",
                "worst-abs", "status");
    for (const auto& name : selected) {
        const OpCheckResult r =
            run_gradcheck_op(name, f.instances, f.h, kRelTol, f.seed);
        all_pass = all_pass && r.pass;
        std::printf("%-22s %9d %14.6e %14.6e  %s\n", r.op.c_str(), r.instances,
                    r.max_rel_error, r.max_abs_error, r.pass ? "pass" : "FAIL");
    }
    std::printf("%s\n", all_pass ? "all gradients pass" : "gradient check FAILED");
    return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// bench

struct BenchFlags {
    std::string out;
    std::string config;
    std::string saturation = "uniform";
    std::vector<int> T_values;
    std::vector<int> U_values;
    int trials = 0;   // 0 = BenchConfig default
    int warmup = -1;  // -1 = BenchConfig default
    int dim = 0;      // 0 = BenchConfig default
    std::uint64_t seed = 0;
};

int run_bench(const BenchFlags& f) {
    BenchConfig cfg;
    if (!f.T_values.empty()) cfg.T_values = f.T_values;
    if (!f.U_values.empty()) cfg.U_values = f.U_values;
    if (f.trials > 0) cfg.trials = f.trials;
    if (f.warmup >= 0) cfg.warmup = f.warmup;
    if (f.dim > 0) cfg.d_h = cfg.d_s = cfg.d_a = f.dim;
    cfg.seed = f.seed;
    cfg.saturation = f.saturation == "immediate" ? HardSaturation::kImmediate
                                                 : HardSaturation::kUniformCoverage;

    EchoBlock echo("bench");
    echo.add("out", f.out);
    echo.add("config", f.config);
    echo.add("T-values", cfg.T_values);
    echo.add("U-values", cfg.U_values);
    echo.add("dim", cfg.d_h);
    echo.add("trials", cfg.trials);
    echo.add("warmup", cfg.warmup);
    echo.add("seed", cfg.seed);
    echo.add("saturation", f.saturation);
    echo.print();

    const std::vector<BenchCell> cells = speedup_grid(cfg);
    if (log_info()) {
        for (const auto& c : cells) {
            std::printf("T=%-4d U=%-5d softmax %.6fs hard %.6fs speedup %.2fx (evals %lld)\n",
                        c.T, c.U, c.softmax_median_s, c.hard_median_s,
                        c.speedup_median, c.hard_energy_evals);
        }
    }
    append_grid_csv(f.out, cfg, cells);

    const auto [min_it, max_it] = std::minmax_element(
        cells.begin(), cells.end(), [](const BenchCell& a, const BenchCell& b) {
            return a.speedup_median < b.speedup_median;
        });
    std::printf("speedup (median): min %.2fx at T=%d U=%d, max %.2fx at T=%d U=%d\n",
                min_it->speedup_median, min_it->T, min_it->U,
                max_it->speedup_median, max_it->T, max_it->U);
    std::printf("wrote grid: %s\n", f.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args;
    try {
        args = expand_config_args(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    CLI::App app{"monotonic-attention toolkit: train, decode, validate, benchmark"};
    app.require_subcommand(1);

    TrainFlags tf;
    CLI::App* train = app.add_subcommand("train", "train a toy model");
    train->add_option("--out", tf.out, "checkpoint output path")->required();
    train->add_option("--metrics", tf.metrics,
                      "metrics CSV path (default: <out>.metrics.csv)");
    train->add_option("--config", tf.config, "key = value config file");
    train->add_option("--seed", tf.seed, "training seed");
    train->add_option("--task-seed", tf.task_seed, "task generation seed");
    train->add_option("--vocab", tf.vocab, "task vocabulary size")
        ->check(CLI::Range(2, 1000));
    train->add_option("--energy", tf.energy, "energy function variant")
        ->check(CLI::IsMember({"modified", "dot"}));
    train->add_option("--steps", tf.cfg.max_steps, "training steps")
        ->check(CLI::Range(1, 1000000));
    train->add_option("--batch", tf.cfg.batch_size, "batch size")
        ->check(CLI::Range(1, 4096));
    train->add_option("--lr", tf.cfg.lr, "Adam learning rate")
        ->check(CLI::PositiveNumber);
    train->add_option("--lr-decay-rate", tf.cfg.lr_decay_rate,
                      "stepwise exponential lr decay factor");
    train->add_option("--lr-decay-steps", tf.cfg.lr_decay_steps,
                      "steps per lr decay application (0 = off)");
    train->add_option("--clip", tf.cfg.clip_norm, "global gradient clip norm")
        ->check(CLI::PositiveNumber);
    train->add_option("--noise", tf.cfg.attn.noise_std,
                      "pre-sigmoid energy noise std");
    train->add_option("--noise-off-step", tf.cfg.noise_off_step,
                      "disable energy noise from this step on (0 = never)");
    train->add_option("--tau", tf.cfg.attn.tau, "hard selection threshold");
    train->add_option("--min-len", tf.cfg.min_len, "min training length");
    train->add_option("--max-len", tf.cfg.max_len, "max training length");
    train->add_option("--eval-interval", tf.cfg.eval_interval,
                      "steps between evaluations");
    train->add_option("--eval-examples", tf.cfg.eval_examples,
                      "held-out examples per evaluation");
    train->add_option("--init-scale", tf.cfg.init_scale, "init weight scale");
    train->add_option("--energy-r", tf.cfg.energy_r, "energy offset init");
    train->add_option("--d-emb", tf.cfg.dims.d_emb, "embedding dim");
    train->add_option("--d-h", tf.cfg.dims.d_h, "encoder hidden dim");
    train->add_option("--d-s", tf.cfg.dims.d_s, "decoder hidden dim");
    train->add_option("--d-a", tf.cfg.dims.d_a, "attention hidden dim");

    DecodeFlags df;
    CLI::App* decode = app.add_subcommand("decode", "decode with a checkpoint");
    decode->add_option("--ckpt", df.ckpt, "checkpoint path")->required();
    decode->add_option("--mode", df.mode, "attention mode")
        ->check(CLI::IsMember({"soft", "hard"}));
    decode->add_option("--config", df.config, "key = value config file");
    decode->add_option("--input", df.input,
                       "comma-separated input tokens (default: sample a pair)")
        ->delimiter(',');
    decode->add_option("--seed", df.seed, "seed for sampling an input pair");
    decode->add_option("--max-len", df.max_len,
                       "decode length cap (0 = 2*input+2)");
    decode->add_flag("--dump-alpha", df.dump_alpha,
                     "print attention as CSV (soft) or index path (hard)");

    SimulateFlags sf;
    CLI::App* simulate =
        app.add_subcommand("simulate", "compare alignment recurrences to exact"
                                       " enumeration");
    simulate->add_option("--T", sf.T, "memory length")
        ->check(CLI::Range(1, kOracleMaxMemory));
    simulate->add_option("--U", sf.U, "output length")
        ->check(CLI::Range(1, kOracleMaxOutputs));
    simulate->add_option("--seed", sf.seed, "instance seed");
    simulate->add_option("--tol", sf.tol, "pass threshold (strict <)");
    simulate->add_option("--semantics", sf.semantics, "hard fall-off semantics")
        ->check(CLI::IsMember({"absorbing", "rescanning"}));
    simulate->add_flag("--report-gap", sf.report_gap,
                       "also report monte-carlo gap vs absorbing expectation");
    simulate->add_option("--mc-samples", sf.mc_samples,
                         "monte-carlo sample count for --report-gap")
        ->check(CLI::Range(100, 10000000));
    simulate->add_option("--config", sf.config, "key = value config file");

    CheckgradFlags gf;
    CLI::App* checkgrad =
        app.add_subcommand("checkgrad", "finite-difference gradient suite");
    // long-only help here so the short -h slot cannot shadow the --h flag
    checkgrad->set_help_flag("--help", "print help");
    checkgrad->add_option("--op", gf.op, "restrict to one op (default: all)");
    checkgrad->add_option("--h", gf.h, "finite-difference step")
        ->check(CLI::PositiveNumber);
    checkgrad->add_option("--instances", gf.instances, "instances per op")
        ->check(CLI::Range(1, 100000));
    checkgrad->add_option("--seed", gf.seed, "suite seed");
    checkgrad->add_option("--config", gf.config, "key = value config file");

    BenchFlags bf;
    CLI::App* bench =
        app.add_subcommand("bench", "softmax vs hard monotonic speed grid");
    bench->add_option("--out", bf.out, "grid CSV output path (appended)")
        ->required();
    bench->add_option("--T-values", bf.T_values, "memory lengths")
        ->delimiter(',');
    bench->add_option("--U-values", bf.U_values, "output lengths")
        ->delimiter(',');
    bench->add_option("--trials", bf.trials, "timed trials per cell")
        ->check(CLI::Range(10, 100000));
    bench->add_option("--warmup", bf.warmup, "untimed warmup trials per cell")
        ->check(CLI::Range(0, 1000));
    bench->add_option("--dim", bf.dim, "hidden dimension for all projections")
        ->check(CLI::Range(1, 4096));
    bench->add_option("--seed", bf.seed, "workload seed");
    bench->add_option("--saturation", bf.saturation,
                      "planned hard-attention path shape")
        ->check(CLI::IsMember({"uniform", "immediate"}));
    bench->add_option("--config", bf.config, "key = value config file");

    std::reverse(args.begin(), args.end());  // CLI11 vector parse order
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*train) return run_train(tf);
        if (*decode) return run_decode(df);
        if (*simulate) return run_simulate(sf);
        if (*checkgrad) return run_checkgrad(gf);
        if (*bench) return run_bench(bf);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;  // unreachable with require_subcommand(1)
}
