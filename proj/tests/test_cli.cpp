// Integration tests for the command-line front end. Each case invokes the
// real binary (path injected as MONATTN_CLI_PATH by the build) and checks
// exit codes, pinned output fragments, and written artifacts.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

CliResult run_cli(const std::string& args, const std::string& env = "") {
    static int invocation = 0;
    const std::string tag = "cli_io_" + std::to_string(invocation++);
    const std::string out_path = tag + ".out";
    const std::string err_path = tag + ".err";
    std::string cmd = env.empty() ? "" : env + " ";
    cmd += std::string("'") + MONATTN_CLI_PATH + "' " + args + " > " + out_path +
           " 2> " + err_path;
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    std::remove(out_path.c_str());
    std::remove(err_path.c_str());
    return r;
}

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

// Shared tiny-training flag block: a few seconds end to end.
const char* kTinyTrain =
    "--task-seed 11 --vocab 6 --d-emb 4 --d-h 8 --d-s 8 --d-a 8 --steps 20 "
    "--batch 2 --eval-interval 10 --eval-examples 4 --min-len 2 --max-len 5 "
    "--seed 3";

double parse_worst_rel(const std::string& out, const std::string& op) {
    std::istringstream is(out);
    std::string line;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string name;
        int instances = 0;
        double rel = 0.0, abs = 0.0;
        if (ls >> name >> instances >> rel >> abs && name == op) return rel;
    }
    return -1.0;
}

}  // namespace

TEST_CASE("usage errors exit 2 and help exits 0") {
    CHECK(run_cli("").code == 2);
    CHECK(run_cli("frobnicate").code == 2);
    CHECK(run_cli("--help").code == 0);
    CHECK(run_cli("train --seed 3").code == 2);  // missing --out
    CHECK(run_cli("simulate --T 9").code == 2);  // beyond exact-mode limit
    CHECK(run_cli("simulate --U 7").code == 2);
    CHECK(run_cli("decode --ckpt nope.json --mode fuzzy").code == 2);
    CHECK(run_cli("checkgrad --op no_such_op --instances 2").code == 2);
    CHECK(run_cli("bench --T-values 4").code == 2);  // missing --out
}

TEST_CASE("simulate matches the exact enumeration and honors --tol") {
    const CliResult ok = run_cli("simulate --T 5 --U 4 --seed 2 --tol 1e-9");
    CHECK(ok.code == 0);
    CHECK(contains(ok.out, "resolved config (simulate):"));
    CHECK(contains(ok.out, "max |recurrence - exact|"));
    CHECK(contains(ok.out, "max |scan - exact|"));
    CHECK(contains(ok.out, "PASS"));

    // strict < comparison: tol 0 can never pass in floating point
    const CliResult zero = run_cli("simulate --T 5 --U 4 --seed 2 --tol 0");
    CHECK(zero.code == 1);
    CHECK(contains(zero.out, "FAIL"));

    const CliResult gap = run_cli(
        "simulate --T 4 --U 3 --seed 5 --semantics rescanning --report-gap "
        "--mc-samples 2000");
    CHECK(gap.code == 0);
    CHECK(contains(gap.out, "rescanning-vs-absorbing gap (monte carlo, n=2000)"));
}

TEST_CASE("checkgrad reports per-op errors and honors --op and --h") {
    const CliResult one =
        run_cli("checkgrad --op soft_step_modified --instances 3");
    CHECK(one.code == 0);
    CHECK(contains(one.out, "soft_step_modified"));
    CHECK(contains(one.out, "all gradients pass"));
    CHECK(!contains(one.out, "gru_cell"));  // restricted to one op

    const CliResult alias = run_cli("checkgrad --op monotonic_alpha --instances 3");
    CHECK(alias.code == 0);
    CHECK(contains(alias.out, "alpha_recurrence"));

    // a coarse step degrades the reported error
    const CliResult fine = run_cli("checkgrad --op gru_cell --instances 3");
    const CliResult coarse =
        run_cli("checkgrad --op gru_cell --instances 3 --h 1e-3");
    const double rel_fine = parse_worst_rel(fine.out, "gru_cell");
    const double rel_coarse = parse_worst_rel(coarse.out, "gru_cell");
    CHECK(rel_fine > 0.0);
    CHECK(rel_coarse > rel_fine);
}

TEST_CASE("train writes deterministic artifacts and echoes its config") {
    const std::string base = std::string("train ") + kTinyTrain;
    const CliResult a = run_cli(base + " --out cli_ck_a.json");
    CHECK(a.code == 0);
    CHECK(contains(a.out, "resolved config (train):"));
    CHECK(contains(a.out, "steps = 20"));
    CHECK(contains(a.out, "wrote checkpoint: cli_ck_a.json"));
    CHECK(contains(a.out, "final: step 20"));

    const CliResult b = run_cli(base + " --out cli_ck_b.json");
    CHECK(b.code == 0);

    const std::string ck_a = slurp("cli_ck_a.json");
    const std::string ck_b = slurp("cli_ck_b.json");
    REQUIRE(!ck_a.empty());
    CHECK(ck_a == ck_b);  // same seed, same flags -> byte-identical state

    const std::string mx_a = slurp("cli_ck_a.json.metrics.csv");
    const std::string mx_b = slurp("cli_ck_b.json.metrics.csv");
    REQUIRE(!mx_a.empty());
    CHECK(mx_a == mx_b);
    CHECK(contains(mx_a, "step,loss,token_acc_soft,token_acc_hard,seq_acc,agreement"));
}

TEST_CASE("train --energy dot routes to the dot parameterization") {
    const CliResult r = run_cli(std::string("train ") + kTinyTrain +
                                " --energy dot --out cli_ck_dot.json");
    CHECK(r.code == 0);
    const std::string ck = slurp("cli_ck_dot.json");
    CHECK(contains(ck, "attn_dot_w"));
    CHECK(!contains(ck, "attn_query_w"));
    CHECK(contains(ck, "\"dot\""));
}

TEST_CASE("decode reads checkpoints, dumps alignments, and rejects garbage") {
    const CliResult trained = run_cli(std::string("train ") + kTinyTrain +
                                      " --out cli_ck_dec.json");
    REQUIRE(trained.code == 0);

    const CliResult soft =
        run_cli("decode --ckpt cli_ck_dec.json --mode soft --seed 5");
    CHECK(soft.code == 0);
    CHECK(contains(soft.out, "input: "));
    CHECK(contains(soft.out, "reference: "));
    CHECK(contains(soft.out, "tokens (soft): "));

    // soft alpha dump: CSV rows, each sub-stochastic
    const CliResult dump = run_cli(
        "decode --ckpt cli_ck_dec.json --mode soft --seed 5 --dump-alpha");
    CHECK(dump.code == 0);
    REQUIRE(contains(dump.out, "step,alpha_1"));
    std::istringstream is(dump.out.substr(dump.out.find("step,alpha_1")));
    std::string line;
    std::getline(is, line);  // header
    int rows = 0;
    while (std::getline(is, line) && !line.empty() &&
           std::isdigit(static_cast<unsigned char>(line[0]))) {
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');  // step index
        double sum = 0.0;
        while (std::getline(ls, cell, ',')) {
            const double v = std::stod(cell);
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum <= 1.0 + 1e-9);
        ++rows;
    }
    CHECK(rows >= 1);

    const CliResult hard = run_cli(
        "decode --ckpt cli_ck_dec.json --mode hard --seed 5 --dump-alpha");
    CHECK(hard.code == 0);
    CHECK(contains(hard.out, "tokens (hard): "));
    CHECK(contains(hard.out, "energy evals: "));
    CHECK(contains(hard.out, "step,selected"));

    const CliResult given =
        run_cli("decode --ckpt cli_ck_dec.json --input 1,2,3");
    CHECK(given.code == 0);
    CHECK(contains(given.out, "input: 1 2 3"));
    CHECK(!contains(given.out, "reference: "));  // no reference for raw input

    const CliResult bad_tok =
        run_cli("decode --ckpt cli_ck_dec.json --input 1,99");
    CHECK(bad_tok.code == 1);
    CHECK(contains(bad_tok.err, "outside vocab"));

    std::ofstream("cli_ck_garbage.json") << "not a checkpoint";
    const CliResult corrupt = run_cli("decode --ckpt cli_ck_garbage.json");
    CHECK(corrupt.code == 1);
    CHECK(contains(corrupt.err, "error: "));

    const CliResult missing = run_cli("decode --ckpt cli_no_such_ck.json");
    CHECK(missing.code == 1);
}

TEST_CASE("bench writes a grid CSV and a min/max summary") {
    std::remove("cli_bench.csv");
    const CliResult r = run_cli(
        "bench --out cli_bench.csv --T-values 4,8 --U-values 3,6 --dim 8 "
        "--trials 10 --warmup 1 --seed 9");
    CHECK(r.code == 0);
    CHECK(contains(r.out, "speedup (median): min "));
    CHECK(contains(r.out, " max "));

    const std::string csv = slurp("cli_bench.csv");
    REQUIRE(!csv.empty());
    CHECK(contains(csv, "T,U,softmax_s,hard_s,speedup,hard_energy_evals"));
    int data_rows = 0;
    std::istringstream is(csv);
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && std::isdigit(static_cast<unsigned char>(line[0]))) {
            ++data_rows;
        }
    }
    CHECK(data_rows == 4);  // 2 x 2 grid

    const CliResult io = run_cli(
        "bench --out cli_no_such_dir_xyz/b.csv --T-values 2 --U-values 2 "
        "--dim 4 --trials 10 --warmup 0");
    CHECK(io.code == 1);
}

TEST_CASE("quiet mode still echoes the resolved config") {
    const CliResult r =
        run_cli("simulate --T 3 --U 2 --seed 1", "MONATTN_LOG=quiet");
    CHECK(r.code == 0);
    CHECK(contains(r.out, "resolved config (simulate):"));
}

TEST_CASE("config file supplies values and flags override them") {
    std::ofstream cfg("cli_train.cfg");
    cfg << "# tiny config\n"
        << "steps = 25\n"
        << "batch = 2\n"
        << "d_emb = 4\n"          // underscore keys normalize to dashes
        << "d-h = 8\n"
        << "d-s = 8\n"
        << "d-a = 8\n"
        << "vocab = 6\n"
        << "task-seed = 11\n"
        << "eval-interval = 25\n"
        << "eval-examples = 4\n"
        << "min-len = 2\n"
        << "max-len = 5\n";
    cfg.close();

    const CliResult r = run_cli(
        "train --config cli_train.cfg --steps 30 --seed 3 --out cli_ck_cfg.json");
    CHECK(r.code == 0);
    CHECK(contains(r.out, "steps = 30"));  // flag wins over file
    CHECK(contains(r.out, "batch = 2"));   // file value applied
    CHECK(contains(r.out, "final: step 30"));

    const CliResult missing =
        run_cli("train --config cli_no_such.cfg --out x.json");
    CHECK(missing.code == 2);
    CHECK(contains(missing.err, "cannot open"));

    std::ofstream bad("cli_bad.cfg");
    bad << "steps 25\n";  // no '='
    bad.close();
    const CliResult malformed =
        run_cli("train --config cli_bad.cfg --out x.json");
    CHECK(malformed.code == 2);

    std::ofstream unknown("cli_unknown.cfg");
    unknown << "bogus_key = 1\n";
    unknown.close();
    const CliResult extra = run_cli(std::string("train --config cli_unknown.cfg ") +
                                    kTinyTrain + " --out x.json");
    CHECK(extra.code == 2);  // unrecognized injected flag is a usage error
}
