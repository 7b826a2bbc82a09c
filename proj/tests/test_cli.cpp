// SPDX-License-Identifier: Apache-2.0
//
// Subprocess tests of the command-line tool: exit codes, determinism of the
// produced artifacts, record replay, and the smoke paths of every subcommand.
#include <doctest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "monkey/checkpoint.hpp"
#include "monkey/eval.hpp"
#include "monkey/fs.hpp"
#include "monkey/png_io.hpp"

using namespace monkey;

namespace {

struct CmdResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string temp_dir() {
    static const std::string dir = [] {
        const auto d = std::filesystem::temp_directory_path() / "monkey_cli_tests";
        std::filesystem::create_directories(d);
        return d.string();
    }();
    return dir;
}

std::string temp_path(const std::string& name) { return temp_dir() + "/" + name; }

CmdResult run_cli(const std::string& args) {
    static int call = 0;
    const std::string out_path = temp_path("stdout." + std::to_string(call));
    const std::string err_path = temp_path("stderr." + std::to_string(call));
    ++call;
    const std::string cmd =
        std::string("\"") + MONKEY_CLI_PATH + "\" " + args + " >" + out_path + " 2>" + err_path;
    const int status = std::system(cmd.c_str());
    CmdResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text_file(out_path);
    r.err = read_text_file(err_path);
    return r;
}

bool same_bytes(const std::string& a, const std::string& b) {
    return read_file_bytes(a) == read_file_bytes(b);
}

}  // namespace

TEST_CASE("--version prints the tool name and exits cleanly") {
    const CmdResult r = run_cli("--version");
    CHECK(r.code == 0);
    CHECK(r.out.find("monkey 0.1.0") != std::string::npos);
}

TEST_CASE("help exits zero; parse errors exit two") {
    CHECK(run_cli("--help").code == 0);
    CHECK(run_cli("generate --help").code == 0);
    CHECK(run_cli("generate --no-such-flag").code == 2);
    CHECK(run_cli("no-such-subcommand").code == 2);
    CHECK(run_cli("").code == 2);  // a subcommand is required
    CHECK(run_cli("generate --method bogus").code == 2);
}

TEST_CASE("invalid generation settings exit one and name the module") {
    const CmdResult r =
        run_cli("generate --mask-first 9 --mask-last 99 --out " + temp_path("never.png"));
    CHECK(r.code == 1);
    CHECK(r.err.find("error:") != std::string::npos);
    CHECK(r.err.find("[config]") != std::string::npos);
}

TEST_CASE("generate is byte-deterministic for both methods") {
    const std::string a = temp_path("det_a.png"), b = temp_path("det_b.png");
    CHECK(run_cli("generate --method baseline --seed 33 --out " + a).code == 0);
    CHECK(run_cli("generate --method baseline --seed 33 --out " + b).code == 0);
    CHECK(same_bytes(a, b));

    const std::string ma = temp_path("det_ma.png"), mb = temp_path("det_mb.png");
    CHECK(run_cli("generate --method monkey --seed 33 --out " + ma).code == 0);
    CHECK(run_cli("generate --method monkey --seed 33 --out " + mb).code == 0);
    CHECK(same_bytes(ma, mb));
    CHECK(same_bytes(temp_path("det_ma.pass1.png"), temp_path("det_mb.pass1.png")));
    CHECK(same_bytes(temp_path("det_ma.mask.png"), temp_path("det_mb.mask.png")));

    // Different seeds give different images.
    const std::string c = temp_path("det_c.png");
    CHECK(run_cli("generate --method baseline --seed 34 --out " + c).code == 0);
    CHECK_FALSE(same_bytes(a, c));
}

TEST_CASE("the emitted record replays to the identical image") {
    const std::string out = temp_path("rec.png");
    const CmdResult first = run_cli("generate --method monkey --seed 55 --prompt \"on the beach\" "
                                    "--policy otsu --out " +
                                    out);
    REQUIRE(first.code == 0);
    REQUIRE(std::filesystem::exists(temp_path("rec.record.cfg")));

    const std::string replay = temp_path("rec_replay.png");
    const CmdResult second =
        run_cli("generate --config " + temp_path("rec.record.cfg") + " --out " + replay);
    REQUIRE(second.code == 0);
    CHECK(same_bytes(out, replay));
    CHECK(same_bytes(temp_path("rec.mask.png"), temp_path("rec_replay.mask.png")));
}

TEST_CASE("train writes a loadable checkpoint and a loss curve") {
    const std::string ckpt = temp_path("smoke.mnky");
    const CmdResult r = run_cli(
        "train --samples 8 --iterations 4 --batch-size 2 --report-interval 2 "
        "--decoder-iterations 2 --out " +
        ckpt);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("training denoiser") != std::string::npos);

    const Model m = load_checkpoint(ckpt);
    CHECK(m.weights.count("up1.attn2.wq") == 1);

    const std::string csv = read_text_file(ckpt + ".loss.csv");
    CHECK(csv.rfind("iteration,loss\n", 0) == 0);
    CHECK(csv.find("\n2,") != std::string::npos);  // a reported iteration line

    // A trained checkpoint feeds straight back into generation.
    const std::string gen = temp_path("from_ckpt.png");
    CHECK(run_cli("generate --model " + ckpt + " --method monkey --out " + gen).code == 0);
    CHECK(std::filesystem::exists(gen));
}

TEST_CASE("inspect writes one attention grid per requested layer") {
    const std::string dir = temp_path("grids");
    const CmdResult r = run_cli("inspect --method monkey --layer up1.attn2 --layer mid.attn "
                                "--seed 12 --out-dir " +
                                dir);
    REQUIRE(r.code == 0);

    // 4 capture-pass + 8 generation-pass rows; 5 columns; 8x upsampling with
    // 2-pixel separators.
    const Tensor big = read_png_rgb(dir + "/attn-up1.attn2.png");
    CHECK(big.dim(1) == 12 * 64 + 11 * 2);
    CHECK(big.dim(2) == 5 * 64 + 4 * 2);
    const Tensor mid = read_png_rgb(dir + "/attn-mid.attn.png");
    CHECK(mid.dim(1) == 12 * 32 + 11 * 2);
    CHECK(mid.dim(2) == 5 * 32 + 4 * 2);
}

TEST_CASE("eval writes a scatter CSV that loads back") {
    const std::string prompts = temp_path("prompts.txt");
    atomic_write_file(prompts, "in the jungle\non the beach\n");
    const std::string csv = temp_path("scatter.csv");
    const CmdResult r = run_cli("eval --subjects 1 --method baseline --prompts-file " + prompts +
                                " --base-seed 77 --out " + csv);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("baseline: 2 cells (0 failed)") != std::string::npos);

    const std::vector<ScatterRow> rows = load_scatter(csv);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].method == "baseline");
    CHECK(std::isfinite(rows[0].text_sim_mean));
    CHECK(std::isfinite(rows[0].image_sim_mean));
}

TEST_CASE("selftest passes") {
    const CmdResult r = run_cli("selftest");
    CHECK(r.code == 0);
    CHECK(r.out.find("selftest passed") != std::string::npos);
    CHECK(r.out.find("FAILED") == std::string::npos);
}
