// SPDX-License-Identifier: Apache-2.0
//
// Command line for the desk-scale diffusion engine: train the toy model,
// generate with the baseline or two-pass method, dump attention grids,
// run the eval grid, and self-test the core invariants.

#include <CLI11.hpp>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "monkey/checkpoint.hpp"
#include "monkey/config_file.hpp"
#include "monkey/error.hpp"
#include "monkey/eval.hpp"
#include "monkey/fs.hpp"
#include "monkey/inspect.hpp"
#include "monkey/mask.hpp"
#include "monkey/model.hpp"
#include "monkey/pipeline.hpp"
#include "monkey/png_io.hpp"
#include "monkey/prompts.hpp"
#include "monkey/sampler.hpp"
#include "monkey/trainer.hpp"

namespace {

// Seed of the bundled fallback reference subject (used when --reference is
// omitted), chosen once and fixed for reproducibility.
constexpr std::uint64_t kBundledReferenceSeed = 117;

struct GenerateOpts {
    std::string model;
    std::uint64_t seed = 7;
    std::string prompt = "in the snow";
    std::string reference;
    std::string method = "monkey";
    std::string out = "out.png";
    float ip_scale = 1.0f;
    int pass1_steps = 4;
    int pass1_first = 2, pass1_last = 3;
    int pass2_steps = 8;
    int mask_first = 3, mask_last = 6;
    std::string capture_layer = monkey::kDefaultCaptureLayer;
    std::string policy = "fixed";
    float threshold = 0.5f;
    int mask_token = 0;
    bool vote = false;
    bool complement = false;
    bool single_site = false;
    std::uint64_t init_seed = 1;
};

struct TrainOpts {
    std::string out = "toy_model.mnky";
    int samples = 128;
    std::uint64_t data_seed = 11;
    float lr = 0.02f;
    float momentum = 0.9f;
    int batch_size = 4;
    int iterations = 1000;
    std::uint64_t seed = 7;
    int report_interval = 25;
    int decoder_iterations = 400;
    float decoder_lr = 0.05f;
    std::uint64_t init_seed = 1;
    std::string loss_csv;  // empty: derive from --out
};

struct InspectOpts {
    std::string model;
    std::uint64_t seed = 7;
    std::string prompt = "in the snow";
    std::string reference;
    std::string method = "monkey";
    std::vector<std::string> layers = {monkey::kDefaultCaptureLayer};
    std::string out_dir = ".";
    std::uint64_t init_seed = 1;
};

struct EvalOpts {
    std::string model;
    int subjects = 1;
    std::uint64_t subject_seed = 21;
    std::string prompts_file;
    std::string method = "both";
    std::uint64_t base_seed = 5;
    std::string out = "eval_scatter.csv";
    std::uint64_t init_seed = 1;
};

monkey::Model load_or_init(const std::string& path, std::uint64_t init_seed) {
    if (!path.empty()) return monkey::load_checkpoint(path);
    monkey::ModelConfig cfg;
    cfg.init_seed = init_seed;
    return monkey::init_model(cfg);
}

monkey::Tensor load_reference(const std::string& path) {
    if (!path.empty()) return monkey::read_png_rgb(path);
    return monkey::make_dataset(kBundledReferenceSeed, 1)[0].reference;
}

std::string strip_png_ext(const std::string& path) {
    if (path.size() > 4 && path.substr(path.size() - 4) == ".png") {
        return path.substr(0, path.size() - 4);
    }
    return path;
}

monkey::GenerationConfig to_generation_config(const GenerateOpts& o) {
    monkey::GenerationConfig cfg;
    cfg.seed.value = o.seed;
    cfg.prompt = o.prompt;
    cfg.reference_path = o.reference;
    cfg.ip_scale = o.ip_scale;
    cfg.pass1_steps = o.pass1_steps;
    cfg.pass1_window = {o.pass1_first, o.pass1_last};
    cfg.pass2_steps = o.pass2_steps;
    cfg.pass2_mask_window = {o.mask_first, o.mask_last};
    cfg.capture_layer = o.capture_layer;
    cfg.policy.mode = o.policy == "otsu" ? monkey::MaskPolicy::Mode::kOtsu
                                         : monkey::MaskPolicy::Mode::kFixed;
    cfg.policy.threshold = o.threshold;
    cfg.policy.average_binarized = o.vote;
    cfg.policy.complement_background = o.complement;
    cfg.mask_token = o.mask_token;
    cfg.mask_all_sites = !o.single_site;
    return cfg;
}

// Keys are written in `generate.<option>` form so the file can be fed back
// through --config, whose parser routes dotted keys to the subcommand.
void write_record(const std::string& path, const GenerateOpts& o) {
    monkey::save_config_file(
        path, {
                  {"generate.model", o.model},
                  {"generate.seed", std::to_string(o.seed)},
                  {"generate.prompt", o.prompt},
                  {"generate.reference", o.reference},
                  {"generate.method", o.method},
                  {"generate.out", o.out},
                  {"generate.ip-scale", std::to_string(o.ip_scale)},
                  {"generate.pass1-steps", std::to_string(o.pass1_steps)},
                  {"generate.pass1-first", std::to_string(o.pass1_first)},
                  {"generate.pass1-last", std::to_string(o.pass1_last)},
                  {"generate.pass2-steps", std::to_string(o.pass2_steps)},
                  {"generate.mask-first", std::to_string(o.mask_first)},
                  {"generate.mask-last", std::to_string(o.mask_last)},
                  {"generate.capture-layer", o.capture_layer},
                  {"generate.policy", o.policy},
                  {"generate.threshold", std::to_string(o.threshold)},
                  {"generate.mask-token", std::to_string(o.mask_token)},
                  {"generate.vote", o.vote ? "true" : "false"},
                  {"generate.complement", o.complement ? "true" : "false"},
                  {"generate.single-site", o.single_site ? "true" : "false"},
                  {"generate.init-seed", std::to_string(o.init_seed)},
              });
}

int run_generate(const GenerateOpts& o) {
    const monkey::Model model = load_or_init(o.model, o.init_seed);
    const monkey::Tensor reference = load_reference(o.reference);
    const monkey::GenerationConfig cfg = to_generation_config(o);
    monkey::validate_generation_config(cfg, model.cfg.unet);
    const std::string base = strip_png_ext(o.out);

    monkey::GenerationResult result;
    if (o.method == "monkey") {
        try {
            result = monkey::generate_monkey(cfg, model, reference);
        } catch (const monkey::MaskDerivationError& e) {
            monkey::write_png_rgb(base + ".pass1.png", e.pass1_image());
            std::cerr << "mask derivation failed; pass-1 image kept at " << base
                      << ".pass1.png\n";
            throw;
        }
        monkey::write_png_rgb(o.out, result.image);
        monkey::write_png_rgb(base + ".pass1.png", result.pass1_image);
        const monkey::Tensor big = monkey::resize_nearest(
            result.mask.grid, result.mask.grid.dim(0) * 8, result.mask.grid.dim(1) * 8);
        monkey::write_png_gray(base + ".mask.png", big);
        monkey::atomic_write_file(base + ".mask.txt",
                                  monkey::mask_provenance_text(result.mask));
        write_record(base + ".record.cfg", o);
        std::cout << "wrote " << o.out << ", " << base << ".pass1.png, " << base << ".mask.png, "
                  << base << ".mask.txt, " << base << ".record.cfg\n";
    } else {
        result = monkey::generate_baseline(cfg, model, reference);
        monkey::write_png_rgb(o.out, result.image);
        write_record(base + ".record.cfg", o);
        std::cout << "wrote " << o.out << ", " << base << ".record.cfg\n";
    }
    return 0;
}

int run_train(const TrainOpts& o) {
    monkey::ModelConfig mcfg;
    mcfg.init_seed = o.init_seed;
    monkey::Model model = monkey::init_model(mcfg);
    const auto dataset = monkey::make_dataset(o.data_seed, o.samples);

    monkey::TrainConfig tcfg;
    tcfg.lr = o.lr;
    tcfg.momentum = o.momentum;
    tcfg.batch_size = o.batch_size;
    tcfg.iterations = o.iterations;
    tcfg.seed = o.seed;
    tcfg.report_interval = o.report_interval;
    std::cout << "training denoiser: " << o.samples << " samples, " << o.iterations
              << " iterations\n";
    const auto history = monkey::run_training(model, dataset, tcfg);
    for (const auto& [it, loss] : history) {
        std::cout << "iter " << it << " loss " << loss << "\n";
    }
    std::string csv = "iteration,loss\n";
    for (const auto& [it, loss] : history) {
        csv += std::to_string(it) + "," + std::to_string(loss) + "\n";
    }
    const std::string csv_path = o.loss_csv.empty() ? o.out + ".loss.csv" : o.loss_csv;
    monkey::atomic_write_file(csv_path, csv);

    monkey::TrainConfig dcfg = tcfg;
    dcfg.iterations = o.decoder_iterations;
    dcfg.lr = o.decoder_lr;
    std::cout << "training decoder: " << o.decoder_iterations << " iterations\n";
    for (const auto& [it, loss] : monkey::run_decoder_training(model, dataset, dcfg)) {
        std::cout << "iter " << it << " loss " << loss << "\n";
    }

    monkey::save_checkpoint(o.out, model);
    std::cout << "wrote " << o.out << " and " << csv_path << "\n";
    return 0;
}

int run_inspect(const InspectOpts& o) {
    const monkey::Model model = load_or_init(o.model, o.init_seed);
    const monkey::Tensor reference = load_reference(o.reference);
    monkey::GenerationConfig cfg;
    cfg.seed.value = o.seed;
    cfg.prompt = o.prompt;
    monkey::validate_generation_config(cfg, model.cfg.unet);

    monkey::PipelineHooks hooks;
    hooks.retain_records = true;
    const monkey::GenerationResult result =
        o.method == "monkey" ? monkey::generate_monkey(cfg, model, reference, hooks)
                             : monkey::generate_baseline(cfg, model, reference, hooks);

    std::filesystem::create_directories(o.out_dir);
    for (const auto& layer : o.layers) {
        const std::string path = o.out_dir + "/attn-" + layer + ".png";
        monkey::dump_attention_grid(result.records, layer, path);
        std::cout << "wrote " << path << "\n";
    }
    return 0;
}

int run_eval(const EvalOpts& o) {
    const monkey::Model model = load_or_init(o.model, o.init_seed);
    const auto subjects = monkey::make_dataset(o.subject_seed, o.subjects);
    std::vector<std::string> prompts;
    if (o.prompts_file.empty()) {
        prompts = monkey::bundled_background_prompts();
    } else {
        const std::string text = monkey::read_text_file(o.prompts_file);
        size_t pos = 0;
        while (pos < text.size()) {
            size_t nl = text.find('\n', pos);
            if (nl == std::string::npos) nl = text.size();
            const std::string line = text.substr(pos, nl - pos);
            if (!line.empty()) prompts.push_back(line);
            pos = nl + 1;
        }
    }

    const monkey::ToyImageEmbedder image_embedder(model);
    const monkey::PooledPixelEmbedder identity_embedder;
    monkey::Embedders embedders{&image_embedder, &identity_embedder};
    monkey::GenerationConfig proto;
    monkey::SeedPolicy seeds{o.base_seed};

    std::vector<monkey::EvalRun> runs;
    for (const auto method : {monkey::Method::kBaseline, monkey::Method::kMonkey}) {
        if (o.method != "both" && o.method != monkey::method_name(method)) continue;
        runs.push_back(
            monkey::run_grid(subjects, prompts, method, model, embedders, proto, seeds));
        const auto& run = runs.back();
        std::cout << run.method << ": " << run.cells.size() << " cells (" << run.n_failed
                  << " failed), text_sim " << run.text_sim_mean << ", image_sim "
                  << run.image_sim_mean << ", identity_sim " << run.identity_sim_mean << "\n";
    }
    monkey::export_scatter(runs, o.out);
    std::cout << "wrote " << o.out << "\n";
    return 0;
}

#define SELFTEST(name, cond)                                     \
    do {                                                         \
        if (cond) {                                              \
            std::cout << "ok — " << (name) << "\n";              \
        } else {                                                 \
            std::cout << "FAILED — " << (name) << "\n";          \
            return 1;                                            \
        }                                                        \
    } while (0)

int run_selftest() {
    using namespace monkey;

    // Schedule nesting: the 4-step timesteps are a subset of the 8-step ones.
    {
        const Schedule s4 = make_schedule(4), s8 = make_schedule(8);
        bool subset = true;
        for (const int t : s4.timesteps) {
            bool found = false;
            for (const int u : s8.timesteps) found = found || u == t;
            subset = subset && found;
        }
        SELFTEST("schedule nesting (4-step ⊂ 8-step)", subset);
    }

    // Noise determinism: same seed, same bytes.
    {
        const NoiseSeed seed{42, kNoiseAlgorithm};
        SELFTEST("initial noise is seed-deterministic",
                 bitwise_equal(initial_noise(seed, {4, 16, 16}), initial_noise(seed, {4, 16, 16})));
    }

    // Attention rows are probability distributions.
    {
        DetRng rng(3);
        Tensor features({9, 8}), tokens({6, 8});
        for (auto& v : features.values()) v = static_cast<float>(rng.next_gauss());
        for (auto& v : tokens.values()) v = static_cast<float>(rng.next_gauss());
        Tensor wq({8, 8}), wk({8, 8}), wv({8, 8}), wo({8, 8});
        for (auto& v : wq.values()) v = static_cast<float>(0.3 * rng.next_gauss());
        for (auto& v : wk.values()) v = static_cast<float>(0.3 * rng.next_gauss());
        for (auto& v : wv.values()) v = static_cast<float>(0.3 * rng.next_gauss());
        for (auto& v : wo.values()) v = static_cast<float>(0.3 * rng.next_gauss());
        ConditioningSequence cond;
        cond.tokens = tokens;
        cond.text_span = {0, 2};
        cond.ip_span = {2, 6};
        cond.d_model = 8;
        AttentionWeights weights{&wq, &wk, &wv, &wo, 2};
        CaptureSink sink;
        cross_attention(features, cond, weights, {}, &sink, "self.test", 3, 3);
        double worst = 0.0;
        const auto& probs = sink.records.at(0).probs;
        for (int h = 0; h < 2; ++h) {
            for (int s = 0; s < 9; ++s) {
                double sum = 0.0;
                for (int t = 0; t < 6; ++t) sum += probs.at(h, s, t);
                worst = std::max(worst, std::abs(sum - 1.0));
            }
        }
        SELFTEST("attention rows sum to 1", worst < 1e-5);

        // Masking zeroes IP mass at background positions.
        IpMaskDirective directive;
        Tensor grid({3, 3});
        grid.at(1, 1) = 1.0f;
        directive.mask_grid = grid;
        CaptureSink masked_sink;
        cross_attention(features, cond, weights, directive, &masked_sink, "self.test", 3, 3);
        const auto& mp = masked_sink.records.at(0).probs;
        double ip_mass = 0.0;
        for (int h = 0; h < 2; ++h) {
            for (int s = 0; s < 9; ++s) {
                if (s == 4) continue;  // the one subject position
                for (int t = 2; t < 6; ++t) ip_mass += mp.at(h, s, t);
            }
        }
        SELFTEST("masked background positions carry zero IP mass", ip_mass == 0.0);
    }

    // Otsu splits an obvious bimodal map at the valley.
    {
        Tensor map({4, 4});
        for (int i = 0; i < 16; ++i) map.data()[i] = i < 8 ? 0.1f : 0.9f;
        MaskPolicy policy;
        policy.mode = MaskPolicy::Mode::kOtsu;
        float chosen = 0.0f;
        const Tensor mask = binarize(normalize01(map), policy, &chosen);
        int ones = 0;
        for (int i = 0; i < 16; ++i) ones += mask.data()[i] == 1.0f;
        SELFTEST("otsu finds the bimodal split", ones == 8 && chosen == 0.5f);
    }

    // Checkpoint round-trip through a temp file.
    {
        ModelConfig cfg;
        Model model = init_model(cfg);
        const std::string path =
            (std::filesystem::temp_directory_path() / "monkey_selftest.mnky").string();
        save_checkpoint(path, model);
        const Model loaded = load_checkpoint(path);
        bool equal = model_config_to_text(loaded.cfg) == model_config_to_text(model.cfg) &&
                     loaded.vocab.words == model.vocab.words &&
                     bitwise_equal(loaded.vocab.table, model.vocab.table) &&
                     loaded.weights.size() == model.weights.size();
        for (const auto& [name, tensor] : model.weights) {
            equal = equal && loaded.weights.count(name) &&
                    bitwise_equal(loaded.weights.at(name), tensor);
        }
        std::filesystem::remove(path);
        SELFTEST("checkpoint round-trip is bitwise lossless", equal);
    }

    // End-to-end: the two-pass method runs on fresh weights and an all-ones
    // mask override reproduces the baseline bitwise.
    {
        ModelConfig mcfg;
        const Model model = init_model(mcfg);
        const Tensor reference = load_reference("");
        GenerationConfig cfg;
        cfg.seed.value = 9;
        cfg.prompt = "red circle on grass";
        const GenerationResult baseline = generate_baseline(cfg, model, reference);
        SubjectMask ones;
        ones.grid = Tensor::ones({8, 8});
        ones.source.layer_id = cfg.capture_layer;
        PipelineHooks hooks;
        hooks.mask_override = &ones;
        const GenerationResult two_pass = generate_monkey(cfg, model, reference, hooks);
        SELFTEST("all-ones mask reproduces the baseline bitwise",
                 bitwise_equal(two_pass.final_latent, baseline.final_latent));
    }

    std::cout << "selftest passed\n";
    return 0;
}

#undef SELFTEST

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale latent diffusion with two-pass subject-mask generation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "monkey 0.1.0");
    // One shared config option; keys use `<subcommand>.<option> = value` form
    // (the emitted .record.cfg files follow it). Subcommands fall through so
    // `monkey generate --config f` and `monkey --config f generate` both work.
    app.set_config("--config", "",
                   "Read options from a <subcommand>.<option> = value file");

    GenerateOpts gen;
    CLI::App* generate = app.add_subcommand("generate", "Generate one image");
    generate->fallthrough();
    generate->add_option("--model", gen.model, "Checkpoint path (omit for fresh deterministic init)");
    generate->add_option("--seed", gen.seed, "Noise seed");
    generate->add_option("--prompt", gen.prompt, "Text prompt");
    generate->add_option("--reference", gen.reference,
                         "Reference subject PNG (omit for the bundled synthetic subject)");
    generate->add_option("--method", gen.method, "Generation method")
        ->check(CLI::IsMember({"baseline", "monkey"}));
    generate->add_option("--out", gen.out, "Output PNG path");
    generate->add_option("--ip-scale", gen.ip_scale, "Image-prompt token scale (>= 0)");
    generate->add_option("--pass1-steps", gen.pass1_steps, "Capture pass step count");
    generate->add_option("--pass1-first", gen.pass1_first, "First capture step (1-based)");
    generate->add_option("--pass1-last", gen.pass1_last, "Last capture step (1-based)");
    generate->add_option("--pass2-steps", gen.pass2_steps, "Generation pass step count");
    generate->add_option("--mask-first", gen.mask_first, "First masked step of pass 2 (1-based)");
    generate->add_option("--mask-last", gen.mask_last, "Last masked step of pass 2 (1-based)");
    generate->add_option("--capture-layer", gen.capture_layer, "Attention site to capture");
    generate->add_option("--policy", gen.policy, "Mask binarization policy")
        ->check(CLI::IsMember({"fixed", "otsu"}));
    generate->add_option("--threshold", gen.threshold, "Fixed binarization threshold");
    generate->add_option("--mask-token", gen.mask_token, "IP token the mask derives from (0-3)");
    generate->add_flag("--vote", gen.vote, "Binarize per step, then majority-vote");
    generate->add_flag("--complement", gen.complement,
                       "Derive the mask as the complement of ip2/ip3 attention");
    generate->add_flag("--single-site", gen.single_site, "Mask only the capture layer in pass 2");
    generate->add_option("--init-seed", gen.init_seed, "Weight init seed when --model is omitted");

    TrainOpts tr;
    CLI::App* train = app.add_subcommand("train", "Train the toy model on synthetic data");
    train->fallthrough();
    train->add_option("--out", tr.out, "Checkpoint output path");
    train->add_option("--samples", tr.samples, "Synthetic dataset size")
        ->check(CLI::Range(1, 100000));
    train->add_option("--data-seed", tr.data_seed, "Dataset seed");
    train->add_option("--lr", tr.lr, "Learning rate");
    train->add_option("--momentum", tr.momentum, "SGD momentum");
    train->add_option("--batch-size", tr.batch_size, "Batch size");
    train->add_option("--iterations", tr.iterations, "Denoiser training iterations");
    train->add_option("--seed", tr.seed, "Training stream seed");
    train->add_option("--report-interval", tr.report_interval, "Loss report interval");
    train->add_option("--decoder-iterations", tr.decoder_iterations,
                      "Decoder reconstruction iterations");
    train->add_option("--decoder-lr", tr.decoder_lr, "Decoder learning rate");
    train->add_option("--init-seed", tr.init_seed, "Weight init seed");
    train->add_option("--loss-csv", tr.loss_csv, "Loss curve CSV path (default: <out>.loss.csv)");

    InspectOpts ins;
    CLI::App* inspect = app.add_subcommand("inspect", "Dump per-layer token attention grids");
    inspect->add_option("--model", ins.model, "Checkpoint path (omit for fresh init)");
    inspect->add_option("--seed", ins.seed, "Noise seed");
    inspect->add_option("--prompt", ins.prompt, "Text prompt");
    inspect->add_option("--reference", ins.reference, "Reference subject PNG");
    inspect->add_option("--method", ins.method, "Generation method")
        ->check(CLI::IsMember({"baseline", "monkey"}));
    inspect->add_option("--layer", ins.layers, "Attention site(s) to dump (repeatable)");
    inspect->add_option("--out-dir", ins.out_dir, "Output directory");
    inspect->add_option("--init-seed", ins.init_seed, "Weight init seed when --model is omitted");

    EvalOpts ev;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Run the subject x prompt evaluation grid");
    eval_cmd->add_option("--model", ev.model, "Checkpoint path (omit for fresh init)");
    eval_cmd->add_option("--subjects", ev.subjects, "Number of synthetic subjects")
        ->check(CLI::Range(1, 1000));
    eval_cmd->add_option("--subject-seed", ev.subject_seed, "Subject dataset seed");
    eval_cmd->add_option("--prompts-file", ev.prompts_file,
                         "Prompt list, one per line (omit for the bundled 20)");
    eval_cmd->add_option("--method", ev.method, "Which methods to run")
        ->check(CLI::IsMember({"both", "baseline", "monkey"}));
    eval_cmd->add_option("--base-seed", ev.base_seed, "Base seed of the per-cell seed policy");
    eval_cmd->add_option("--out", ev.out, "Scatter CSV output path");
    eval_cmd->add_option("--init-seed", ev.init_seed, "Weight init seed when --model is omitted");

    CLI::App* selftest = app.add_subcommand("selftest", "Run the built-in invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (generate->parsed()) return run_generate(gen);
        if (train->parsed()) return run_train(tr);
        if (inspect->parsed()) return run_inspect(ins);
        if (eval_cmd->parsed()) return run_eval(ev);
        if (selftest->parsed()) return run_selftest();
    } catch (const monkey::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
