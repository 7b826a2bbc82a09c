// SPDX-License-Identifier: Apache-2.0
#include "monkey/eval.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "monkey/error.hpp"
#include "monkey/fs.hpp"
#include "monkey/prompts.hpp"
#include "monkey/rng.hpp"

namespace monkey {

double cosine_sim(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw Error("eval", "cosine_sim length mismatch: " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
    }
    if (a == b) {
        // Exactness guarantee for the self-similarity invariant; still
        // rejects the all-zero vector below.
        double norm = 0.0;
        for (const double v : a) norm += v * v;
        if (norm == 0.0) throw Error("eval", "cosine_sim of a zero vector");
        return 1.0;
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw Error("eval", "cosine_sim of a zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> ToyImageEmbedder::embed(const Tensor& image) const {
    const Tensor tokens = encode_image(image, model_->weights, model_->cfg.imgenc);
    return std::vector<double>(tokens.data(), tokens.data() + tokens.size());
}

std::vector<double> PooledPixelEmbedder::embed(const Tensor& image) const {
    if (image.rank() != 3) {
        throw ShapeError("eval", "embed expects [C,H,W], got " + image.shape_str());
    }
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    const int grid = 8;
    if (h % grid != 0 || w % grid != 0) {
        throw ShapeError("eval", "image size must be a multiple of 8");
    }
    const int by = h / grid, bx = w / grid;
    std::vector<double> out;
    out.reserve(static_cast<size_t>(c) * grid * grid);
    for (int ch = 0; ch < c; ++ch) {
        for (int gy = 0; gy < grid; ++gy) {
            for (int gx = 0; gx < grid; ++gx) {
                double acc = 0.0;
                for (int y = 0; y < by; ++y) {
                    for (int x = 0; x < bx; ++x) {
                        acc += image.at(ch, gy * by + y, gx * bx + x);
                    }
                }
                out.push_back(acc / (by * bx));
            }
        }
    }
    return out;
}

std::vector<double> text_embedding(const Model& model, const std::string& prompt) {
    const auto words = tokenize_prompt(prompt);
    if (words.empty()) throw Error("eval", "cannot embed an empty prompt");
    const int n = std::min(static_cast<int>(words.size()), model.cfg.n_text);
    const Tensor rows = encode_text(prompt, model.vocab, model.cfg.n_text);
    std::vector<double> out(static_cast<size_t>(rows.dim(1)), 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < rows.dim(1); ++j) out[static_cast<size_t>(j)] += rows.at(i, j);
    }
    for (auto& v : out) v /= n;
    return out;
}

std::vector<double> image_token_embedding(const Model& model, const Tensor& image) {
    const Tensor tokens = encode_image(image, model.weights, model.cfg.imgenc);
    std::vector<double> out(static_cast<size_t>(tokens.dim(1)), 0.0);
    for (int i = 0; i < tokens.dim(0); ++i) {
        for (int j = 0; j < tokens.dim(1); ++j) out[static_cast<size_t>(j)] += tokens.at(i, j);
    }
    for (auto& v : out) v /= tokens.dim(0);
    return out;
}

std::string method_name(Method method) {
    return method == Method::kBaseline ? "baseline" : "monkey";
}

EvalRun run_grid(const std::vector<SyntheticSample>& subjects,
                 const std::vector<std::string>& prompts, Method method, const Model& model,
                 const Embedders& embedders, const GenerationConfig& proto, SeedPolicy seeds) {
    if (subjects.empty() || prompts.empty()) {
        throw Error("eval", "need at least one subject and one prompt");
    }
    if (!embedders.image || !embedders.identity) {
        throw Error("eval", "both embedders must be provided");
    }
    EvalRun run;
    run.method = method_name(method);
    double text_acc = 0.0, image_acc = 0.0, identity_acc = 0.0;
    for (size_t si = 0; si < subjects.size(); ++si) {
        const SyntheticSample& subject = subjects[si];
        const std::string subject_words = dataset_colors()[static_cast<size_t>(subject.color)] +
                                          " " +
                                          dataset_shapes()[static_cast<size_t>(subject.shape)];
        for (size_t pi = 0; pi < prompts.size(); ++pi) {
            EvalCell cell;
            cell.subject = static_cast<int>(si);
            cell.prompt = static_cast<int>(pi);
            cell.seed = mix_seed(seeds.base, si, pi);
            GenerationConfig cfg = proto;
            cfg.seed.value = cell.seed;
            cfg.prompt = subject_words + " " + prompts[pi];
            try {
                const GenerationResult result =
                    method == Method::kMonkey ? generate_monkey(cfg, model, subject.reference)
                                              : generate_baseline(cfg, model, subject.reference);
                cell.text_sim = cosine_sim(text_embedding(model, cfg.prompt),
                                           image_token_embedding(model, result.image));
                cell.image_sim = cosine_sim(embedders.image->embed(result.image),
                                            embedders.image->embed(subject.reference));
                cell.identity_sim = cosine_sim(embedders.identity->embed(result.image),
                                               embedders.identity->embed(subject.reference));
                text_acc += cell.text_sim;
                image_acc += cell.image_sim;
                identity_acc += cell.identity_sim;
            } catch (const Error& e) {
                cell.failed = true;
                cell.error = e.what();
                ++run.n_failed;
            }
            run.cells.push_back(std::move(cell));
        }
    }
    const int ok = static_cast<int>(run.cells.size()) - run.n_failed;
    if (ok > 0) {
        run.text_sim_mean = text_acc / ok;
        run.image_sim_mean = image_acc / ok;
        run.identity_sim_mean = identity_acc / ok;
    }
    return run;
}

void export_scatter(const std::vector<EvalRun>& runs, const std::string& path) {
    if (runs.empty()) throw Error("eval", "nothing to export");
    std::string csv = "method,text_sim_mean,image_sim_mean\n";
    char buf[64];
    for (const auto& run : runs) {
        csv += run.method;
        std::snprintf(buf, sizeof(buf), ",%.17g,%.17g\n", run.text_sim_mean, run.image_sim_mean);
        csv += buf;
    }
    atomic_write_file(path, csv);
}

std::vector<ScatterRow> load_scatter(const std::string& path) {
    const std::string text = read_text_file(path);
    std::vector<ScatterRow> rows;
    size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        const std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line_no == 1) {
            if (line != "method,text_sim_mean,image_sim_mean") {
                throw Error("eval", "unexpected CSV header in '" + path + "'");
            }
            continue;
        }
        if (line.empty()) continue;
        const size_t c1 = line.find(',');
        const size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos) {
            throw Error("eval", "malformed CSV line " + std::to_string(line_no) + " in '" + path +
                                    "'");
        }
        ScatterRow row;
        row.method = line.substr(0, c1);
        row.text_sim_mean = std::strtod(line.c_str() + c1 + 1, nullptr);
        row.image_sim_mean = std::strtod(line.c_str() + c2 + 1, nullptr);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace monkey
