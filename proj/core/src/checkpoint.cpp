// SPDX-License-Identifier: Apache-2.0
#include "monkey/checkpoint.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <vector>

#include "monkey/config_file.hpp"
#include "monkey/error.hpp"
#include "monkey/fs.hpp"

namespace monkey {

namespace {

constexpr std::uint8_t kDtypeF32 = 0;
constexpr std::uint8_t kDtypeRaw = 1;

// Reserved entry names living alongside the plain weight tensors.
constexpr char kConfigEntry[] = "config";
constexpr char kVocabWordsEntry[] = "vocab.words";
constexpr char kVocabTableEntry[] = "vocab.table";

void append_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void append_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

/// Bounds-checked little-endian reader; any overrun means the file was cut
/// short and is reported as such.
class Cursor {
public:
    Cursor(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::size_t pos() const noexcept { return pos_; }

    const std::uint8_t* take(std::size_t n) {
        if (pos_ + n > size_) throw TruncatedFileError("checkpoint ends mid-structure");
        const std::uint8_t* p = data_ + pos_;
        pos_ += n;
        return p;
    }

    std::uint16_t u16() {
        const std::uint8_t* p = take(2);
        return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    }

    std::uint32_t u32() {
        const std::uint8_t* p = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        return v;
    }

    std::uint64_t u64() {
        const std::uint8_t* p = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        return v;
    }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

struct Entry {
    std::string name;
    std::uint8_t dtype = kDtypeF32;
    std::vector<int> dims;
    std::uint64_t offset = 0;

    std::uint64_t payload_bytes() const {
        std::uint64_t n = 1;
        for (const int d : dims) n *= static_cast<std::uint64_t>(d);
        return n * (dtype == kDtypeF32 ? 4 : 1);
    }
};

std::size_t entry_table_bytes(const std::vector<Entry>& entries) {
    std::size_t n = 0;
    for (const auto& e : entries) {
        n += 2 + e.name.size() + 1 + 1 + 4 * e.dims.size() + 8;
    }
    return n;
}

std::string sites_to_text(const std::vector<AttentionSite>& sites) {
    std::string out;
    for (const auto& s : sites) {
        if (!out.empty()) out += ",";
        out += s.layer_id + ":" + std::to_string(s.heads);
    }
    return out;
}

std::vector<AttentionSite> sites_from_text(const std::string& text) {
    std::vector<AttentionSite> sites;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string item = text.substr(pos, comma - pos);
        const size_t colon = item.find(':');
        if (colon == std::string::npos) {
            throw ConfigError("attention site '" + item + "' is not of the form id:heads");
        }
        sites.push_back({item.substr(0, colon), std::stoi(item.substr(colon + 1))});
        pos = comma + 1;
    }
    return sites;
}

const std::string& want(const ConfigMap& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("model config is missing key '" + key + "'");
    return it->second;
}

}  // namespace

std::string model_config_to_text(const ModelConfig& cfg) {
    return format_config({
        {"unet.latent_channels", std::to_string(cfg.unet.latent_channels)},
        {"unet.spatial", std::to_string(cfg.unet.spatial)},
        {"unet.base_width", std::to_string(cfg.unet.base_width)},
        {"unet.mid_width", std::to_string(cfg.unet.mid_width)},
        {"unet.temb_dim", std::to_string(cfg.unet.temb_dim)},
        {"unet.d_model", std::to_string(cfg.unet.d_model)},
        {"unet.sites", sites_to_text(cfg.unet.sites)},
        {"imgenc.image_size", std::to_string(cfg.imgenc.image_size)},
        {"imgenc.c1", std::to_string(cfg.imgenc.c1)},
        {"imgenc.c2", std::to_string(cfg.imgenc.c2)},
        {"imgenc.c3", std::to_string(cfg.imgenc.c3)},
        {"imgenc.d_model", std::to_string(cfg.imgenc.d_model)},
        {"n_text", std::to_string(cfg.n_text)},
        {"init_seed", std::to_string(cfg.init_seed)},
    });
}

ModelConfig model_config_from_text(const std::string& text) {
    const ConfigMap kv = parse_config_text(text);
    static const char* const known[] = {
        "unet.latent_channels", "unet.spatial", "unet.base_width", "unet.mid_width",
        "unet.temb_dim",        "unet.d_model", "unet.sites",      "imgenc.image_size",
        "imgenc.c1",            "imgenc.c2",    "imgenc.c3",       "imgenc.d_model",
        "n_text",               "init_seed",
    };
    for (const auto& [key, value] : kv) {
        (void)value;
        if (std::find_if(std::begin(known), std::end(known),
                         [&](const char* k) { return key == k; }) == std::end(known)) {
            throw ConfigError("unknown model config key '" + key + "'");
        }
    }
    ModelConfig cfg;
    cfg.unet.latent_channels = std::stoi(want(kv, "unet.latent_channels"));
    cfg.unet.spatial = std::stoi(want(kv, "unet.spatial"));
    cfg.unet.base_width = std::stoi(want(kv, "unet.base_width"));
    cfg.unet.mid_width = std::stoi(want(kv, "unet.mid_width"));
    cfg.unet.temb_dim = std::stoi(want(kv, "unet.temb_dim"));
    cfg.unet.d_model = std::stoi(want(kv, "unet.d_model"));
    cfg.unet.sites = sites_from_text(want(kv, "unet.sites"));
    cfg.imgenc.image_size = std::stoi(want(kv, "imgenc.image_size"));
    cfg.imgenc.c1 = std::stoi(want(kv, "imgenc.c1"));
    cfg.imgenc.c2 = std::stoi(want(kv, "imgenc.c2"));
    cfg.imgenc.c3 = std::stoi(want(kv, "imgenc.c3"));
    cfg.imgenc.d_model = std::stoi(want(kv, "imgenc.d_model"));
    cfg.n_text = std::stoi(want(kv, "n_text"));
    cfg.init_seed = std::stoull(want(kv, "init_seed"));
    return cfg;
}

void save_checkpoint(const std::string& path, const Model& model) {
    const std::string config_text = model_config_to_text(model.cfg);
    std::string words_text;
    for (size_t i = 0; i < model.vocab.words.size(); ++i) {
        if (i) words_text += '\n';
        words_text += model.vocab.words[i];
    }

    std::vector<Entry> entries;
    std::vector<const void*> payloads;
    std::vector<std::uint64_t> payload_sizes;
    auto add_raw = [&](const std::string& name, const std::string& text) {
        entries.push_back({name, kDtypeRaw, {static_cast<int>(text.size())}, 0});
        payloads.push_back(text.data());
        payload_sizes.push_back(text.size());
    };
    auto add_tensor = [&](const std::string& name, const Tensor& t) {
        entries.push_back({name, kDtypeF32, t.shape(), 0});
        payloads.push_back(t.data());
        payload_sizes.push_back(static_cast<std::uint64_t>(t.size()) * 4);
    };
    add_raw(kConfigEntry, config_text);
    add_raw(kVocabWordsEntry, words_text);
    add_tensor(kVocabTableEntry, model.vocab.table);
    for (const auto& [name, tensor] : model.weights) add_tensor(name, tensor);

    const std::size_t header_bytes = 4 + 2 + 4;
    std::uint64_t offset = header_bytes + entry_table_bytes(entries);
    for (auto& e : entries) {
        e.offset = offset;
        offset += e.payload_bytes();
    }

    std::vector<std::uint8_t> out;
    out.reserve(offset + 4);
    out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 4);
    append_u16(out, kCheckpointVersion);
    append_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        append_u16(out, static_cast<std::uint16_t>(e.name.size()));
        out.insert(out.end(), e.name.begin(), e.name.end());
        out.push_back(e.dtype);
        out.push_back(static_cast<std::uint8_t>(e.dims.size()));
        for (const int d : e.dims) append_u32(out, static_cast<std::uint32_t>(d));
        append_u64(out, e.offset);
    }
    for (size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].dtype == kDtypeRaw) {
            const auto* p = static_cast<const std::uint8_t*>(payloads[i]);
            out.insert(out.end(), p, p + payload_sizes[i]);
        } else {
            const auto* f = static_cast<const float*>(payloads[i]);
            for (std::uint64_t j = 0; j < payload_sizes[i] / 4; ++j) {
                append_u32(out, std::bit_cast<std::uint32_t>(f[j]));
            }
        }
    }
    const std::uint32_t crc =
        static_cast<std::uint32_t>(crc32_z(0, out.data(), out.size()));
    append_u32(out, crc);
    atomic_write_file(path, out.data(), out.size());
}

Model load_checkpoint(const std::string& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < 4 + 2 + 4 + 4) {
        throw TruncatedFileError("'" + path + "' is too short to be a checkpoint (" +
                                 std::to_string(bytes.size()) + " bytes)");
    }
    if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
        throw BadMagicError("'" + path + "' does not start with the MNKY magic");
    }
    const std::uint32_t stored_crc = static_cast<std::uint32_t>(
        bytes[bytes.size() - 4] | (bytes[bytes.size() - 3] << 8) |
        (bytes[bytes.size() - 2] << 16) |
        (static_cast<std::uint32_t>(bytes[bytes.size() - 1]) << 24));
    const std::uint32_t computed_crc =
        static_cast<std::uint32_t>(crc32_z(0, bytes.data(), bytes.size() - 4));
    // Version is checked before the CRC so an old-format file reports its
    // version rather than a checksum mismatch.
    Cursor cur(bytes.data(), bytes.size() - 4);
    cur.take(4);
    const std::uint16_t version = cur.u16();
    if (version != kCheckpointVersion) {
        throw VersionError("'" + path + "' has checkpoint version " + std::to_string(version) +
                           "; this build reads version " + std::to_string(kCheckpointVersion));
    }
    if (stored_crc != computed_crc) {
        throw CrcError("CRC mismatch in '" + path + "'");
    }

    const std::uint32_t count = cur.u32();
    std::vector<Entry> entries;
    entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Entry e;
        const std::uint16_t name_len = cur.u16();
        const std::uint8_t* name = cur.take(name_len);
        e.name.assign(reinterpret_cast<const char*>(name), name_len);
        e.dtype = *cur.take(1);
        if (e.dtype != kDtypeF32 && e.dtype != kDtypeRaw) {
            throw Error("io", "unknown dtype code " + std::to_string(e.dtype) + " for entry '" +
                                  e.name + "'");
        }
        const std::uint8_t rank = *cur.take(1);
        for (std::uint8_t d = 0; d < rank; ++d) e.dims.push_back(static_cast<int>(cur.u32()));
        e.offset = cur.u64();
        entries.push_back(std::move(e));
    }

    const std::uint64_t payload_begin = cur.pos();
    const std::uint64_t payload_end = bytes.size() - 4;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> extents;
    std::vector<std::string> names;
    for (const auto& e : entries) {
        const std::uint64_t end = e.offset + e.payload_bytes();
        if (e.offset < payload_begin || end > payload_end) {
            throw TruncatedFileError("entry '" + e.name + "' points outside '" + path + "'");
        }
        extents.emplace_back(e.offset, end);
        names.push_back(e.name);
    }
    std::sort(extents.begin(), extents.end());
    for (size_t i = 1; i < extents.size(); ++i) {
        if (extents[i].first < extents[i - 1].second) {
            throw Error("io", "overlapping entries in '" + path + "'");
        }
    }
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
        throw Error("io", "duplicate entry names in '" + path + "'");
    }

    std::string config_text, words_text;
    Model model;
    bool have_config = false, have_words = false, have_table = false;
    for (const auto& e : entries) {
        const std::uint8_t* p = bytes.data() + e.offset;
        if (e.dtype == kDtypeRaw) {
            std::string text(reinterpret_cast<const char*>(p), e.payload_bytes());
            if (e.name == kConfigEntry) {
                config_text = std::move(text);
                have_config = true;
            } else if (e.name == kVocabWordsEntry) {
                words_text = std::move(text);
                have_words = true;
            } else {
                throw Error("io", "unexpected raw entry '" + e.name + "' in '" + path + "'");
            }
            continue;
        }
        Tensor t(e.dims);
        for (std::int64_t j = 0; j < t.size(); ++j) {
            std::uint32_t v = 0;
            for (int b = 0; b < 4; ++b) {
                v |= static_cast<std::uint32_t>(p[static_cast<std::uint64_t>(j) * 4 + b])
                     << (8 * b);
            }
            t.data()[j] = std::bit_cast<float>(v);
        }
        if (e.name == kVocabTableEntry) {
            model.vocab.table = std::move(t);
            have_table = true;
        } else {
            model.weights.emplace(e.name, std::move(t));
        }
    }
    if (!have_config || !have_words || !have_table) {
        throw Error("io", "'" + path + "' is missing a required entry (config/vocabulary)");
    }

    model.cfg = model_config_from_text(config_text);
    validate_unet_config(model.cfg.unet);
    size_t pos = 0;
    int next_id = 0;
    while (pos <= words_text.size() && !words_text.empty()) {
        size_t nl = words_text.find('\n', pos);
        if (nl == std::string::npos) nl = words_text.size();
        model.vocab.words.push_back(words_text.substr(pos, nl - pos));
        model.vocab.index[model.vocab.words.back()] = next_id++;
        pos = nl + 1;
        if (pos > words_text.size()) break;
    }
    if (model.vocab.size() != model.vocab.table.dim(0)) {
        throw Error("io", "vocabulary word count " + std::to_string(model.vocab.size()) +
                              " does not match table rows " +
                              std::to_string(model.vocab.table.dim(0)));
    }
    return model;
}

}  // namespace monkey
