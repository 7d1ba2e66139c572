#include "vitkit/vit.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace vitkit {

void ViTConfig::validate() const {
    if (image_size == 0 || patch_size == 0 || channels == 0 || embed_dim == 0 || depth == 0 ||
        heads == 0 || num_classes == 0) {
        throw ShapeError("vit config: zero-valued field");
    }
    if (image_size % patch_size != 0) {
        throw ShapeError("vit config: image size " + std::to_string(image_size) +
                         " not divisible by patch size " + std::to_string(patch_size));
    }
    if (embed_dim % heads != 0) {
        throw ShapeError("vit config: embed dim " + std::to_string(embed_dim) +
                         " not divisible by " + std::to_string(heads) + " heads");
    }
    if (mlp_ratio <= 0.0 || mlp_hidden() == 0) {
        throw ShapeError("vit config: mlp_ratio must be positive");
    }
    if (drop_rate < 0.0 || drop_rate >= 1.0) {
        throw ShapeError("vit config: drop_rate outside [0, 1)");
    }
}

ViTConfig vit_base_config() { return ViTConfig{}; }

ViTConfig vit_tiny_config() {
    ViTConfig c;
    c.image_size = 32;
    c.patch_size = 8;
    c.embed_dim = 32;
    c.depth = 2;
    c.heads = 2;
    c.mlp_ratio = 2.0;
    c.head_hidden = 32;
    return c;
}

std::vector<std::pair<std::string, Tensor>> ViTParams::named_tensors() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("patch_proj.weight", patch_proj_weight);
    out.emplace_back("patch_proj.bias", patch_proj_bias);
    out.emplace_back("cls_token", cls_token);
    out.emplace_back("pos_embed", pos_embed);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::string p = "blocks." + std::to_string(i) + ".";
        const BlockParams &b = blocks[i];
        out.emplace_back(p + "ln1.gamma", b.ln1_gamma);
        out.emplace_back(p + "ln1.beta", b.ln1_beta);
        out.emplace_back(p + "qkv.weight", b.qkv_weight);
        out.emplace_back(p + "qkv.bias", b.qkv_bias);
        out.emplace_back(p + "proj.weight", b.proj_weight);
        out.emplace_back(p + "proj.bias", b.proj_bias);
        out.emplace_back(p + "ln2.gamma", b.ln2_gamma);
        out.emplace_back(p + "ln2.beta", b.ln2_beta);
        out.emplace_back(p + "mlp.fc1.weight", b.mlp_fc1_weight);
        out.emplace_back(p + "mlp.fc1.bias", b.mlp_fc1_bias);
        out.emplace_back(p + "mlp.fc2.weight", b.mlp_fc2_weight);
        out.emplace_back(p + "mlp.fc2.bias", b.mlp_fc2_bias);
    }
    out.emplace_back("final_norm.gamma", final_gamma);
    out.emplace_back("final_norm.beta", final_beta);
    if (config.head_hidden > 0) {
        out.emplace_back("head.fc1.weight", head_fc1_weight);
        out.emplace_back("head.fc1.bias", head_fc1_bias);
    }
    out.emplace_back("head.fc2.weight", head_fc2_weight);
    out.emplace_back("head.fc2.bias", head_fc2_bias);
    return out;
}

std::vector<Tensor> ViTParams::all_tensors() const {
    std::vector<Tensor> out;
    for (auto &[name, t] : named_tensors()) out.push_back(t);
    return out;
}

std::vector<Tensor> ViTParams::head_tensors() const {
    std::vector<Tensor> out;
    for (auto &[name, t] : named_tensors()) {
        if (name.rfind("head.", 0) == 0) out.push_back(t);
    }
    return out;
}

std::vector<Tensor> ViTParams::backbone_tensors() const {
    std::vector<Tensor> out;
    for (auto &[name, t] : named_tensors()) {
        if (name.rfind("head.", 0) != 0) out.push_back(t);
    }
    return out;
}

void ViTParams::set_requires_grad(bool flag) {
    for (Tensor &t : all_tensors()) t.set_requires_grad(flag);
}

void ViTParams::zero_grads() {
    for (Tensor &t : all_tensors()) t.zero_grad();
}

namespace {

// All-zeros parameter set with the shapes dictated by the config.
ViTParams params_skeleton(const ViTConfig &config) {
    config.validate();
    const std::size_t e = config.embed_dim;
    const std::size_t hid = config.mlp_hidden();
    ViTParams p;
    p.config = config;
    p.patch_proj_weight = Tensor::zeros({config.patch_dim(), e});
    p.patch_proj_bias = Tensor::zeros({e});
    p.cls_token = Tensor::zeros({1, e});
    p.pos_embed = Tensor::zeros({config.tokens(), e});
    p.blocks.resize(config.depth);
    for (BlockParams &b : p.blocks) {
        b.ln1_gamma = Tensor::zeros({e});
        b.ln1_beta = Tensor::zeros({e});
        b.qkv_weight = Tensor::zeros({e, 3 * e});
        b.qkv_bias = Tensor::zeros({3 * e});
        b.proj_weight = Tensor::zeros({e, e});
        b.proj_bias = Tensor::zeros({e});
        b.ln2_gamma = Tensor::zeros({e});
        b.ln2_beta = Tensor::zeros({e});
        b.mlp_fc1_weight = Tensor::zeros({e, hid});
        b.mlp_fc1_bias = Tensor::zeros({hid});
        b.mlp_fc2_weight = Tensor::zeros({hid, e});
        b.mlp_fc2_bias = Tensor::zeros({e});
    }
    p.final_gamma = Tensor::zeros({e});
    p.final_beta = Tensor::zeros({e});
    if (config.head_hidden > 0) {
        p.head_fc1_weight = Tensor::zeros({e, config.head_hidden});
        p.head_fc1_bias = Tensor::zeros({config.head_hidden});
        p.head_fc2_weight = Tensor::zeros({config.head_hidden, config.num_classes});
    } else {
        p.head_fc2_weight = Tensor::zeros({e, config.num_classes});
    }
    p.head_fc2_bias = Tensor::zeros({config.num_classes});
    return p;
}

bool name_is_bias_like(const std::string &name) {
    return name.size() >= 5 && (name.compare(name.size() - 5, 5, ".bias") == 0 ||
                                name.compare(name.size() - 5, 5, ".beta") == 0);
}

bool name_is_gamma(const std::string &name) {
    return name.size() >= 6 && name.compare(name.size() - 6, 6, ".gamma") == 0;
}

}  // namespace

ViTParams init_params(const ViTConfig &config, std::uint64_t seed) {
    ViTParams p = params_skeleton(config);
    SplitMix64 rng(seed);
    for (auto &[name, t] : p.named_tensors()) {
        std::vector<double> &d = const_cast<Tensor &>(t).data();
        if (name_is_bias_like(name)) {
            continue;  // zeros
        }
        if (name_is_gamma(name)) {
            std::fill(d.begin(), d.end(), 1.0);
            continue;
        }
        for (double &v : d) v = rng.next_trunc_normal(0.02);
    }
    return p;
}

ViTParams clone_params(const ViTParams &params) {
    ViTParams copy = params_skeleton(params.config);
    auto src = params.named_tensors();
    auto dst = copy.named_tensors();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const_cast<Tensor &>(dst[i].second).data() = src[i].second.data();
    }
    return copy;
}

Tensor patchify(const Tensor &image, std::size_t patch_size) {
    if (image.rank() != 3) {
        throw ShapeError("patchify: expected [channels x H x W], got " + shape_str(image.shape()));
    }
    const std::size_t channels = image.dim(0), h = image.dim(1), w = image.dim(2);
    if (h != w) {
        throw ShapeError("patchify: non-square image " + shape_str(image.shape()));
    }
    if (patch_size == 0 || h % patch_size != 0) {
        throw ShapeError("patchify: image size " + std::to_string(h) +
                         " not divisible by patch size " + std::to_string(patch_size));
    }
    const std::size_t grid = h / patch_size;
    const std::size_t num_patches = grid * grid;
    const std::size_t patch_dim = patch_size * patch_size * channels;
    Tensor out = Tensor::zeros({num_patches, patch_dim});
    const auto &src = image.data();
    auto &dst = out.data();
    for (std::size_t gy = 0; gy < grid; ++gy) {
        for (std::size_t gx = 0; gx < grid; ++gx) {
            const std::size_t patch = gy * grid + gx;
            for (std::size_t c = 0; c < channels; ++c) {
                for (std::size_t py = 0; py < patch_size; ++py) {
                    for (std::size_t px = 0; px < patch_size; ++px) {
                        const std::size_t sy = gy * patch_size + py;
                        const std::size_t sx = gx * patch_size + px;
                        dst[patch * patch_dim + c * patch_size * patch_size + py * patch_size +
                            px] = src[c * h * w + sy * w + sx];
                    }
                }
            }
        }
    }
    if (grad_enabled() && image.requires_grad()) {
        out.attach_node(
            {image},
            [image, channels, h, w, grid, patch_size, patch_dim](const Tensor &self) {
                Tensor gi = image;
                const double *dy = self.grad().data();
                double *dst = gi.grad().data();
                for (std::size_t gy = 0; gy < grid; ++gy) {
                    for (std::size_t gx = 0; gx < grid; ++gx) {
                        const std::size_t patch = gy * grid + gx;
                        for (std::size_t c = 0; c < channels; ++c) {
                            for (std::size_t py = 0; py < patch_size; ++py) {
                                for (std::size_t px = 0; px < patch_size; ++px) {
                                    const std::size_t sy = gy * patch_size + py;
                                    const std::size_t sx = gx * patch_size + px;
                                    dst[c * h * w + sy * w + sx] +=
                                        dy[patch * patch_dim + c * patch_size * patch_size +
                                           py * patch_size + px];
                                }
                            }
                        }
                    }
                }
            },
            "patchify");
    }
    return out;
}

ForwardTrace vit_forward(const ViTParams &params, const Tensor &image,
                         const ForwardOptions &opts) {
    const ViTConfig &cfg = params.config;
    cfg.validate();
    if (image.rank() != 3 || image.dim(0) != cfg.channels || image.dim(1) != cfg.image_size ||
        image.dim(2) != cfg.image_size) {
        throw ShapeError("vit_forward: image " + shape_str(image.shape()) +
                         " does not match config geometry [" + std::to_string(cfg.channels) +
                         ", " + std::to_string(cfg.image_size) + ", " +
                         std::to_string(cfg.image_size) + "]");
    }
    const bool drop = opts.train_mode && cfg.drop_rate > 0.0;
    if (drop && opts.dropout_rng == nullptr) {
        throw ValueError("vit_forward: train_mode with drop_rate > 0 needs a dropout rng");
    }
    const std::size_t e = cfg.embed_dim;
    const std::size_t hd = cfg.head_dim();
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(hd));

    ForwardTrace trace;

    Tensor x = patchify(image, cfg.patch_size);
    x = add_row_bias(matmul(x, params.patch_proj_weight), params.patch_proj_bias);
    x = concat_rows(params.cls_token, x);
    x = add(x, params.pos_embed);
    if (drop) x = dropout(x, cfg.drop_rate, *opts.dropout_rng);

    for (const BlockParams &b : params.blocks) {
        Tensor h = layer_norm(x, b.ln1_gamma, b.ln1_beta);
        Tensor qkv = add_row_bias(matmul(h, b.qkv_weight), b.qkv_bias);
        Tensor q = slice_cols(qkv, 0, e);
        Tensor k = slice_cols(qkv, e, e);
        Tensor v = slice_cols(qkv, 2 * e, e);
        std::vector<Tensor> head_ctx;
        std::vector<Tensor> head_attn;
        head_ctx.reserve(cfg.heads);
        for (std::size_t i = 0; i < cfg.heads; ++i) {
            Tensor qh = slice_cols(q, i * hd, hd);
            Tensor kh = slice_cols(k, i * hd, hd);
            Tensor vh = slice_cols(v, i * hd, hd);
            Tensor attn = softmax(scale(matmul(qh, transpose(kh)), attn_scale));
            if (opts.retain_attention) head_attn.push_back(attn);
            head_ctx.push_back(matmul(attn, vh));
        }
        if (opts.retain_attention) trace.attention.push_back(std::move(head_attn));
        Tensor attn_out = add_row_bias(matmul(concat_cols(head_ctx), b.proj_weight), b.proj_bias);
        if (drop) attn_out = dropout(attn_out, cfg.drop_rate, *opts.dropout_rng);
        x = add(x, attn_out);

        Tensor h2 = layer_norm(x, b.ln2_gamma, b.ln2_beta);
        Tensor m = gelu(add_row_bias(matmul(h2, b.mlp_fc1_weight), b.mlp_fc1_bias));
        m = add_row_bias(matmul(m, b.mlp_fc2_weight), b.mlp_fc2_bias);
        if (drop) m = dropout(m, cfg.drop_rate, *opts.dropout_rng);
        x = add(x, m);
    }

    x = layer_norm(x, params.final_gamma, params.final_beta);
    Tensor cls = slice_rows(x, 0, 1);
    if (cfg.head_hidden > 0) {
        Tensor h = gelu(add_row_bias(matmul(cls, params.head_fc1_weight), params.head_fc1_bias));
        trace.logits = add_row_bias(matmul(h, params.head_fc2_weight), params.head_fc2_bias);
    } else {
        trace.logits = add_row_bias(matmul(cls, params.head_fc2_weight), params.head_fc2_bias);
    }
    return trace;
}

// --- checksum & checkpoint ---------------------------------------------------

namespace {

constexpr char kMagic[8] = {'V', 'I', 'T', 'C', 'K', 'P', 'T', '1'};

void fnv1a(std::uint64_t &hash, const void *bytes, std::size_t n) {
    const auto *p = static_cast<const unsigned char *>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        hash ^= p[i];
        hash *= 0x100000001B3ULL;
    }
}

void put_u32(std::string &out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string &out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string &out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string config_block(const ViTConfig &c) {
    std::string s;
    s += "image_size=" + std::to_string(c.image_size) + "\n";
    s += "patch_size=" + std::to_string(c.patch_size) + "\n";
    s += "channels=" + std::to_string(c.channels) + "\n";
    s += "embed_dim=" + std::to_string(c.embed_dim) + "\n";
    s += "depth=" + std::to_string(c.depth) + "\n";
    s += "heads=" + std::to_string(c.heads) + "\n";
    s += "mlp_ratio=" + format_double(c.mlp_ratio) + "\n";
    s += "head_hidden=" + std::to_string(c.head_hidden) + "\n";
    s += "num_classes=" + std::to_string(c.num_classes) + "\n";
    s += "drop_rate=" + format_double(c.drop_rate) + "\n";
    return s;
}

class Reader {
   public:
    explicit Reader(std::istream &in) : in_(in) {}

    bool read_exact(void *dst, std::size_t n) {
        in_.read(static_cast<char *>(dst), static_cast<std::streamsize>(n));
        return static_cast<std::size_t>(in_.gcount()) == n;
    }

    std::uint32_t u32(const std::string &what) {
        unsigned char b[4];
        if (!read_exact(b, 4)) throw TruncatedPayloadError("checkpoint: truncated " + what);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }

    std::uint64_t u64(const std::string &what) {
        unsigned char b[8];
        if (!read_exact(b, 8)) throw TruncatedPayloadError("checkpoint: truncated " + what);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }

    bool at_eof() {
        in_.peek();
        return in_.eof();
    }

   private:
    std::istream &in_;
};

ViTConfig parse_config_block(const std::string &block) {
    ViTConfig c;
    std::size_t pos = 0;
    auto next_field = [&](const std::string &key) -> std::string {
        const std::size_t nl = block.find('\n', pos);
        if (nl == std::string::npos) {
            throw CheckpointError("checkpoint: config block missing key " + key);
        }
        const std::string line = block.substr(pos, nl - pos);
        pos = nl + 1;
        const std::string prefix = key + "=";
        if (line.rfind(prefix, 0) != 0) {
            throw CheckpointError("checkpoint: expected config key " + key + ", got \"" + line +
                                  "\"");
        }
        return line.substr(prefix.size());
    };
    try {
        c.image_size = std::stoull(next_field("image_size"));
        c.patch_size = std::stoull(next_field("patch_size"));
        c.channels = std::stoull(next_field("channels"));
        c.embed_dim = std::stoull(next_field("embed_dim"));
        c.depth = std::stoull(next_field("depth"));
        c.heads = std::stoull(next_field("heads"));
        c.mlp_ratio = std::stod(next_field("mlp_ratio"));
        c.head_hidden = std::stoull(next_field("head_hidden"));
        c.num_classes = std::stoull(next_field("num_classes"));
        c.drop_rate = std::stod(next_field("drop_rate"));
    } catch (const std::invalid_argument &) {
        throw CheckpointError("checkpoint: malformed config value");
    } catch (const std::out_of_range &) {
        throw CheckpointError("checkpoint: config value out of range");
    }
    return c;
}

}  // namespace

std::uint64_t params_checksum(const ViTParams &params) {
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    for (const auto &[name, t] : params.named_tensors()) {
        fnv1a(hash, name.data(), name.size());
        for (double v : t.data()) {
            const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
            unsigned char b[8];
            for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
            fnv1a(hash, b, 8);
        }
    }
    return hash;
}

void save_checkpoint(const ViTParams &params, const std::string &path) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    const std::string cfg = config_block(params.config);
    put_u32(out, static_cast<std::uint32_t>(cfg.size()));
    out += cfg;
    const auto named = params.named_tensors();
    put_u32(out, static_cast<std::uint32_t>(named.size()));
    for (const auto &[name, t] : named) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) put_u64(out, d);
        for (double v : t.data()) put_f64(out, v);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("checkpoint: cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("checkpoint: write failed for " + path);
}

ViTParams load_checkpoint(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("checkpoint: cannot open " + path);
    Reader r(f);

    char magic[8];
    if (!r.read_exact(magic, sizeof(magic))) {
        throw BadMagicError("checkpoint: file too short for magic in " + path);
    }
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw BadMagicError("checkpoint: bad magic in " + path);
    }

    const std::uint32_t cfg_len = r.u32("config length");
    if (cfg_len > 4096) throw CheckpointError("checkpoint: unreasonable config block size");
    std::string cfg_text(cfg_len, '\0');
    if (!r.read_exact(cfg_text.data(), cfg_len)) {
        throw TruncatedPayloadError("checkpoint: truncated config block");
    }
    const ViTConfig config = parse_config_block(cfg_text);
    ViTParams params = params_skeleton(config);
    const auto expected = params.named_tensors();

    const std::uint32_t count = r.u32("tensor count");
    if (count != expected.size()) {
        throw DimMismatchError("checkpoint: " + std::to_string(count) + " tensors, config needs " +
                               std::to_string(expected.size()));
    }
    for (const auto &[name, tensor] : expected) {
        const std::uint32_t name_len = r.u32("name length");
        if (name_len > 1024) throw CheckpointError("checkpoint: unreasonable tensor name length");
        std::string got_name(name_len, '\0');
        if (!r.read_exact(got_name.data(), name_len)) {
            throw TruncatedPayloadError("checkpoint: truncated name for tensor " + name);
        }
        if (got_name != name) {
            throw DimMismatchError("checkpoint: expected tensor " + name + ", found " + got_name);
        }
        const std::uint32_t rank = r.u32("rank of " + name);
        if (rank != tensor.rank()) {
            throw DimMismatchError("checkpoint: tensor " + name + " has rank " +
                                   std::to_string(rank) + ", expected " +
                                   std::to_string(tensor.rank()));
        }
        std::size_t prod = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            const std::uint64_t dim = r.u64("dims of " + name);
            if (dim != tensor.dim(d)) {
                throw DimMismatchError("checkpoint: tensor " + name + " dim " + std::to_string(d) +
                                       " is " + std::to_string(dim) + ", expected " +
                                       std::to_string(tensor.dim(d)));
            }
            prod *= dim;
        }
        if (prod != tensor.numel()) {
            throw DimMismatchError("checkpoint: tensor " + name + " product mismatch");
        }
        std::vector<double> &dst = const_cast<Tensor &>(tensor).data();
        for (std::size_t i = 0; i < prod; ++i) {
            unsigned char b[8];
            if (!r.read_exact(b, 8)) {
                throw TruncatedPayloadError("checkpoint: truncated payload in tensor " + name);
            }
            std::uint64_t bits = 0;
            for (int k = 7; k >= 0; --k) bits = (bits << 8) | b[k];
            dst[i] = std::bit_cast<double>(bits);
        }
    }
    if (!r.at_eof()) {
        throw CheckpointError("checkpoint: trailing bytes after last tensor in " + path);
    }
    return params;
}

}  // namespace vitkit
