#include "hypermix/config.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include "hypermix/conformer.hpp"
#include "hypermix/error.hpp"
#include "hypermix/flops.hpp"

namespace hypermix {

namespace fc = flopcost;

BlockStyle block_style(ModelKind kind) {
    switch (kind) {
        case ModelKind::Transformer:
        case ModelKind::Hypermixer:
            return BlockStyle::Transformer;
        default:
            return BlockStyle::Conformer;
    }
}

GiKind model_gi_kind(ModelKind kind) {
    switch (kind) {
        case ModelKind::Transformer:
        case ModelKind::Conformer:
            return GiKind::Mhsa;
        case ModelKind::Hypermixer:
        case ModelKind::Hyperconformer:
            return GiKind::Hypermixer;
        default:
            return GiKind::None;
    }
}

std::string model_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Transformer:
            return "transformer";
        case ModelKind::Hypermixer:
            return "hypermixer";
        case ModelKind::Conformer:
            return "conformer";
        case ModelKind::Hyperconformer:
            return "hyperconformer";
        default:
            return "conv-only";
    }
}

ModelKind model_from_name(const std::string& name) {
    for (ModelKind kind : {ModelKind::Transformer, ModelKind::Hypermixer, ModelKind::Conformer,
                           ModelKind::Hyperconformer, ModelKind::ConvOnly}) {
        if (model_name(kind) == name) return kind;
    }
    throw ConfigError("unknown model '" + name +
                      "' (valid: transformer, hypermixer, conformer, hyperconformer, conv-only)");
}

std::string gi_kind_name(GiKind kind) {
    switch (kind) {
        case GiKind::Mhsa:
            return "mhsa";
        case GiKind::Hypermixer:
            return "hypermixer";
        default:
            return "none";
    }
}

void validate(const EncoderConfig& cfg) {
    if (cfg.d_model < 1 || cfg.n_layers < 1 || cfg.d_ffn < 1 || cfg.d_prime < 1) {
        throw ConfigError("config: widths and layer counts must be positive");
    }
    if (cfg.k < 1 || cfg.d_model % cfg.k != 0 || cfg.d_prime % cfg.k != 0) {
        throw ConfigError("config: k = " + std::to_string(cfg.k) + " must divide d_model = " +
                          std::to_string(cfg.d_model) + " and d_prime = " +
                          std::to_string(cfg.d_prime));
    }
    if (cfg.kernel < 1 || cfg.kernel % 2 == 0) {
        throw ConfigError("config: kernel must be odd and positive, got " +
                          std::to_string(cfg.kernel));
    }
    if (cfg.vocab < 2) throw ConfigError("config: vocab must be at least 2 (blank + one label)");
    if (cfg.n_decoder_layers < 0) throw ConfigError("config: n_decoder_layers must be >= 0");
}

EncoderConfig preset(const std::string& name) {
    EncoderConfig cfg;
    if (name == "small") {
        cfg.d_model = 144;
    } else if (name == "medium") {
        cfg.d_model = 256;
    } else {
        throw ConfigError("unknown preset '" + name + "' (valid: small, medium)");
    }
    cfg.n_layers = 10;
    cfg.k = 8;
    cfg.d_ffn = 4 * cfg.d_model;
    cfg.d_prime = cfg.d_ffn;
    cfg.kernel = 31;
    cfg.gi_kind = GiKind::Hypermixer;
    cfg.tied_hypernets = false;
    cfg.vocab = 5000;
    cfg.n_decoder_layers = 4;
    return cfg;
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

i64 parse_int(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        i64 v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for " + key + ": '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config: bad boolean for " + key + ": '" + value + "'");
}

GiKind parse_gi_kind(const std::string& value) {
    if (value == "mhsa") return GiKind::Mhsa;
    if (value == "hypermixer") return GiKind::Hypermixer;
    throw ConfigError("config: bad gi_kind '" + value + "' (valid: mhsa, hypermixer)");
}

}  // namespace

EncoderConfig load_config_file(const std::string& path, const EncoderConfig& base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    EncoderConfig cfg = base;
    std::string line;
    i64 lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: line " + std::to_string(lineno) +
                              " is not 'key = value': '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "d_model") {
            cfg.d_model = parse_int(key, value);
        } else if (key == "n_layers") {
            cfg.n_layers = parse_int(key, value);
        } else if (key == "k") {
            cfg.k = parse_int(key, value);
        } else if (key == "d_ffn") {
            cfg.d_ffn = parse_int(key, value);
        } else if (key == "d_prime") {
            cfg.d_prime = parse_int(key, value);
        } else if (key == "kernel") {
            cfg.kernel = parse_int(key, value);
        } else if (key == "gi_kind") {
            cfg.gi_kind = parse_gi_kind(value);
        } else if (key == "tied_hypernets") {
            cfg.tied_hypernets = parse_bool(key, value);
        } else if (key == "vocab") {
            cfg.vocab = parse_int(key, value);
        } else if (key == "n_decoder_layers") {
            cfg.n_decoder_layers = parse_int(key, value);
        } else {
            throw ConfigError("config: unknown key '" + key + "' at line " +
                              std::to_string(lineno));
        }
    }
    validate(cfg);
    return cfg;
}

namespace paramcount {

i64 frontend(i64 d) {
    const i64 stage1 = 9 * d + d;           // [d,3,3] filters + bias
    const i64 stage2 = 9 * d * d + d;       // [d,d,3,3] filters + bias
    const i64 proj = 19 * d * d + d;        // flatten 19*d -> d
    return stage1 + stage2 + proj;
}

i64 ffn_module(i64 d, i64 d_ffn) {
    return 2 * d + d * d_ffn + d_ffn + d_ffn * d + d;
}

i64 conv_module(i64 d, i64 kernel) {
    return 2 * d                  // pre-norm
           + d * 2 * d + 2 * d    // expand
           + kernel * d + d       // depthwise taps + bias
           + 2 * d                // post-norm
           + d * d + d;           // project
}

i64 mhsa(i64 d) { return 4 * (d * d + d); }

i64 mhhm(i64 d, i64 k, i64 d_prime, bool tied) {
    const i64 dh = d / k;
    const i64 dph = d_prime / k;
    const i64 per_net = dh * dh + dh + dh * dph + dph;
    return (tied ? 1 : 2) * k * per_net;
}

i64 gi(const EncoderConfig& cfg, GiKind kind) {
    switch (kind) {
        case GiKind::Mhsa:
            return mhsa(cfg.d_model);
        case GiKind::Hypermixer:
            return mhhm(cfg.d_model, cfg.k, cfg.d_prime, cfg.tied_hypernets);
        default:
            return 0;
    }
}

i64 block(const EncoderConfig& cfg, BlockStyle style, GiKind kind) {
    const i64 d = cfg.d_model;
    const i64 gi_part = gi(cfg, kind) + (kind == GiKind::None ? 0 : 2 * d);  // + pre-norm
    if (style == BlockStyle::Conformer) {
        return 2 * ffn_module(d, cfg.d_ffn) + gi_part + conv_module(d, cfg.kernel) + 2 * d;
    }
    return gi_part + ffn_module(d, cfg.d_ffn);
}

i64 encoder(const EncoderConfig& cfg, ModelKind kind) {
    return frontend(cfg.d_model) +
           cfg.n_layers * block(cfg, block_style(kind), model_gi_kind(kind));
}

i64 decoder_layer(i64 d, i64 d_ffn) {
    const i64 self_attn = 4 * (d * d + d);
    const i64 cross_attn = 4 * (d * d + d);
    const i64 ffn = 2 * d * d_ffn + d + d_ffn;
    const i64 norms = 6 * d;
    return self_attn + cross_attn + ffn + norms;
}

}  // namespace paramcount

i64 count_params(const EncoderConfig& cfg, ModelKind kind, Scope scope) {
    validate(cfg);
    i64 total = paramcount::encoder(cfg, kind);
    if (scope == Scope::Full) {
        total += cfg.n_decoder_layers * paramcount::decoder_layer(cfg.d_model, cfg.d_ffn);
        total += cfg.vocab * cfg.d_model;                    // embedding, tied with output head
        total += cfg.d_model * cfg.vocab + cfg.vocab;        // frame/sequence classifier head
    }
    return total;
}

i64 count_params_instantiated(const EncoderConfig& cfg, ModelKind kind) {
    Rng rng(1);
    EncoderParams enc = EncoderParams::init(cfg, kind, /*max_len=*/16, rng);
    i64 total = 0;
    for (const Tensor& t : enc.parameters()) total += t.numel();
    return total;
}

i64 param_target(ModelKind kind, const std::string& preset_name) {
    const bool small = preset_name == "small";
    if (!small && preset_name != "medium") return 0;
    switch (kind) {
        case ModelKind::Transformer:
            return small ? 6'100'000 : 16'200'000;
        case ModelKind::Hypermixer:
            return small ? 5'600'000 : 14'400'000;
        case ModelKind::Conformer:
            return small ? 8'700'000 : 24'100'000;
        case ModelKind::Hyperconformer:
            return small ? 7'900'000 : 21'700'000;
        default:
            return 0;
    }
}

double head_reduction(const EncoderConfig& cfg, ModelKind kind) {
    if (model_gi_kind(kind) != GiKind::Hypermixer) {
        throw ConfigError("head reduction is defined for token-mixing models only");
    }
    EncoderConfig single = cfg;
    single.k = 1;
    const double multi = static_cast<double>(count_params(cfg, kind, Scope::Full));
    const double one = static_cast<double>(count_params(single, kind, Scope::Full));
    return 100.0 * (1.0 - multi / one);
}

FlopBreakdown flop_model(const EncoderConfig& cfg, ModelKind kind, i64 n_frames) {
    validate(cfg);
    const i64 d = cfg.d_model;
    const i64 n = n_frames;
    const GiKind gi = model_gi_kind(kind);
    const BlockStyle style = block_style(kind);

    FlopBreakdown fb;
    fb.frontend = fc::frontend(4 * n + 3, 80, d, d);
    fb.other = fc::elementwise(n * d);  // position add at encoder input
    for (i64 l = 0; l < cfg.n_layers; ++l) {
        if (gi != GiKind::None) {
            fb.gi += gi_module_flops(cfg, gi, n) + fc::elementwise(n * d);  // + residual
        }
        if (style == BlockStyle::Conformer) {
            // Each ffn: module + half-step scale + residual.
            fb.ffn += 2 * (ffn_module_flops(n, d, cfg.d_ffn) + 2 * fc::elementwise(n * d));
            fb.conv += conv_module_flops(n, d, cfg.kernel) + fc::elementwise(n * d);
            fb.other += fc::layer_norm(n * d, true);  // block exit norm
        } else {
            fb.ffn += ffn_module_flops(n, d, cfg.d_ffn) + fc::elementwise(n * d);
        }
    }
    return fb;
}

}  // namespace hypermix
