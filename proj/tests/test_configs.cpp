#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "hypermix/config.hpp"
#include "hypermix/error.hpp"
#include "hypermix/rng.hpp"

using namespace hypermix;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& contents) {
        path = std::string("configs_test_") + std::to_string(rand()) + ".tmp";
        std::ofstream out(path);
        out << contents;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("model names round-trip and map to the right styles") {
    for (ModelKind kind : {ModelKind::Transformer, ModelKind::Hypermixer,
                           ModelKind::Conformer, ModelKind::Hyperconformer,
                           ModelKind::ConvOnly}) {
        CHECK(model_from_name(model_name(kind)) == kind);
    }
    CHECK(block_style(ModelKind::Transformer) == BlockStyle::Transformer);
    CHECK(block_style(ModelKind::Hypermixer) == BlockStyle::Transformer);
    CHECK(block_style(ModelKind::Conformer) == BlockStyle::Conformer);
    CHECK(block_style(ModelKind::Hyperconformer) == BlockStyle::Conformer);
    CHECK(model_gi_kind(ModelKind::Conformer) == GiKind::Mhsa);
    CHECK(model_gi_kind(ModelKind::Hyperconformer) == GiKind::Hypermixer);
    CHECK(model_gi_kind(ModelKind::ConvOnly) == GiKind::None);
    CHECK_THROWS_AS(model_from_name("resnet"), ConfigError);
}

TEST_CASE("presets carry the reference shapes") {
    EncoderConfig s = preset("small");
    CHECK(s.d_model == 144);
    CHECK(s.d_ffn == 4 * 144);
    CHECK(s.d_prime == s.d_ffn);
    CHECK(s.n_layers == 10);
    CHECK(s.k == 8);
    CHECK(s.kernel == 31);
    CHECK(s.vocab == 5000);
    CHECK(s.n_decoder_layers == 4);

    EncoderConfig m = preset("medium");
    CHECK(m.d_model == 256);
    CHECK(m.d_ffn == 1024);
    CHECK_THROWS_AS(preset("large"), ConfigError);
}

TEST_CASE("validate rejects bad shapes") {
    EncoderConfig cfg = preset("small");
    cfg.k = 7;  // does not divide 144
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg = preset("small");
    cfg.kernel = 30;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg = preset("small");
    cfg.n_layers = 0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("closed-form counts equal instantiated parameter sums") {
    // Tiny shapes keep instantiation fast; sweep the model kinds and a few
    // random-but-valid configurations.
    Rng rng(17);
    for (int round = 0; round < 6; ++round) {
        EncoderConfig cfg;
        cfg.k = rng.randint(1, 4);
        cfg.d_model = cfg.k * rng.randint(2, 6);
        cfg.d_ffn = rng.randint(8, 32);
        cfg.d_prime = cfg.k * rng.randint(2, 8);
        cfg.kernel = 2 * rng.randint(1, 7) + 1;
        cfg.n_layers = rng.randint(1, 3);
        cfg.tied_hypernets = rng.randint(0, 1) == 1;
        cfg.vocab = rng.randint(5, 50);
        cfg.n_decoder_layers = rng.randint(0, 2);
        validate(cfg);
        for (ModelKind kind : {ModelKind::Transformer, ModelKind::Hypermixer,
                               ModelKind::Conformer, ModelKind::Hyperconformer,
                               ModelKind::ConvOnly}) {
            CAPTURE(round);
            CAPTURE(model_name(kind));
            CHECK(count_params(cfg, kind, Scope::Encoder) ==
                  count_params_instantiated(cfg, kind));
        }
    }
    // And at the real preset shapes for the four benchmarked models.
    for (const char* name : {"small", "medium"}) {
        EncoderConfig cfg = preset(name);
        for (ModelKind kind : {ModelKind::Transformer, ModelKind::Hypermixer,
                               ModelKind::Conformer, ModelKind::Hyperconformer}) {
            CAPTURE(name);
            CAPTURE(model_name(kind));
            CHECK(count_params(cfg, kind, Scope::Encoder) ==
                  count_params_instantiated(cfg, kind));
        }
    }
}

TEST_CASE("component formulas match their stated closed forms") {
    const i64 d = 144, K = 31, d_ffn = 576;
    CHECK(paramcount::frontend(d) == 28 * d * d + 12 * d);
    CHECK(paramcount::ffn_module(d, d_ffn) == 2 * d + 2 * d * d_ffn + d_ffn + d);
    CHECK(paramcount::conv_module(d, K) == 3 * d * d + (8 + K) * d);
    CHECK(paramcount::mhsa(d) == 4 * d * d + 4 * d);
    // Token mixer, untied, k=8, d'=576: 2 * 8 * (dh^2 + dh + dh*dph + dph).
    const i64 dh = d / 8, dph = 576 / 8;
    CHECK(paramcount::mhhm(d, 8, 576, false) == 2 * 8 * (dh * dh + dh + dh * dph + dph));
    CHECK(paramcount::mhhm(d, 8, 576, true) == 8 * (dh * dh + dh + dh * dph + dph));
    CHECK(paramcount::decoder_layer(d, d_ffn) ==
          2 * (4 * d * d + 4 * d) + 2 * d * d_ffn + d + d_ffn + 6 * d);
}

TEST_CASE("full scope adds decoder, embedding, and classifier head") {
    EncoderConfig cfg = preset("small");
    const i64 enc = count_params(cfg, ModelKind::Conformer, Scope::Encoder);
    const i64 full = count_params(cfg, ModelKind::Conformer, Scope::Full);
    const i64 extras = cfg.n_decoder_layers * paramcount::decoder_layer(cfg.d_model, cfg.d_ffn) +
                       cfg.vocab * cfg.d_model +                  // tied embedding
                       cfg.d_model * cfg.vocab + cfg.vocab;        // classifier head
    CHECK(full == enc + extras);
}

TEST_CASE("full-scope totals hit the reference targets within ten percent") {
    for (const char* name : {"small", "medium"}) {
        EncoderConfig cfg = preset(name);
        for (ModelKind kind : {ModelKind::Transformer, ModelKind::Hypermixer,
                               ModelKind::Conformer, ModelKind::Hyperconformer}) {
            const i64 target = param_target(kind, name);
            REQUIRE(target > 0);
            const i64 got = count_params(cfg, kind, Scope::Full);
            const double rel = std::fabs(static_cast<double>(got - target)) /
                               static_cast<double>(target);
            CAPTURE(name);
            CAPTURE(model_name(kind));
            CHECK(rel <= 0.10);
        }
    }
}

TEST_CASE("token-mixing variants are smaller than their attention twins") {
    for (const char* name : {"small", "medium"}) {
        EncoderConfig cfg = preset(name);
        CHECK(count_params(cfg, ModelKind::Hypermixer, Scope::Full) <
              count_params(cfg, ModelKind::Transformer, Scope::Full));
        CHECK(count_params(cfg, ModelKind::Hyperconformer, Scope::Full) <
              count_params(cfg, ModelKind::Conformer, Scope::Full));
    }
}

TEST_CASE("head_reduction measures the k-vs-1 full-scope delta") {
    EncoderConfig cfg = preset("medium");
    const double red = head_reduction(cfg, ModelKind::Hyperconformer);
    EncoderConfig one = cfg;
    one.k = 1;
    const double p1 = static_cast<double>(count_params(one, ModelKind::Hyperconformer, Scope::Full));
    const double pk = static_cast<double>(count_params(cfg, ModelKind::Hyperconformer, Scope::Full));
    CHECK(red == doctest::Approx(100.0 * (1.0 - pk / p1)).epsilon(1e-12));
    CHECK(red > 0.0);
}

TEST_CASE("config files overlay presets") {
    TempFile f(
        "# comment line\n"
        "d_model = 32\n"
        "k = 4        # trailing comment\n"
        "d_ffn = 64\n"
        "d_prime = 64\n"
        "gi_kind = mhsa\n"
        "tied_hypernets = true\n");
    EncoderConfig cfg = load_config_file(f.path, preset("small"));
    CHECK(cfg.d_model == 32);
    CHECK(cfg.k == 4);
    CHECK(cfg.d_ffn == 64);
    CHECK(cfg.gi_kind == GiKind::Mhsa);
    CHECK(cfg.tied_hypernets);
    CHECK(cfg.n_layers == 10);  // inherited from the preset
    CHECK(cfg.kernel == 31);
}

TEST_CASE("config file errors are specific") {
    {
        TempFile f("d_model = 32\nunknown_knob = 3\n");
        CHECK_THROWS_AS(load_config_file(f.path, preset("small")), ConfigError);
    }
    {
        TempFile f("d_model thirty-two\n");
        CHECK_THROWS_AS(load_config_file(f.path, preset("small")), ConfigError);
    }
    {
        TempFile f("kernel = 30\n");  // parses, then validate rejects
        CHECK_THROWS_AS(load_config_file(f.path, preset("small")), ConfigError);
    }
    CHECK_THROWS_AS(load_config_file("no_such_file.cfg", preset("small")), ConfigError);
}

TEST_CASE("gi kind names") {
    CHECK(gi_kind_name(GiKind::Mhsa) == "mhsa");
    CHECK(gi_kind_name(GiKind::Hypermixer) == "hypermixer");
}
