#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "hypermix/error.hpp"
#include "hypermix/verify.hpp"

using namespace hypermix;

TEST_CASE("gradcheck module registry is populated and rejects unknown names") {
    const std::vector<std::string> names = gradcheck_module_names();
    CHECK(names.size() >= 30);
    for (const char* expected : {"matmul", "softmax", "layer_norm", "attention", "mhsa",
                                 "tm_mlp", "hypermixer", "mhhm", "conformer_block",
                                 "frontend_conv", "encoder_hypermixer", "ctc"}) {
        CAPTURE(expected);
        CHECK(std::find(names.begin(), names.end(), expected) != names.end());
    }
    CHECK_THROWS_AS(run_gradcheck("no_such_module", 1), UsageError);
}

TEST_CASE("a single module gradcheck returns a passing result") {
    auto results = run_gradcheck("matmul", 1);
    REQUIRE(results.size() == 1);
    CHECK(results[0].passed);
    CHECK(results[0].observed < results[0].tolerance);
}

TEST_CASE("oracle suite passes end to end at a fixed seed") {
    auto results = run_verify(123);
    CHECK(results.size() >= 15);
    for (const auto& r : results) {
        CAPTURE(r.name);
        CAPTURE(r.detail);
        CHECK(r.passed);
    }
}

TEST_CASE("verify results are identical across runs with the same seed") {
    auto a = run_verify(7);
    auto b = run_verify(7);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].name == b[i].name);
        CHECK(a[i].passed == b[i].passed);
        CHECK(a[i].observed == b[i].observed);
        CHECK(a[i].tolerance == b[i].tolerance);
        CHECK(a[i].detail == b[i].detail);
    }
}
