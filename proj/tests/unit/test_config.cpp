#include <gtest/gtest.h>

#include <fstream>

#include "gazedecouple/config.hpp"
#include "gazedecouple/error.hpp"
#include "support.hpp"

using namespace gazedecouple;
using gazedecouple::testing::TempDir;

TEST(Config, DefaultsMatchPublishedSettings) {
    const CliConfig c = load_config("", {}, {});
    EXPECT_EQ(c.tau_attn, 0.2);
    EXPECT_EQ(c.tau_high, 0.5);
    EXPECT_EQ(c.tau_low, 0.05);
    EXPECT_EQ(c.n_fallback, 3);
    EXPECT_EQ(c.w_min, 0.2);
    EXPECT_EQ(c.w_max, 3.0);
    EXPECT_EQ(c.lambda1, 0.2);
    EXPECT_EQ(c.lambda2, 3.0);
    EXPECT_EQ(c.alpha, 0.5);
    EXPECT_EQ(c.provenance.at("tau_attn"), "default");
    EXPECT_EQ(c.to_json().size(), config_keys().size());
}

TEST(Config, FileThenEnvironmentThenFlags) {
    TempDir dir;
    const auto file = (dir / "c.yaml").string();
    std::ofstream(file) << "tau_attn: 0.3\nn_splits: 7\nworkers: 2\n";
    const CliConfig c = load_config(file, {"GAZEDECOUPLE_N_SPLITS=9", "GAZEDECOUPLE_WORKERS=3", "PATH=/bin"},
                                    {{"workers", "4"}});
    EXPECT_EQ(c.tau_attn, 0.3);
    EXPECT_EQ(c.n_splits, 9);
    EXPECT_EQ(c.workers, 4);
    EXPECT_EQ(c.provenance.at("tau_attn"), "file");
    EXPECT_EQ(c.provenance.at("n_splits"), "env");
    EXPECT_EQ(c.provenance.at("workers"), "flag");
}

TEST(Config, UnknownKeysAreRejectedEverywhere) {
    TempDir dir;
    const auto file = (dir / "c.yaml").string();
    std::ofstream(file) << "tau_atn: 0.3\n";
    EXPECT_THROW(load_config(file, {}, {}), ConfigError);
    EXPECT_THROW(load_config("", {"GAZEDECOUPLE_BOGUS=1"}, {}), ConfigError);
    EXPECT_THROW(load_config("", {}, {{"bogus", "1"}}), ConfigError);
}

TEST(Config, ErrorsNameTheField) {
    try {
        load_config("", {}, {{"tau_attn", "1.5"}});
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(std::string(e.what()), "tau_attn: must be in (0,1), got 1.5");
    }
    EXPECT_THROW(load_config("", {}, {{"n_splits", "many"}}), ConfigError);
    EXPECT_THROW(load_config("", {}, {{"tau_low", "0.6"}}), ConfigError);
    EXPECT_THROW(load_config("", {}, {{"segment_with_bbox", "perhaps"}}), ConfigError);
    EXPECT_THROW(load_config("", {}, {{"seed", "-1"}}), ConfigError);
}

TEST(Config, NonMappingFileIsRejected) {
    TempDir dir;
    const auto file = (dir / "c.yaml").string();
    std::ofstream(file) << "- 1\n- 2\n";
    EXPECT_THROW(load_config(file, {}, {}), ConfigError);
    std::ofstream(file) << "tau_attn: [1, 2]\n";
    EXPECT_THROW(load_config(file, {}, {}), ConfigError);
}

TEST(Config, DerivedConfigsCarryValues) {
    const CliConfig c = load_config("", {}, {{"tau_attn", "0.25"}, {"n_splits", "5"}, {"segment_with_bbox", "yes"}});
    EXPECT_EQ(c.pipeline().validation.tau_attn, 0.25);
    EXPECT_TRUE(c.pipeline().segment_with_bbox);
    EXPECT_EQ(c.eval().n_splits, 5);
    EXPECT_EQ(c.loss().lambda2, 3.0);
    EXPECT_EQ(c.retry().attempts, 3);
}
