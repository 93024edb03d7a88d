#include <sstream>

#include <gtest/gtest.h>

#include "geonet/config.hpp"

using geonet::Config;
using geonet::config_error;

namespace {
Config parse(const std::string& text) {
    std::istringstream in(text);
    return Config::parse(in, "t.conf");
}
}  // namespace

TEST(Config, ParsesValuesAndComments) {
    const auto c = parse(
        "# run settings\n"
        "version = 1\n"
        "  seed=42   # trailing comment\n"
        "\n"
        "gbrt.learning_rate = 0.05\n"
        "bootstrap = true\n"
        "mode = not_selected\n");
    EXPECT_EQ(c.integer("seed", 0), 42);
    EXPECT_DOUBLE_EQ(c.number("gbrt.learning_rate", 0.0), 0.05);
    EXPECT_TRUE(c.boolean("bootstrap", false));
    EXPECT_EQ(c.get("mode"), "not_selected");
    EXPECT_EQ(c.get("absent", "dflt"), "dflt");
    EXPECT_EQ(c.integer("absent", 7), 7);
    EXPECT_EQ(c.values().size(), 5u);
}

TEST(Config, VersionIsMandatoryAndPinned) {
    EXPECT_THROW(parse("seed = 1\n"), config_error);
    EXPECT_THROW(parse("version = 2\n"), config_error);
    EXPECT_THROW(parse("version = one\n"), config_error);
    EXPECT_NO_THROW(parse("version = 1\n"));
}

TEST(Config, SyntaxErrorsNameTheLine) {
    try {
        parse("version = 1\nseed 4\n");
        FAIL() << "missing '=' accepted";
    } catch (const config_error& e) {
        EXPECT_NE(std::string(e.what()).find("t.conf:2"), std::string::npos);
    }
    EXPECT_THROW(parse("version = 1\nSeed = 4\n"), config_error);
    EXPECT_THROW(parse("version = 1\n.seed = 4\n"), config_error);
    EXPECT_THROW(parse("version = 1\nseed = 1\nseed = 2\n"), config_error);
}

TEST(Config, TypeErrors) {
    const auto c = parse("version = 1\nseed = 4x\nrate = fast\nflag = maybe\n");
    EXPECT_THROW(c.integer("seed", 0), config_error);
    EXPECT_THROW(c.number("rate", 0.0), config_error);
    EXPECT_THROW(c.boolean("flag", false), config_error);
}

TEST(Config, UnknownKeysAndOverrides) {
    auto c = parse("version = 1\nseed = 3\nsede = 4\n");
    EXPECT_THROW(c.require_known({"seed"}), config_error);
    EXPECT_NO_THROW(c.require_known({"seed", "sede"}));
    c.set("seed", "9");
    EXPECT_EQ(c.integer("seed", 0), 9);
    EXPECT_THROW(Config::load("/nonexistent/geonet.conf"), config_error);
}
