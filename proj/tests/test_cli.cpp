/* Copyright 2026 The schemabot Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "schemabot/schema.hpp"
#include "support.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(SCHEMABOT_CLI) + " " + args + " 2>&1";
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string data(const std::string& rel) { return testing::data_path(rel); }

std::string config_flag() { return "--config " + data("config/engine.json"); }

std::string scratch(const std::string& name) {
    return (fs::temp_directory_path() / ("schemabot_cli_" + std::to_string(::getpid()) + "_" + name)).string();
}

}  // namespace

TEST_CASE("validate-schema exit codes") {
    Run r = run("validate-schema " + data("schemas/restaurant.json") + " " + data("schemas/hotel.json"));
    CHECK(r.code == 0);
    CHECK(r.out.find("restaurant ok") != std::string::npos);

    const std::string bad = scratch("bad.json");
    std::ofstream(bad) << R"({"domain": "x", "slots": [], "policy": [)";
    r = run("validate-schema " + bad);
    CHECK(r.code == 1);
    fs::remove(bad);

    CHECK(run("validate-schema").code == 2);
    CHECK(run("no-such-command").code == 2);
    CHECK(run("").code == 2);
}

TEST_CASE("extend-schema writes the extended skeleton") {
    const std::string out = scratch("ext.json");
    const Run r = run("extend-schema " + data("schemas/restaurant.json") + " --edits " + data("edits/restaurant_ext.json") +
                      " -o " + out);
    REQUIRE(r.code == 0);
    const auto base = testing::load_schema("restaurant");
    const auto ext = schemabot::parse_schema(testing::slurp(out));
    CHECK(ext.policy.turns.size() == base.policy.turns.size() + 4);
    CHECK(ext.belief.slots.size() == base.belief.slots.size() + 4);
    fs::remove(out);
}

TEST_CASE("eval-e2e on the gold replay scores 200") {
    const std::string report = scratch("report.json");
    const Run r = run("eval-e2e " + config_flag() + " --corpus " + data("corpus/toy.jsonl") + " --backend scripted:" +
                      data("corpus/oracle.json") + " --report " + report + " --min-combined 199.99");
    CHECK(r.code == 0);
    const json rep = json::parse(testing::slurp(report));
    CHECK(rep["combined"].get<double>() == doctest::Approx(200.0));
    CHECK(rep["bleu"].get<double>() == doctest::Approx(100.0));
    fs::remove(report);
}

TEST_CASE("eval-e2e threshold failure exits 1") {
    const Run r = run("eval-e2e " + config_flag() + " --corpus " + data("corpus/toy.jsonl") + " --backend keyword --min-combined 199");
    CHECK(r.code == 1);
    CHECK(r.out.find("Combined") != std::string::npos);
}

TEST_CASE("eval-action on the gold replay") {
    const Run r = run("eval-action " + config_flag() + " --corpus " + data("corpus/toy.jsonl") + " --backend scripted:" +
                      data("corpus/oracle.json") + " --min-f1 99.99");
    CHECK(r.code == 0);
}

TEST_CASE("oracle-script output replays to the same scores") {
    const std::string script = scratch("oracle.json");
    REQUIRE(run("oracle-script " + config_flag() + " --corpus " + data("corpus/toy.jsonl") + " -o " + script).code == 0);
    const Run r = run("eval-e2e " + config_flag() + " --corpus " + data("corpus/toy.jsonl") + " --backend scripted:" + script +
                      " --min-combined 199.99");
    CHECK(r.code == 0);
    fs::remove(script);
}

TEST_CASE("missing config is a usage error") {
    CHECK(run("eval-e2e --config /nonexistent/engine.json --corpus " + data("corpus/toy.jsonl")).code == 2);
}
