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

#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "schemabot/config.hpp"
#include "schemabot/schema.hpp"

#ifndef SCHEMABOT_DATA_DIR
#define SCHEMABOT_DATA_DIR "data"
#endif

namespace testing {

inline std::string data_path(const std::string& rel) { return std::string(SCHEMABOT_DATA_DIR) + "/" + rel; }

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline schemabot::TaskSchema load_schema(const std::string& name) {
    return schemabot::parse_schema(slurp(data_path("schemas/" + name + ".json")));
}

inline std::shared_ptr<schemabot::Engine> load_engine(const std::string& config = "config/engine.json") {
    return schemabot::load_engine_config(data_path(config)).engine;
}

// Seeded generator helpers for property tests.
class Gen {
  public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }

    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[static_cast<std::size_t>(uniform(0, static_cast<int>(v.size()) - 1))];
    }

    std::string word(int min_len = 2, int max_len = 8) {
        static const std::string letters = "abcdefghijklmnopqrstuvwxyz";
        std::string w;
        const int n = uniform(min_len, max_len);
        for (int i = 0; i < n; ++i) w += letters[static_cast<std::size_t>(uniform(0, 25))];
        return w;
    }

    std::mt19937_64& engine() { return rng_; }

  private:
    std::mt19937_64 rng_;
};

}  // namespace testing
