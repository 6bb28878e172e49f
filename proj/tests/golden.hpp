#ifndef SEGQA_TEST_GOLDEN_HPP
#define SEGQA_TEST_GOLDEN_HPP

// Golden-file helpers. Setting SEGQA_UPDATE_GOLDEN=1 rewrites the stored
// fixture from the current output instead of comparing against it.

#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace segqa::test {

inline std::filesystem::path golden_path(const std::string& name) {
    return std::filesystem::path(SEGQA_TEST_DATA_DIR) / name;
}

inline bool updating_golden() {
    const char* v = std::getenv("SEGQA_UPDATE_GOLDEN");
    return v != nullptr && std::string(v) == "1";
}

// Returns the stored fixture text, writing `current` first when updating.
inline std::string golden_text(const std::string& name, const std::string& current) {
    const auto path = golden_path(name);
    if (updating_golden()) put_text(path, current);
    if (!std::filesystem::exists(path)) {
        ADD_FAILURE() << "missing golden fixture " << path << " (run with SEGQA_UPDATE_GOLDEN=1)";
        return {};
    }
    return file_text(path);
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace segqa::test

#endif  // SEGQA_TEST_GOLDEN_HPP
