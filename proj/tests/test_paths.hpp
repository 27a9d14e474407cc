#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#ifndef QMT_SOURCE_DIR
#define QMT_SOURCE_DIR "."
#endif

/// Path of a file in the source tree (test fixtures, shipped data).
inline std::string test_path(const std::string& rel) {
    return (std::filesystem::path(QMT_SOURCE_DIR) / rel).string();
}

/// Scratch path under the build tree.
inline std::string test_tmp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "qmt_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}
