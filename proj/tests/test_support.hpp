#ifndef SEGQA_TEST_SUPPORT_HPP
#define SEGQA_TEST_SUPPORT_HPP

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "segqa/grid.hpp"
#include "segqa/phantom.hpp"

namespace segqa::test {

// Scratch directory removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("segqa_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

inline std::vector<unsigned char> file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string file_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void put_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

// Labels drawn uniformly from `codes`.
inline LabelMap random_labels(const GridShape& g, Rng& rng, const std::vector<TissueClass>& codes) {
    std::vector<TissueClass> v(g.voxel_count());
    for (auto& x : v) x = codes[rng.below(codes.size())];
    return LabelMap(g, std::move(v));
}

inline GridShape cube(std::size_t n, double spacing = 1.0) { return GridShape{n, n, n, spacing, spacing, spacing}; }

#ifdef SEGQA_CLI_PATH
// Runs the CLI with the given argument string; returns its exit status.
inline int run_cli(const std::string& args, const std::filesystem::path& log = {}) {
    std::string cmd = std::string("\"") + SEGQA_CLI_PATH + "\" " + args;
    cmd += log.empty() ? " >/dev/null 2>&1" : " >\"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1 || !WIFEXITED(status)) return -1;
    return WEXITSTATUS(status);
}
#endif

}  // namespace segqa::test

#endif  // SEGQA_TEST_SUPPORT_HPP
