#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "tabsynth/tabsynth.hpp"

namespace testing_support {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("tabsynth_" + tag + "_" + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    std::string str(const std::string& leaf) const { return (path_ / leaf).string(); }

private:
    fs::path path_;
};

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline tabsynth::CreditData credit(Eigen::Index n, std::uint64_t seed = 7) {
    const auto spec = tabsynth::load_credit_spec(std::string(TABSYNTH_CONFIG_DIR) + "/credit_sim_v1.cfg");
    tabsynth::CreditSimConfig cfg;
    cfg.n = n;
    cfg.seed = seed;
    return tabsynth::gen_credit(spec, cfg);
}

inline tabsynth::Dataset continuous(const tabsynth::Matrix& x) {
    tabsynth::Schema s;
    for (Eigen::Index j = 0; j < x.cols(); ++j) s.push_back({"c" + std::to_string(j), tabsynth::ColumnKind::continuous()});
    return tabsynth::Dataset(std::move(s), x);
}

inline tabsynth::Matrix normal_matrix(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
    auto rng = tabsynth::make_rng(seed);
    tabsynth::Matrix m(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < p; ++j) m(i, j) = tabsynth::standard_normal(rng);
    return m;
}

} // namespace testing_support
