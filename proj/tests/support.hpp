#pragma once

#include "halsub/linalg.hpp"
#include "halsub/rng.hpp"
#include "halsub/tensor_store.hpp"

#include <gtest/gtest.h>

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>

namespace halsub::test {

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed, std::uint64_t stream = 0)
{
    CounterRng rng(seed, stream);
    return rng.gaussian_matrix(rows, cols);
}

inline Vector random_vector(Index n, std::uint64_t seed, std::uint64_t stream = 0)
{
    CounterRng rng(seed, stream);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = rng.gaussian();
    return v;
}

inline Matrix random_orthonormal(Index rows, Index cols, std::uint64_t seed)
{
    return orthonormalize(random_matrix(rows, cols, seed, 77));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir()
    {
        static std::atomic<int> counter{0};
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        std::string name = "halsub_";
        if (info) name += std::string(info->test_suite_name()) + "_" + info->name() + "_";
        name += std::to_string(::getpid()) + "_" + std::to_string(counter++);
        path_ = fs::temp_directory_path() / name;
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

inline double max_angle(const Matrix& a, const Matrix& b)
{
    const auto angles = principal_angles(a, b);
    return angles.empty() ? 0.0 : angles.back();
}

} // namespace halsub::test
