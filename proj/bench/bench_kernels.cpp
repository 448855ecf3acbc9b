// Timing comparison between the OpenMP kernels and their serial twins.
// Run manually: build/bench/bench_kernels [size...]

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include <omp.h>

#include "vitag/kernels.hpp"
#include "vitag/rng.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
    fn();  // warm-up
    const auto t0 = Clock::now();
    for (int i = 0; i < repeats; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() /
           repeats;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int64_t> sizes = {64, 128, 256, 512};
    if (argc > 1) {
        sizes.clear();
        for (int i = 1; i < argc; ++i) sizes.push_back(std::atoll(argv[i]));
    }

    std::printf("threads=%d\n", omp_get_max_threads());
    std::printf("%8s %12s %12s %8s\n", "n", "serial_ms", "omp_ms", "speedup");

    vitag::Rng rng(1);
    for (int64_t n : sizes) {
        std::vector<float> a(static_cast<size_t>(n * n));
        std::vector<float> b(static_cast<size_t>(n * n));
        std::vector<float> c(static_cast<size_t>(n * n));
        for (auto& v : a) v = static_cast<float>(rng.uniform() - 0.5);
        for (auto& v : b) v = static_cast<float>(rng.uniform() - 0.5);

        const int repeats = n <= 128 ? 20 : 5;
        const double ser = time_ms(
            [&] {
                vitag::kernels::serial::matmul_nn(a.data(), b.data(), c.data(),
                                                  n, n, n);
            },
            repeats);
        const double par = time_ms(
            [&] {
                vitag::kernels::matmul_nn(a.data(), b.data(), c.data(), n, n,
                                          n);
            },
            repeats);
        std::printf("%8lld %12.3f %12.3f %8.2f\n",
                    static_cast<long long>(n), ser, par, ser / par);
    }
    return 0;
}
