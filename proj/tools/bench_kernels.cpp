// Times each kernel's serial reference against the OpenMP variant and the
// tiny model's forward/backward under both backends. Results are identical
// bitwise by construction; this tool reports the speed difference.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "vitkit/data.hpp"
#include "vitkit/kernels.hpp"
#include "vitkit/rng.hpp"
#include "vitkit/vit.hpp"

using namespace vitkit;

namespace {

double time_best_of(const std::function<void()> &fn, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::micro>(t1 - t0).count());
    }
    return best;
}

void report(const std::string &name, double serial_us, double parallel_us) {
    std::printf("%-28s %12.1f %12.1f %10.2fx\n", name.c_str(), serial_us, parallel_us,
                serial_us / parallel_us);
}

}  // namespace

int main() {
    std::printf("threads available: %s\n",
                kernels::parallel_available() ? "openmp" : "serial build");
    std::printf("%-28s %12s %12s %10s\n", "kernel", "serial(us)", "openmp(us)", "speedup");

    SplitMix64 rng(1);
    const std::size_t n = 192;
    std::vector<double> a(n * n), b(n * n), c(n * n);
    for (auto *v : {&a, &b, &c}) {
        for (double &x : *v) x = 2.0 * rng.next_double() - 1.0;
    }

    report("gemm 192x192x192",
           time_best_of([&] { kernels::gemm_serial(false, false, n, n, n, a.data(), b.data(),
                                                   c.data(), false); }, 5),
           time_best_of([&] { kernels::gemm_parallel(false, false, n, n, n, a.data(), b.data(),
                                                     c.data(), false); }, 5));

    const std::size_t rows = 512, cols = 512;
    std::vector<double> x(rows * cols), y(rows * cols), mean(rows), rstd(rows);
    std::vector<double> gamma(cols, 1.0), beta(cols, 0.0);
    for (double &v : x) v = 2.0 * rng.next_double() - 1.0;

    report("softmax 512x512",
           time_best_of([&] { kernels::softmax_rows_serial(x.data(), y.data(), rows, cols); }, 10),
           time_best_of([&] { kernels::softmax_rows_parallel(x.data(), y.data(), rows, cols); },
                        10));

    report("layer_norm 512x512",
           time_best_of([&] { kernels::layer_norm_rows_serial(x.data(), gamma.data(), beta.data(),
                                                              1e-5, y.data(), mean.data(),
                                                              rstd.data(), rows, cols); }, 10),
           time_best_of([&] { kernels::layer_norm_rows_parallel(x.data(), gamma.data(),
                                                                beta.data(), 1e-5, y.data(),
                                                                mean.data(), rstd.data(), rows,
                                                                cols); }, 10));

    report("gelu 262144",
           time_best_of([&] { kernels::gelu_serial(x.data(), y.data(), x.size()); }, 10),
           time_best_of([&] { kernels::gelu_parallel(x.data(), y.data(), x.size()); }, 10));

    report("axpy 262144",
           time_best_of([&] { kernels::axpy_serial(0.5, x.data(), y.data(), x.size()); }, 10),
           time_best_of([&] { kernels::axpy_parallel(0.5, x.data(), y.data(), x.size()); }, 10));

    // whole-model comparison through the dispatcher
    const ViTConfig cfg = vit_tiny_config();
    const ViTParams params = init_params(cfg, 2);
    Tensor image = Tensor::zeros({3, 32, 32});
    for (double &v : image.data()) v = rng.next_double();
    auto run_model = [&] {
        ViTParams work = clone_params(params);
        work.set_requires_grad(true);
        backward(cross_entropy(vit_forward(work, image).logits, {1}));
    };
    kernels::set_backend(kernels::Backend::serial);
    const double model_serial = time_best_of(run_model, 5);
    kernels::set_backend(kernels::Backend::parallel);
    const double model_parallel = time_best_of(run_model, 5);
    report("tiny forward+backward", model_serial, model_parallel);
    return 0;
}
