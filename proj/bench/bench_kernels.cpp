// Times the serial reference kernels against the OpenMP ones on the largest
// autoencoder layer shape, plus the fused weight-gradient/Adam step. Thread
// count follows OMP_NUM_THREADS.
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include <CLI11.hpp>

#include "resonant/kernels.hpp"
#include "resonant/rng.hpp"

namespace k = resonant::kernels;

namespace {

double time_ms(int reps, const std::function<void()>& fn) {
  fn();
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void row(const char* name, double serial, double parallel) {
  std::printf("%-26s %10.2f %10.2f %8.2fx\n", name, serial, parallel, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense-layer kernel benchmark"};
  std::size_t in = 8820, out = 1024, batch = 4;
  int reps = 5;
  app.add_option("--in", in, "layer input width");
  app.add_option("--out", out, "layer output width");
  app.add_option("--batch", batch, "batch size");
  app.add_option("--reps", reps, "timed repetitions (best is reported)");
  CLI11_PARSE(app, argc, argv);

  resonant::Rng rng(1);
  auto fill = [&](std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
  };
  const auto w = fill(in * out), b = fill(out), x = fill(batch * in), dy = fill(batch * out);
  std::vector<double> y(batch * out), dx(batch * in), dw(in * out), db(out);
  std::vector<double> p = w, m(in * out, 0.0), v(in * out, 0.0);
  const k::AdamHyper hyper;
  long step = 0;

  std::printf("layer %zux%zu, batch %zu, %d thread(s), best of %d\n", in, out, batch, k::max_threads(), reps);
  std::printf("%-26s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");
  row("forward", time_ms(reps, [&] { k::reference::dense_forward(w, b, x, y, batch, in, out); }),
      time_ms(reps, [&] { k::dense_forward(w, b, x, y, batch, in, out); }));
  row("backward input", time_ms(reps, [&] { k::reference::dense_backward_input(w, dy, dx, batch, in, out); }),
      time_ms(reps, [&] { k::dense_backward_input(w, dy, dx, batch, in, out); }));
  row("weight grad", time_ms(reps, [&] { k::reference::dense_weight_grad(dy, x, dw, db, batch, in, out); }),
      time_ms(reps, [&] { k::dense_weight_grad(dy, x, dw, db, batch, in, out); }));
  row("adam", time_ms(reps, [&] { k::reference::adam_update(p, dw, m, v, hyper, ++step); }),
      time_ms(reps, [&] { k::adam_update(p, dw, m, v, hyper, ++step); }));
  const double two_pass = time_ms(reps, [&] {
    k::reference::dense_weight_grad(dy, x, dw, db, batch, in, out);
    k::reference::adam_update(p, dw, m, v, hyper, ++step);
  });
  row("weight grad + adam (fused)", two_pass,
      time_ms(reps, [&] { k::fused_weight_grad_adam(p, m, v, dy, x, batch, in, out, hyper, ++step); }));
  return 0;
}
