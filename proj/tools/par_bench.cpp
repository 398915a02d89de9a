// Compares the serial reference implementations of the data-parallel
// kernels (BBVI gradient estimation, SMC particle advancement) against
// their OpenMP variants, checking result equality along the way.
#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ppl/bbvi.hpp"
#include "ppl/model.hpp"
#include "ppl/smc.hpp"

using namespace ppl;

namespace {

double time_bbvi(const Model& m, int threads, int reps, double* checksum) {
  double best = 1e18;
  *checksum = 0.0;
  for (int r = 0; r < reps; ++r) {
    VParams params;
    auto t0 = std::chrono::steady_clock::now();
    BbviEstimate est = bbvi_gradient(m, params, true, 200, 7, 0, threads);
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    *checksum = est.avg_variance;
  }
  return best;
}

double time_smc(const Model& m, int threads, int reps, double* checksum) {
  double best = 1e18;
  *checksum = 0.0;
  for (int r = 0; r < reps; ++r) {
    SmcResult res = smc_run(m, true, 100, 7, threads);
    if (!res.ok) {
      std::fprintf(stderr, "smc failed: %s\n", res.error.c_str());
      return -1.0;
    }
    best = std::min(best, res.wall_seconds);
    *checksum = res.log_z;
  }
  return best;
}

}  // namespace

int main() {
  int hw = 1;
#ifdef _OPENMP
  hw = omp_get_max_threads();
#endif
  int par = hw > 1 ? hw : 4;  // oversubscribe on single-core machines
  std::printf("hardware threads: %d, parallel kernel threads: %d\n", hw, par);

  Model gmm = load_model(*find_model("gmm_fixed"), models_dir_default(), 1, 50);
  Model hmm = load_model(*find_model("hmm"), models_dir_default(), 1, 50);

  double c_serial, c_par;
  double ts = time_bbvi(gmm, 1, 3, &c_serial);
  double tp = time_bbvi(gmm, par, 3, &c_par);
  std::printf("bbvi-rb gradient (gmm_fixed, 200 samples): serial %.3fs  omp %.3fs  speedup %.2fx  results %s\n",
              ts, tp, tp > 0 ? ts / tp : 0.0, c_serial == c_par ? "equal" : "DIFFER");

  ts = time_smc(hmm, 1, 3, &c_serial);
  tp = time_smc(hmm, par, 3, &c_par);
  if (ts < 0 || tp < 0) return 1;
  std::printf("smc-iter (hmm, 100 particles): serial %.3fs  omp %.3fs  speedup %.2fx  results %s\n",
              ts, tp, tp > 0 ? ts / tp : 0.0, c_serial == c_par ? "equal" : "DIFFER");
  return c_serial == c_par ? 0 : 1;
}
