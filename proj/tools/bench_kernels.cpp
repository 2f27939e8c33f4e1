// Times the OpenMP kernels against their serial reference implementations.

#include <omp.h>

#include <cstdio>
#include <numeric>

#include "safecover/coverage.hpp"
#include "safecover/gp.hpp"
#include "safecover/rng.hpp"
#include "safecover/safe_sets.hpp"

using namespace safecover;

namespace {

template <class F>
double time_best_of(int reps, F&& fn) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const double t0 = omp_get_wtime();
    fn();
    best = std::min(best, omp_get_wtime() - t0);
  }
  return best;
}

void row(const char* name, double serial_s, double parallel_s) {
  std::printf("%-28s %10.4f ms %10.4f ms %8.2fx\n", name, serial_s * 1e3, parallel_s * 1e3,
              serial_s / parallel_s);
}

}  // namespace

int main() {
  const GridDomain domain{40, 40, 0.1};
  const int n = domain.size();
  RngStream rng(7, "bench");

  LocList all(n);
  std::iota(all.begin(), all.end(), 0);
  const KernelSpec kernel{KernelSpec::Family::matern52, 2.0, 1.0};

  Field upper(n), lower(n);
  for (int v = 0; v < n; ++v) {
    upper[v] = 1.0 + rng.next_double();
    lower[v] = upper[v] - rng.next_double();
  }
  ConfidenceBounds bounds;
  bounds.lower = lower;
  bounds.upper = upper;
  std::vector<double> base_scores;
  LocList base;
  for (int v = 0; v < n; v += 3) {
    base.push_back(v);
    base_scores.push_back(rng.next_double() - 0.3);
  }
  const std::vector<std::uint8_t> covered(n, 0);

  std::printf("%-28s %13s %13s %9s  (threads: %d)\n", "kernel", "serial", "openmp", "speedup",
              omp_get_max_threads());

  row("kernel_matrix 1600x1600",
      time_best_of(3, [&] { kernel_matrix_serial(domain, kernel, all); }),
      time_best_of(3, [&] { kernel_matrix_parallel(domain, kernel, all); }));

  row("certified_mask",
      time_best_of(5, [&] { certified_mask_serial(domain, base, base_scores, 1.0); }),
      time_best_of(5, [&] { certified_mask_parallel(domain, base, base_scores, 1.0); }));

  row("placement_scores r=5",
      time_best_of(5, [&] {
        placement_scores_serial(upper, domain, 5, all, covered, DiskMode::path_restricted);
      }),
      time_best_of(5, [&] {
        placement_scores_parallel(upper, domain, 5, all, covered, DiskMode::path_restricted);
      }));

  {
    const GridDomain small{8, 8, 0.1};
    LocList cells(small.size());
    std::iota(cells.begin(), cells.end(), 0);
    Field field(small.size());
    for (auto& f : field) f = rng.next_double();
    row("brute_force 8x8 3 agents",
        time_best_of(3, [&] {
          brute_force_optimal(field, small, 3, 2, cells, DiskMode::path_restricted, Exec::serial);
        }),
        time_best_of(3, [&] {
          brute_force_optimal(field, small, 3, 2, cells, DiskMode::path_restricted,
                              Exec::parallel);
        }));
  }

  {
    auto build = [&](Exec mode) {
      set_default_exec(mode);
      GpModel gp(domain, kernel, 1e-3);
      RngStream obs(11, "obs");
      for (int i = 0; i < 120; ++i)
        gp.add_observation(static_cast<Loc>(obs.next_below(n)), obs.next_normal());
      set_default_exec(Exec::parallel);
    };
    row("gp add_observations x120", time_best_of(3, [&] { build(Exec::serial); }),
        time_best_of(3, [&] { build(Exec::parallel); }));
  }

  return 0;
}
