#include "objslam/bench.hpp"

#include <numeric>

namespace objslam {

int iterations_to_reach(const std::vector<double>& trace, double target) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] <= target) return static_cast<int>(i);
  }
  return -1;
}

namespace {

BenchRow make_row(const std::string& method, const FitResult& r, int budget, double target) {
  BenchRow row;
  row.method = method;
  row.budget = budget;
  row.energy_trace = r.energy_trace;
  row.initial_energy = r.energy_trace.front();
  row.final_energy = r.energy_trace.back();
  row.iterations_to_target = iterations_to_reach(r.energy_trace, target);
  if (!r.iteration_seconds.empty()) {
    row.seconds_per_iteration =
        std::accumulate(r.iteration_seconds.begin(), r.iteration_seconds.end(), 0.0) /
        static_cast<double>(r.iteration_seconds.size());
  }
  return row;
}

}  // namespace

BenchResult run_bench(const Detection& det, const Camera& camera, const DecoderSpec& spec,
                      const FitConfig& cfg, double step) {
  BenchResult out;
  FitConfig reference_cfg = cfg;
  reference_cfg.max_iters = kBenchReferenceIters;
  reference_cfg.convergence_tol = 0.0;
  const FitResult reference = fit_object(det, camera, spec, reference_cfg);
  const double initial = reference.energy_trace.front();
  out.reference_energy = reference.energy_trace.back();
  out.target = initial - kBenchTargetFraction * (initial - out.reference_energy);

  const FitResult gn = fit_object(det, camera, spec, cfg);
  out.gauss_newton = make_row("gauss_newton", gn, cfg.max_iters, out.target);

  FitConfig fo_cfg = cfg;
  fo_cfg.first_order_step = step;
  out.step = step;
  const FitResult fo = first_order_baseline(det, camera, spec, fo_cfg);
  out.first_order = make_row("first_order", fo, cfg.first_order_iters, out.target);
  return out;
}

}  // namespace objslam
