#pragma once

#include <string>
#include <vector>

#include "objslam/detection.hpp"
#include "objslam/prior.hpp"
#include "objslam/render.hpp"
#include "objslam/solver.hpp"

namespace objslam {

/// First index i >= 1 with trace[i] <= target, or -1.
int iterations_to_reach(const std::vector<double>& trace, double target);

struct BenchRow {
  std::string method;
  int iterations_to_target = -1;  // -1: not reached within the budget
  int budget = 0;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  double seconds_per_iteration = 0.0;
  std::vector<double> energy_trace;
};

struct BenchResult {
  double reference_energy = 0.0;  // Gauss-Newton energy after `reference_iters`
  double target = 0.0;            // initial - 0.99 (initial - reference)
  double step = 0.0;              // first-order step size
  BenchRow gauss_newton;
  BenchRow first_order;
};

constexpr int kBenchReferenceIters = 30;
constexpr double kBenchTargetFraction = 0.99;

/**
 * Gauss-Newton (cfg.max_iters) against fixed-step gradient descent
 * (cfg.first_order_iters, step `step`) on the same energy and start.
 */
BenchResult run_bench(const Detection& det, const Camera& camera, const DecoderSpec& spec,
                      const FitConfig& cfg, double step);

}  // namespace objslam
