#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "efp/metrics.hpp"
#include "efp/problems.hpp"
#include "efp/solver.hpp"

namespace efp {

struct TrialRecord {
  std::uint64_t seed = 0;
  double rel_l2_error = 0.0;  // percent
  double wall_time = 0.0;     // seconds
  int iterations = 0;
};

/// Sample statistics over trials; std uses the n-1 denominator and is reported
/// as 0 with `degenerate` set when there is a single trial.
struct TrialStats {
  double mean_rel_l2_error = 0.0;
  double std_rel_l2_error = 0.0;
  double mean_wall_time = 0.0;
  double std_wall_time = 0.0;
  std::size_t trial_count = 0;
  bool degenerate = false;
  std::vector<TrialRecord> trials;
};

inline TrialRecord make_trial_record(const SolveResult& result, const ProblemSpec& problem) {
  return TrialRecord{result.seed, relative_l2_error(result.final_u, problem.exact_u), result.wall_time,
                     static_cast<int>(result.history.size())};
}

inline TrialStats aggregate_trials(std::vector<TrialRecord> records) {
  if (records.empty()) throw std::invalid_argument("aggregate_trials: no trials");
  // Sum in seed order so the statistics do not depend on completion order.
  std::stable_sort(records.begin(), records.end(),
                   [](const TrialRecord& a, const TrialRecord& b) { return a.seed < b.seed; });
  TrialStats stats;
  stats.trial_count = records.size();
  const double n = static_cast<double>(records.size());
  for (const auto& r : records) {
    stats.mean_rel_l2_error += r.rel_l2_error;
    stats.mean_wall_time += r.wall_time;
  }
  stats.mean_rel_l2_error /= n;
  stats.mean_wall_time /= n;
  if (records.size() == 1) {
    stats.degenerate = true;
  } else {
    double se = 0.0, st = 0.0;
    for (const auto& r : records) {
      se += (r.rel_l2_error - stats.mean_rel_l2_error) * (r.rel_l2_error - stats.mean_rel_l2_error);
      st += (r.wall_time - stats.mean_wall_time) * (r.wall_time - stats.mean_wall_time);
    }
    stats.std_rel_l2_error = std::sqrt(se / (n - 1.0));
    stats.std_wall_time = std::sqrt(st / (n - 1.0));
  }
  stats.trials = std::move(records);
  return stats;
}

inline TrialStats aggregate_trials(const std::vector<SolveResult>& results, const ProblemSpec& problem) {
  std::vector<TrialRecord> records;
  records.reserve(results.size());
  for (const auto& r : results) records.push_back(make_trial_record(r, problem));
  return aggregate_trials(std::move(records));
}

/// Outcome of one trial: a result, or the error that stopped it.
struct TrialOutcome {
  std::uint64_t seed = 0;
  std::optional<SolveResult> result;
  std::string error;

  bool ok() const { return result.has_value(); }
};

/// Run one solve per seed on up to `workers` threads. Outcomes come back in
/// seed-list order regardless of completion order.
inline std::vector<TrialOutcome> run_trials(const ProblemSpec& problem, const SolverConfig& base,
                                            const std::vector<std::uint64_t>& seeds, unsigned workers = 1) {
  std::vector<TrialOutcome> outcomes(seeds.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      SolverConfig config = base;
      config.seed = seeds[i];
      outcomes[i].seed = seeds[i];
      try {
        outcomes[i].result = run_solver(problem, config);
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      }
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(seeds.size())));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return outcomes;
}

/// max over pairs of ||a - b|| / max(||a||, ||b||); 0 for fewer than two fields.
inline double max_pairwise_relative_distance(const std::vector<Field>& fields) {
  double worst = 0.0;
  for (std::size_t a = 0; a < fields.size(); ++a) {
    for (std::size_t b = a + 1; b < fields.size(); ++b) {
      const double denom = std::max(norm2(fields[a]), norm2(fields[b]));
      const double diff = norm2(fields[a] - fields[b]);
      if (denom > 0.0) worst = std::max(worst, diff / denom);
    }
  }
  return worst;
}

/// base_seed, base_seed + 1, ..., base_seed + count - 1.
inline std::vector<std::uint64_t> seed_range(std::uint64_t base_seed, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t i = 0; i < count; ++i) seeds[i] = base_seed + i;
  return seeds;
}

}  // namespace efp
