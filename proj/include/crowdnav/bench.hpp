#pragma once

#include <string>
#include <vector>

#include "crowdnav/episode.hpp"

namespace crowdnav {

/// Batch-run plan: scenarios x methods x seeds, optionally swept over
/// pedestrian densities.
struct BenchPlan {
  std::vector<std::string> scenario_paths;
  std::vector<Method> methods;
  int seeds = 1;
  uint64_t seed_base = 1;
  std::string checkpoint_path;  // required when rl/rl2 present
  std::vector<int> densities;   // empty = scenario default crowd size
  std::string out_dir = "bench_out";

  static BenchPlan from_json_file(const std::string& path);
  /// Verify every referenced asset exists before any episode starts.
  void validate_assets() const;
};

struct BenchResult {
  std::vector<BenchmarkCell> cells;
  /// per-episode rows for the tidy CSV: method, scenario, density, seed,
  /// outcome, end time, mean velocity, collision flag, recovery cycles
  struct EpisodeRow {
    std::string method;
    std::string scenario;
    int density = -1;
    uint64_t seed = 0;
    TrialOutcome outcome = TrialOutcome::Lost;
    double t_end = 0.0;
    double mean_velocity = 0.0;
    bool collided = false;
    int recovery_cycles = 0;
  };
  std::vector<EpisodeRow> episodes;
};

/// Run the whole plan on a bounded worker pool (`jobs` <= 0 uses the
/// hardware concurrency; CROWDNAV_JOBS overrides). Episode logs are written
/// under out_dir when write_logs is set.
BenchResult run_bench(const BenchPlan& plan, int jobs, bool write_logs = true,
                      bool quiet = false);

void write_summary_csv(const std::string& path,
                       const std::vector<BenchmarkCell>& cells,
                       bool with_density);
void write_summary_json(const std::string& path,
                        const std::vector<BenchmarkCell>& cells);
void write_tidy_csv(const std::string& path,
                    const std::vector<BenchResult::EpisodeRow>& rows);

int resolve_jobs(int requested);

}  // namespace crowdnav
