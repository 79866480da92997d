#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <string>

#include "crowdnav/bench.hpp"
#include "crowdnav/episode.hpp"
#include "crowdnav/recovery.hpp"
#include "crowdnav/scenario.hpp"
#include "crowdnav/trainer.hpp"

namespace fs = std::filesystem;
using namespace crowdnav;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

int cmd_map_features(const std::string& map_path, const std::string& out_dir,
                     double min_clearance) {
  const OccupancyGrid grid = load_map(map_path);
  const ClearanceField clearance = distance_transform(grid);
  RecoveryExtractParams params;
  if (min_clearance > 0.0) params.min_clearance = min_clearance;
  const auto points = extract_recovery_points(grid, clearance, params);

  fs::create_directories(out_dir);
  const std::string stem = fs::path(map_path).stem().string();
  const std::string points_path = out_dir + "/" + stem + "_recovery.csv";
  const std::string overlay_path = out_dir + "/" + stem + "_recovery.ppm";
  save_recovery_points(points_path, points);
  render_recovery_overlay(overlay_path, grid, points);

  double weight_sum = 0.0, weight_max = 0.0;
  for (const auto& p : points) {
    weight_sum += p.weight;
    weight_max = std::max(weight_max, p.weight);
  }
  std::printf("recovery points: %zu (weights sum %.6f, max %.4f)\n",
              points.size(), weight_sum, weight_max);
  std::printf("wrote %s\nwrote %s\n", points_path.c_str(), overlay_path.c_str());
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
  const TrainConfig cfg = TrainConfig::from_json_file(config_path);
  fs::create_directories(out_dir);
  const std::string ckpt = out_dir + "/policy.ckpt";
  const std::string log_path = out_dir + "/train_log.csv";

  Trainer trainer(cfg);
  std::vector<TrainLogRow> log;
  trainer.train(default_env_factory(cfg), &log, ckpt);
  write_train_log(log_path, log);
  std::printf("trained %lld steps, %zu updates\nwrote %s\nwrote %s\n",
              static_cast<long long>(cfg.total_steps), log.size(), ckpt.c_str(),
              log_path.c_str());
  return kExitOk;
}

int cmd_run(const std::string& scenario_path, const std::string& method_name_s,
            uint64_t seed, const std::string& checkpoint,
            const std::string& out_dir) {
  const Method method = method_from_name(method_name_s);
  const ScenarioAssets assets = ScenarioAssets::load(scenario_path);

  std::unique_ptr<ActorCriticNet> net;
  if (method != Method::Baseline) {
    if (checkpoint.empty())
      throw std::invalid_argument("method " + method_name_s +
                                  " requires --checkpoint");
    net = std::make_unique<ActorCriticNet>(load_checkpoint(checkpoint));
  }
  std::vector<RecoveryPoint> points;
  if (method == Method::Rl2) {
    if (assets.scenario.recovery_points_path.empty())
      throw std::invalid_argument("scenario has no recovery_points file (rl2)");
    points = load_recovery_points(assets.scenario.recovery_points_path);
  }

  const EpisodeResult result = run_episode(
      assets, method, seed, net.get(), points.empty() ? nullptr : &points);

  fs::create_directories(out_dir);
  char name[512];
  std::snprintf(name, sizeof(name), "%s/%s_%s_seed%llu.csv", out_dir.c_str(),
                assets.scenario.name.c_str(), method_name_s.c_str(),
                static_cast<unsigned long long>(seed));
  write_trajectory_log(name, result);

  std::printf("outcome=%s t=%.1f mean_v=%.3f\n", outcome_name(result.outcome),
              result.record.samples.empty() ? 0.0
                                            : result.record.samples.back().t,
              result.mean_velocity);
  std::printf("wrote %s\n", name);
  return kExitOk;
}

int cmd_bench(const std::string& plan_path, int jobs, const std::string& out_dir) {
  BenchPlan plan = BenchPlan::from_json_file(plan_path);
  if (!out_dir.empty()) plan.out_dir = out_dir;
  const BenchResult result = run_bench(plan, jobs);

  const bool sweep = !plan.densities.empty();
  write_summary_csv(plan.out_dir + "/summary.csv", result.cells, sweep);
  write_summary_json(plan.out_dir + "/summary.json", result.cells);
  write_tidy_csv(plan.out_dir + "/episodes.csv", result.episodes);

  for (const auto& c : result.cells) {
    if (c.density >= 0)
      std::printf("%-9s %-12s d=%-3d lost=%.2f frozen=%.2f success=%.2f v=%.2f\n",
                  c.method.c_str(), c.scenario.c_str(), c.density, c.lost_rate,
                  c.frozen_rate, c.success_rate, c.mean_velocity);
    else
      std::printf("%-9s %-12s lost=%.2f frozen=%.2f success=%.2f v=%.2f\n",
                  c.method.c_str(), c.scenario.c_str(), c.lost_rate,
                  c.frozen_rate, c.success_rate, c.mean_velocity);
  }
  std::printf("wrote %s/summary.csv, summary.json, episodes.csv\n",
              plan.out_dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crowdnav: crowd-navigation simulator and benchmark"};
  app.require_subcommand(1);

  uint64_t seed = 1;
  std::string out_dir = "out";
  int jobs = 0;
  app.add_option("--seed", seed, "base RNG seed")->capture_default_str();
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--jobs", jobs, "worker threads (0 = hardware)");

  auto* features = app.add_subcommand(
      "map-features", "extract recovery points from a map image");
  std::string map_path;
  double min_clearance = 0.0;
  features->add_option("map", map_path, "map image (.pgm with .meta sidecar)")
      ->required();
  features->add_option("--min-clearance", min_clearance,
                       "passage clearance for offsetting, m");

  auto* train = app.add_subcommand("train", "train the PPO local planner");
  std::string train_config;
  train->add_option("config", train_config, "train config JSON")->required();

  auto* run = app.add_subcommand("run", "run one episode with full logging");
  std::string scenario_path, method_s = "rl2", checkpoint;
  run->add_option("scenario", scenario_path, "scenario JSON")->required();
  run->add_option("--method", method_s, "baseline | rl | rl2")
      ->capture_default_str();
  run->add_option("--checkpoint", checkpoint, "policy checkpoint (rl/rl2)");

  auto* bench = app.add_subcommand("bench", "run a benchmark plan");
  std::string plan_path;
  bench->add_option("plan", plan_path, "bench plan JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (features->parsed())
      return cmd_map_features(map_path, out_dir, min_clearance);
    if (train->parsed()) return cmd_train(train_config, out_dir);
    if (run->parsed())
      return cmd_run(scenario_path, method_s, seed, checkpoint, out_dir);
    if (bench->parsed()) return cmd_bench(plan_path, jobs, out_dir);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    const std::string what = e.what();
    // missing/malformed inputs are validation failures, not crashes
    if (what.find("missing") != std::string::npos ||
        what.find("malformed") != std::string::npos ||
        what.find("requires") != std::string::npos ||
        what.find("config") != std::string::npos) {
      std::fprintf(stderr, "error: %s\n", what.c_str());
      return kExitValidation;
    }
    std::fprintf(stderr, "runtime error: %s\n", what.c_str());
    return kExitRuntime;
  }
  return kExitOk;
}
