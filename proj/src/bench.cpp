#include "crowdnav/bench.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace crowdnav {

namespace fs = std::filesystem;

BenchPlan BenchPlan::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing bench plan: " + path);
  nlohmann::json j;
  in >> j;

  auto resolve = [&](const std::string& p) -> std::string {
    if (p.empty() || p[0] == '/') return p;
    const auto slash = path.find_last_of('/');
    return slash == std::string::npos ? p : path.substr(0, slash + 1) + p;
  };

  BenchPlan plan;
  for (const auto& s : j.at("scenarios"))
    plan.scenario_paths.push_back(resolve(s.get<std::string>()));
  for (const auto& m : j.at("methods"))
    plan.methods.push_back(method_from_name(m.get<std::string>()));
  plan.seeds = j.value("seeds", 1);
  plan.seed_base = j.value("seed_base", 1);
  if (j.contains("checkpoint"))
    plan.checkpoint_path = resolve(j["checkpoint"].get<std::string>());
  if (j.contains("densities"))
    plan.densities = j["densities"].get<std::vector<int>>();
  plan.out_dir = j.value("out", plan.out_dir);
  if (plan.seeds < 1) throw std::runtime_error("bench plan: seeds must be >= 1");
  if (plan.methods.empty())
    throw std::runtime_error("bench plan: methods must be nonempty");
  return plan;
}

void BenchPlan::validate_assets() const {
  bool needs_net = false, needs_recovery = false;
  for (Method m : methods) {
    if (m != Method::Baseline) needs_net = true;
    if (m == Method::Rl2) needs_recovery = true;
  }
  if (needs_net) {
    if (checkpoint_path.empty())
      throw std::runtime_error("bench plan: rl/rl2 methods need a checkpoint");
    if (!fs::exists(checkpoint_path))
      throw std::runtime_error("bench plan: missing checkpoint " + checkpoint_path);
  }
  for (const auto& sp : scenario_paths) {
    const Scenario sc = load_scenario(sp);  // throws on missing/malformed
    if (!fs::exists(sc.map_path))
      throw std::runtime_error("bench plan: missing map " + sc.map_path);
    if (needs_recovery) {
      if (sc.recovery_points_path.empty())
        throw std::runtime_error(
            "bench plan: scenario " + sc.name +
            " does not name a recovery_points file (required for rl2)");
      if (!fs::exists(sc.recovery_points_path))
        throw std::runtime_error("bench plan: missing recovery-point file " +
                                 sc.recovery_points_path);
    }
  }
}

int resolve_jobs(int requested) {
  if (const char* env = std::getenv("CROWDNAV_JOBS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  if (requested > 0) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 2;
}

BenchResult run_bench(const BenchPlan& plan, int jobs, bool write_logs,
                      bool quiet) {
  plan.validate_assets();

  std::unique_ptr<ActorCriticNet> net;
  bool needs_net = false;
  for (Method m : plan.methods)
    if (m != Method::Baseline) needs_net = true;
  if (needs_net)
    net = std::make_unique<ActorCriticNet>(load_checkpoint(plan.checkpoint_path));

  struct Task {
    int scenario_idx;
    Method method;
    int density;  // -1 = scenario default
    uint64_t seed;
    int cell_idx;
  };

  // load shared assets once per scenario
  std::vector<ScenarioAssets> assets;
  std::vector<std::vector<RecoveryPoint>> recovery;
  for (const auto& sp : plan.scenario_paths) {
    assets.push_back(ScenarioAssets::load(sp));
    if (!assets.back().scenario.recovery_points_path.empty() &&
        fs::exists(assets.back().scenario.recovery_points_path))
      recovery.push_back(
          load_recovery_points(assets.back().scenario.recovery_points_path));
    else
      recovery.emplace_back();
  }

  const std::vector<int> densities =
      plan.densities.empty() ? std::vector<int>{-1} : plan.densities;

  std::vector<Task> tasks;
  int cell_idx = 0;
  std::vector<BenchmarkCell> cells;
  std::vector<int> cell_scenario;
  for (size_t si = 0; si < assets.size(); ++si)
    for (Method m : plan.methods)
      for (int density : densities) {
        BenchmarkCell cell;
        cell.method = method_name(m);
        cell.scenario = assets[si].scenario.name;
        cell.density = density;
        cells.push_back(cell);
        cell_scenario.push_back(static_cast<int>(si));
        for (int s = 0; s < plan.seeds; ++s)
          tasks.push_back({static_cast<int>(si), m, density,
                           plan.seed_base + static_cast<uint64_t>(s), cell_idx});
        ++cell_idx;
      }

  if (write_logs) fs::create_directories(plan.out_dir);

  std::vector<EpisodeResult> results(tasks.size());
  std::atomic<size_t> next{0};
  std::atomic<int> failures{0};

  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& task = tasks[i];
      try {
        results[i] = run_episode(
            assets[task.scenario_idx], task.method, task.seed, net.get(),
            recovery[task.scenario_idx].empty() ? nullptr
                                                : &recovery[task.scenario_idx],
            task.density);
      } catch (const std::exception& e) {
        ++failures;
        if (!quiet)
          std::fprintf(stderr, "episode failed (%s %s seed %llu): %s\n",
                       method_name(task.method),
                       assets[task.scenario_idx].scenario.name.c_str(),
                       static_cast<unsigned long long>(task.seed), e.what());
      }
    }
  };

  const int n_jobs = resolve_jobs(jobs);
  std::vector<std::thread> pool;
  for (int t = 0; t < n_jobs; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failures > 0)
    throw std::runtime_error("bench: " + std::to_string(failures.load()) +
                             " episodes failed");

  // aggregate per cell, in task order
  BenchResult out;
  std::vector<std::vector<TrialRecord>> per_cell(cells.size());
  for (size_t i = 0; i < tasks.size(); ++i) {
    const Task& task = tasks[i];
    const EpisodeResult& r = results[i];
    per_cell[task.cell_idx].push_back(r.record);

    BenchResult::EpisodeRow row;
    row.method = method_name(task.method);
    row.scenario = assets[task.scenario_idx].scenario.name;
    row.density = task.density;
    row.seed = task.seed;
    row.outcome = r.outcome;
    row.t_end = r.record.samples.empty() ? 0.0 : r.record.samples.back().t;
    row.mean_velocity = r.mean_velocity;
    for (const auto& s : r.record.samples) row.collided |= s.collision;
    row.recovery_cycles = r.recovery_cycles;
    out.episodes.push_back(row);

    if (write_logs) {
      char name[256];
      std::snprintf(name, sizeof(name), "%s/%s_%s%s%s_seed%llu.csv",
                    plan.out_dir.c_str(),
                    assets[task.scenario_idx].scenario.name.c_str(),
                    method_name(task.method),
                    task.density >= 0 ? "_d" : "",
                    task.density >= 0 ? std::to_string(task.density).c_str() : "",
                    static_cast<unsigned long long>(task.seed));
      write_trajectory_log(name, r);
    }
  }
  for (size_t c = 0; c < cells.size(); ++c) {
    const MetricThresholds th = assets[cell_scenario[c]].scenario.thresholds;
    const BenchmarkCell agg = aggregate(per_cell[c], th);
    cells[c].trials = agg.trials;
    cells[c].lost_rate = agg.lost_rate;
    cells[c].frozen_rate = agg.frozen_rate;
    cells[c].success_rate = agg.success_rate;
    cells[c].mean_velocity = agg.mean_velocity;
    cells[c].collisions = agg.collisions;
  }
  out.cells = cells;
  return out;
}

void write_summary_csv(const std::string& path,
                       const std::vector<BenchmarkCell>& cells,
                       bool with_density) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write summary: " + path);
  out << (with_density
              ? "method,scenario,density,trials,lost,frozen,success,mean_velocity,collisions\n"
              : "method,scenario,trials,lost,frozen,success,mean_velocity,collisions\n");
  char buf[320];
  for (const auto& c : cells) {
    if (with_density)
      std::snprintf(buf, sizeof(buf), "%s,%s,%d,%d,%.4f,%.4f,%.4f,%.4f,%d\n",
                    c.method.c_str(), c.scenario.c_str(), c.density, c.trials,
                    c.lost_rate, c.frozen_rate, c.success_rate,
                    c.mean_velocity, c.collisions);
    else
      std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.4f,%.4f,%.4f,%.4f,%d\n",
                    c.method.c_str(), c.scenario.c_str(), c.trials,
                    c.lost_rate, c.frozen_rate, c.success_rate,
                    c.mean_velocity, c.collisions);
    out << buf;
  }
}

void write_summary_json(const std::string& path,
                        const std::vector<BenchmarkCell>& cells) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json cell;
    cell["method"] = c.method;
    cell["scenario"] = c.scenario;
    if (c.density >= 0) cell["density"] = c.density;
    cell["trials"] = c.trials;
    cell["lost"] = c.lost_rate;
    cell["frozen"] = c.frozen_rate;
    cell["success"] = c.success_rate;
    cell["mean_velocity"] = c.mean_velocity;
    cell["collisions"] = c.collisions;
    j.push_back(cell);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write summary: " + path);
  out << j.dump(2) << "\n";
}

void write_tidy_csv(const std::string& path,
                    const std::vector<BenchResult::EpisodeRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write tidy csv: " + path);
  out << "method,scenario,density,seed,outcome,t_end,mean_velocity,collided,"
         "recovery_cycles\n";
  char buf[320];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%llu,%s,%.4f,%.4f,%d,%d\n",
                  r.method.c_str(), r.scenario.c_str(), r.density,
                  static_cast<unsigned long long>(r.seed),
                  outcome_name(r.outcome), r.t_end, r.mean_velocity,
                  r.collided ? 1 : 0, r.recovery_cycles);
    out << buf;
  }
}

}  // namespace crowdnav
