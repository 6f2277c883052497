#pragma once

#include <string>
#include <vector>

#include "advtok/attack.hpp"
#include "advtok/io.hpp"

namespace advtok {

enum class AttackMethod { kPgd, kGreedy, kOracle };

struct RunConfig {
  AttackMethod method = AttackMethod::kPgd;
  AttackConfig attack{};
  int workers = 1;
};

struct ExampleOutcome {
  std::int64_t id = 0;
  bool skipped = false;  // clean model already misclassifies; not counted in ASR
  bool success = false;
  int sites_changed = 0;
  int queries = 0;
  int restarts = 0;
  double fluency_delta = 0.0;
  double final_margin = 0.0;
  std::vector<TokenId> adv_tokens;
};

/// Per-example outcomes plus aggregates. ASR = successes / attacked, where
/// attacked excludes skipped examples. Wall clock is console-side only and is
/// never serialized, keeping report files bit-reproducible.
struct AttackReport {
  int total = 0;
  int skipped = 0;
  int attacked = 0;
  int successes = 0;
  double asr_percent = 0.0;
  double mean_sites = 0.0;          // over successful attacks
  double mean_fluency_delta = 0.0;  // over successful attacks
  double mean_queries = 0.0;        // over attacked examples
  double mean_restarts = 0.0;       // over attacked examples
  double wall_clock_seconds = 0.0;
  std::vector<std::int64_t> skipped_ids;
  std::vector<ExampleOutcome> per_example;
};

AttackReport run_attack(const Dataset& data, const Vocabulary& vocab,
                        const VictimModel& model, const FluencyScorer& scorer,
                        const RunConfig& config);

void write_report(const std::string& path, const AttackReport& report);

struct SweepPoint {
  double x = 0.0;
  double asr_percent = 0.0;
  double stderr_percent = 0.0;  // binomial standard error
};

/// ASR as a function of the budget fraction.
std::vector<SweepPoint> budget_sweep(const Dataset& data, const Vocabulary& vocab,
                                     const VictimModel& model, const FluencyScorer& scorer,
                                     RunConfig config, const std::vector<double>& fractions);

/// ASR as a function of the PGD iteration count.
std::vector<SweepPoint> iteration_sweep(const Dataset& data, const Vocabulary& vocab,
                                        const VictimModel& model,
                                        const FluencyScorer& scorer, RunConfig config,
                                        const std::vector<int>& iters);

/// Plot-ready flat columns: x,asr,stderr.
void write_series_csv(const std::string& path, const std::string& x_name,
                      const std::vector<SweepPoint>& series);

/// Restart/sampling ablation grid: full config, no restarts, and no restarts
/// with single-sample gradient estimation.
struct AblationRow {
  std::string name;
  AttackReport report;
};
std::vector<AblationRow> ablation_grid(const Dataset& data, const Vocabulary& vocab,
                                       const VictimModel& model,
                                       const FluencyScorer& scorer, RunConfig config);

}  // namespace advtok
