#include "advtok/runner.hpp"

#include <chrono>
#include <fstream>

#include <nlohmann/json.hpp>

#include "advtok/errors.hpp"
#include "parallel.hpp"

namespace advtok {

namespace {

AttackResult dispatch(const Instance& inst, const Vocabulary& vocab,
                      const VictimModel& model, const FluencyScorer& scorer,
                      const RunConfig& config) {
  switch (config.method) {
    case AttackMethod::kPgd:
      return pgd_attack(inst.seq, inst.cands, vocab, model, scorer, config.attack,
                        static_cast<std::uint64_t>(inst.id));
    case AttackMethod::kGreedy:
      return greedy_attack(inst.seq, inst.cands, vocab, model, scorer,
                           budget_for_length(config.attack.budget_fraction,
                                             inst.seq.length()));
    case AttackMethod::kOracle:
      return oracle_attack(inst.seq, inst.cands, vocab, model, scorer,
                           budget_for_length(config.attack.budget_fraction,
                                             inst.seq.length()));
  }
  throw std::invalid_argument("unknown attack method");
}

}  // namespace

AttackReport run_attack(const Dataset& data, const Vocabulary& vocab,
                        const VictimModel& model, const FluencyScorer& scorer,
                        const RunConfig& config) {
  const auto started = std::chrono::steady_clock::now();

  std::vector<ExampleOutcome> outcomes(data.size());
  detail::parallel_for(data.size(), config.workers, [&](std::size_t i) {
    const auto& inst = data[i];
    const AttackResult res = dispatch(inst, vocab, model, scorer, config);
    ExampleOutcome& out = outcomes[i];
    out.id = inst.id;
    out.skipped = res.clean_misclassified;
    out.success = res.success && !res.clean_misclassified;
    out.sites_changed = res.perturbation.sites_changed();
    out.queries = res.queries;
    out.restarts = res.restarts_used;
    out.fluency_delta = res.fluency_delta;
    out.final_margin = res.final_margin;
    out.adv_tokens = res.perturbation.adv_tokens;
  });

  AttackReport report;
  report.total = static_cast<int>(data.size());
  report.per_example = std::move(outcomes);
  double sites = 0.0, fluency = 0.0, queries = 0.0, restarts = 0.0;
  for (const auto& out : report.per_example) {
    if (out.skipped) {
      ++report.skipped;
      report.skipped_ids.push_back(out.id);
      continue;
    }
    ++report.attacked;
    queries += out.queries;
    restarts += out.restarts;
    if (out.success) {
      ++report.successes;
      sites += out.sites_changed;
      fluency += out.fluency_delta;
    }
  }
  if (report.attacked > 0) {
    report.asr_percent = 100.0 * report.successes / report.attacked;
    report.mean_queries = queries / report.attacked;
    report.mean_restarts = restarts / report.attacked;
  }
  if (report.successes > 0) {
    report.mean_sites = sites / report.successes;
    report.mean_fluency_delta = fluency / report.successes;
  }
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

void write_report(const std::string& path, const AttackReport& report) {
  using json = nlohmann::ordered_json;
  json doc;
  doc["format"] = "advtok-report";
  doc["version"] = 1;

  json agg;
  agg["total"] = report.total;
  agg["skipped"] = report.skipped;
  agg["attacked"] = report.attacked;
  agg["successes"] = report.successes;
  agg["asr_percent"] = report.asr_percent;
  agg["mean_sites"] = report.mean_sites;
  agg["mean_fluency_delta"] = report.mean_fluency_delta;
  agg["mean_queries"] = report.mean_queries;
  agg["mean_restarts"] = report.mean_restarts;
  doc["aggregates"] = std::move(agg);
  doc["skipped_ids"] = report.skipped_ids;

  json examples = json::array();
  for (const auto& out : report.per_example) {
    json rec;
    rec["id"] = out.id;
    rec["skipped"] = out.skipped;
    rec["success"] = out.success;
    rec["sites_changed"] = out.sites_changed;
    rec["queries"] = out.queries;
    rec["restarts"] = out.restarts;
    rec["fluency_delta"] = out.fluency_delta;
    rec["final_margin"] = out.final_margin;
    rec["adv_tokens"] = out.adv_tokens;
    examples.push_back(std::move(rec));
  }
  doc["per_example"] = std::move(examples);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open report for writing: " + path);
  out << doc.dump(2) << "\n";
}

namespace {

SweepPoint to_point(double x, const AttackReport& report) {
  SweepPoint p;
  p.x = x;
  p.asr_percent = report.asr_percent;
  if (report.attacked > 0) {
    const double rate = report.asr_percent / 100.0;
    p.stderr_percent = 100.0 * std::sqrt(rate * (1.0 - rate) / report.attacked);
  }
  return p;
}

}  // namespace

std::vector<SweepPoint> budget_sweep(const Dataset& data, const Vocabulary& vocab,
                                     const VictimModel& model, const FluencyScorer& scorer,
                                     RunConfig config, const std::vector<double>& fractions) {
  std::vector<SweepPoint> series;
  series.reserve(fractions.size());
  for (double fraction : fractions) {
    config.attack.budget_fraction = fraction;
    series.push_back(to_point(fraction, run_attack(data, vocab, model, scorer, config)));
  }
  return series;
}

std::vector<SweepPoint> iteration_sweep(const Dataset& data, const Vocabulary& vocab,
                                        const VictimModel& model,
                                        const FluencyScorer& scorer, RunConfig config,
                                        const std::vector<int>& iters) {
  std::vector<SweepPoint> series;
  series.reserve(iters.size());
  for (int t : iters) {
    config.attack.iters = t;
    series.push_back(
        to_point(static_cast<double>(t), run_attack(data, vocab, model, scorer, config)));
  }
  return series;
}

void write_series_csv(const std::string& path, const std::string& x_name,
                      const std::vector<SweepPoint>& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open series for writing: " + path);
  out << x_name << ",asr_percent,stderr_percent\n";
  out.precision(17);
  for (const auto& p : series) {
    out << p.x << "," << p.asr_percent << "," << p.stderr_percent << "\n";
  }
}

std::vector<AblationRow> ablation_grid(const Dataset& data, const Vocabulary& vocab,
                                       const VictimModel& model,
                                       const FluencyScorer& scorer, RunConfig config) {
  std::vector<AblationRow> rows;
  rows.push_back({"full", run_attack(data, vocab, model, scorer, config)});

  RunConfig no_restart = config;
  no_restart.attack.max_restarts = 0;
  rows.push_back({"no_restart", run_attack(data, vocab, model, scorer, no_restart)});

  RunConfig single_sample = no_restart;
  single_sample.attack.sampler.num_samples = 1;
  rows.push_back(
      {"no_restart_single_sample", run_attack(data, vocab, model, scorer, single_sample)});
  return rows;
}

}  // namespace advtok
