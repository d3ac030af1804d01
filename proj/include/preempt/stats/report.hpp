#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "preempt/sim/study.hpp"
#include "preempt/stats/bootstrap.hpp"
#include "preempt/stats/holm.hpp"
#include "preempt/stats/metrics.hpp"
#include "preempt/stats/wilcoxon.hpp"

namespace preempt::stats {

enum class Metric { Success, EditDistance, FeedbackCount, Efficiency, TotalTime };

inline constexpr std::array<Metric, 5> kAllMetrics = {Metric::Success, Metric::EditDistance, Metric::FeedbackCount,
                                                      Metric::Efficiency, Metric::TotalTime};
// Outcomes of the predictive-vs-reactive family (Holm, m = 4).
inline constexpr std::array<Metric, 4> kTestedMetrics = {Metric::Success, Metric::EditDistance,
                                                         Metric::FeedbackCount, Metric::Efficiency};

inline constexpr std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::Success: return "success_rate";
    case Metric::EditDistance: return "edit_distance";
    case Metric::FeedbackCount: return "feedback_frequency";
    case Metric::Efficiency: return "efficiency";
    case Metric::TotalTime: return "total_time";
  }
  return "?";
}

inline double metric_value(const TrialMetrics& t, Metric m) {
  switch (m) {
    case Metric::Success: return t.success ? 100.0 : 0.0;
    case Metric::EditDistance: return t.edit_distance;
    case Metric::FeedbackCount: return t.feedback_count;
    case Metric::Efficiency: return t.efficiency;
    case Metric::TotalTime: return t.total_time;
  }
  return 0.0;
}

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // sample SD across participants
};

struct ConditionRow {
  std::string name;
  std::array<Summary, 5> metrics{};
  std::array<std::vector<double>, 5> per_participant;
};

struct PairedTest {
  Metric metric = Metric::Success;
  TestResult test;
  double p_holm = 1.0;
  bool reject = false;
  std::vector<double> diffs;  // predictive - reactive, per participant
  double mean_diff = 0.0;
  std::pair<double, double> ci{0.0, 0.0};
};

struct StudyReport {
  int participants = 0;
  int rounds = 0;
  std::vector<ConditionRow> rows;  // 7 conditions, then reactive and predictive aggregates
  std::vector<PairedTest> tests;
};

inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

/// Table of per-condition participant-level means, pooled timing rows,
/// and Holm-corrected Wilcoxon tests of predictive against reactive.
inline StudyReport study_report(const sim::StudyLog& study, std::uint64_t bootstrap_seed = 0,
                                std::size_t n_resamples = 10000) {
  const int np = study.config.participants, nr = study.config.rounds;
  if (np < 2 || nr < 1) throw DataError("study log has too few participants or rounds");
  // metrics[p][c] = per-round metrics
  std::vector<std::array<std::vector<TrialMetrics>, 7>> per(static_cast<std::size_t>(np));
  for (const auto& t : study.trials) {
    const int c = act::condition_index(t.log.condition);
    if (t.participant < 0 || t.participant >= np || c < 0) throw DataError("study trial out of range");
    per[static_cast<std::size_t>(t.participant)][static_cast<std::size_t>(c)].push_back(trial_metrics(t.log));
  }
  for (const auto& p : per)
    for (const auto& c : p)
      if (static_cast<int>(c.size()) != nr) throw DataError("study log is missing trials");

  StudyReport rep;
  rep.participants = np;
  rep.rounds = nr;
  auto row_for = [&](std::string name, const std::vector<int>& conds) {
    ConditionRow row;
    row.name = std::move(name);
    for (std::size_t m = 0; m < kAllMetrics.size(); ++m) {
      for (int p = 0; p < np; ++p) {
        double s = 0.0;
        int n = 0;
        for (int c : conds)
          for (const auto& tm : per[static_cast<std::size_t>(p)][static_cast<std::size_t>(c)]) {
            s += metric_value(tm, kAllMetrics[m]);
            ++n;
          }
        row.per_participant[m].push_back(s / n);
      }
      row.metrics[m] = summarize(row.per_participant[m]);
    }
    return row;
  };
  for (int c = 0; c < 7; ++c) rep.rows.push_back(row_for(act::kAllConditions[static_cast<std::size_t>(c)].name(), {c}));
  rep.rows.push_back(row_for("reactive", {1, 2, 3}));
  rep.rows.push_back(row_for("predictive", {4, 5, 6}));

  const auto& reactive = rep.rows[7];
  const auto& predictive = rep.rows[8];
  std::vector<double> raw;
  for (std::size_t k = 0; k < kTestedMetrics.size(); ++k) {
    const auto m = static_cast<std::size_t>(kTestedMetrics[k]);
    PairedTest pt;
    pt.metric = kTestedMetrics[k];
    pt.test = wilcoxon_signed_rank(predictive.per_participant[m], reactive.per_participant[m]);
    for (int p = 0; p < np; ++p)
      pt.diffs.push_back(predictive.per_participant[m][static_cast<std::size_t>(p)] -
                         reactive.per_participant[m][static_cast<std::size_t>(p)]);
    pt.mean_diff = summarize(pt.diffs).mean;
    pt.ci = bootstrap_ci_mean(pt.diffs, n_resamples, 0.05, bootstrap_seed + k);
    raw.push_back(pt.test.p);
    rep.tests.push_back(std::move(pt));
  }
  const auto holm = holm_bonferroni(raw);
  for (std::size_t k = 0; k < rep.tests.size(); ++k) {
    rep.tests[k].p_holm = holm[k].adjusted;
    rep.tests[k].reject = holm[k].reject;
  }
  return rep;
}

inline nlohmann::ordered_json report_json(const StudyReport& r) {
  nlohmann::ordered_json j;
  j["participants"] = r.participants;
  j["rounds"] = r.rounds;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json jr;
    jr["condition"] = row.name;
    for (std::size_t m = 0; m < kAllMetrics.size(); ++m)
      jr[std::string(metric_name(kAllMetrics[m]))] = {{"mean", row.metrics[m].mean}, {"sd", row.metrics[m].sd}};
    j["rows"].push_back(jr);
  }
  j["tests"] = nlohmann::ordered_json::array();
  for (const auto& t : r.tests) {
    nlohmann::ordered_json jt;
    jt["metric"] = std::string(metric_name(t.metric));
    jt["comparison"] = "predictive-reactive";
    jt["W"] = t.test.w;
    jt["Z"] = t.test.z;
    jt["p"] = t.test.p;
    jt["p_holm"] = t.p_holm;
    jt["reject"] = t.reject;
    jt["n_effective"] = t.test.n_effective;
    jt["exact"] = t.test.exact;
    jt["all_zero"] = t.test.all_zero;
    jt["r"] = t.test.r;
    jt["mean_diff"] = t.mean_diff;
    jt["ci95"] = {t.ci.first, t.ci.second};
    jt["diffs"] = t.diffs;
    j["tests"].push_back(jt);
  }
  return j;
}

inline std::string format(const char* fmt, double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, a, b);
  return buf;
}

inline std::string report_text(const StudyReport& r) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-26s %-16s %-14s %-14s %-16s %-14s\n", "condition", "success (%)",
                "edit dist", "feedback", "efficiency", "time (s)");
  out += line;
  for (const auto& row : r.rows) {
    std::snprintf(line, sizeof(line), "%-26s %-16s %-14s %-14s %-16s %-14s\n", row.name.c_str(),
                  format("%.1f (%.1f)", row.metrics[0].mean, row.metrics[0].sd).c_str(),
                  format("%.2f (%.2f)", row.metrics[1].mean, row.metrics[1].sd).c_str(),
                  format("%.2f (%.2f)", row.metrics[2].mean, row.metrics[2].sd).c_str(),
                  format("%.2f (%.2f)", row.metrics[3].mean, row.metrics[3].sd).c_str(),
                  format("%.1f (%.1f)", row.metrics[4].mean, row.metrics[4].sd).c_str());
    out += line;
  }
  out += "\npredictive vs reactive (Wilcoxon signed-rank, Holm m=4)\n";
  for (const auto& t : r.tests) {
    std::snprintf(line, sizeof(line), "%-20s W=%-7.1f Z=%-6.3f p=%-10.3g p_holm=%-10.3g r=%-6.3f diff=%.3f [%.3f, %.3f]\n",
                  std::string(metric_name(t.metric)).c_str(), t.test.w, t.test.z, t.test.p, t.p_holm, t.test.r,
                  t.mean_diff, t.ci.first, t.ci.second);
    out += line;
  }
  return out;
}

/// Per-participant paired differences, one row per participant.
inline std::string paired_csv(const StudyReport& r) {
  std::string out = "participant";
  for (const auto& t : r.tests) out += "," + std::string(metric_name(t.metric));
  out += "\n";
  for (int p = 0; p < r.participants; ++p) {
    out += std::to_string(p);
    for (const auto& t : r.tests) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), ",%.17g", t.diffs[static_cast<std::size_t>(p)]);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace preempt::stats
