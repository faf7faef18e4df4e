#pragma once

#include <string>
#include <vector>

#include "funnel/config.hpp"
#include "funnel/runtime.hpp"

namespace funnel {

// All artifact writes go through write-temp-then-rename.
void atomic_write_file(const std::string& path, const std::string& content);

std::string format_double(double v);  // %.17g

// nominal.csv: columns k, x1..xn, u1..um (input cells empty on the final row).
void write_nominal_csv(const std::string& path, const NominalTrajectory& nom);

struct ConstantsRecord {
  BoundConstants constants;
  double b_bar = 0.0;
  std::string source;  // "estimated" or "override"
};

void write_constants_json(const std::string& path, const ConstantsRecord& rec);

// trajectory.csv: k, segment, x.., u.., eta_norm, in_funnel, excited.
void write_trajectory_csv(const std::string& path, const RunReport& report,
                          const RunSettings& settings);

// funnels.json: per-segment certificates, envelopes and window data plus the
// run metadata needed to re-verify everything from the artifacts alone.
void write_funnels_json(const std::string& path, const RunReport& report,
                        const RunSettings& settings, const NominalTrajectory& nom);

struct ReportExtras {
  int exit_status = 0;
  std::uint64_t seed = 0;
  bool baseline_present = false;
  const RunReport* baseline = nullptr;
};

void write_report_json(const std::string& path, const RunReport& report,
                       const ReportExtras& extras);

// plotdata/state<j>.csv: k, nominal, actual, band_lo, band_hi with the band
// from the active segment's funnel extent sqrt((P^-1)_jj).
void write_plotdata(const std::string& dir, const RunReport& report,
                    const NominalTrajectory& nom, const RunSettings& settings);

// --- artifact loading (verification path) ---

struct LoadedArtifacts {
  RunSettings settings;       // schedule, boxes, alpha, mu, excitation bound
  NominalTrajectory nominal;
  RunReport report;           // segments (with data), states/inputs/etas rebuilt
};

// Rebuilds runtime structures from funnels.json + trajectory.csv.
LoadedArtifacts load_artifacts(const std::string& funnels_path,
                               const std::string& trajectory_path);

struct SegmentVerification {
  int segment = 0;
  bool sampled = false;
  VerificationOutcome outcome;
};

struct VerificationReportFile {
  std::vector<SegmentVerification> segments;
  RunViolations trace_violations;
  bool passed = false;
  int samples_requested = 0;
};

void write_verification_json(const std::string& path, const VerificationReportFile& rec);

}  // namespace funnel
