#include "funnel/reporting.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace funnel {
namespace {

using nlohmann::json;

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) return Eigen::MatrixXd();
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  return m;
}

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

json int_list_json(const std::vector<int>& v) {
  json a = json::array();
  for (int x : v) a.push_back(x);
  return a;
}

}  // namespace

void atomic_write_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw NumericalError("atomic_write_file: cannot open " + tmp.string());
    out << content;
  }
  fs::rename(tmp, target);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_nominal_csv(const std::string& path, const NominalTrajectory& nom) {
  const int n = static_cast<int>(nom.states.front().size());
  const int m = nom.inputs.empty() ? 0 : static_cast<int>(nom.inputs.front().size());
  std::ostringstream out;
  out << "k";
  for (int i = 1; i <= n; ++i) out << ",x" << i;
  for (int i = 1; i <= m; ++i) out << ",u" << i;
  out << "\n";
  for (std::size_t k = 0; k < nom.states.size(); ++k) {
    out << k;
    for (int i = 0; i < n; ++i) out << "," << format_double(nom.states[k](i));
    if (k < nom.inputs.size()) {
      for (int i = 0; i < m; ++i) out << "," << format_double(nom.inputs[k](i));
    } else {
      for (int i = 0; i < m; ++i) out << ",";
    }
    out << "\n";
  }
  atomic_write_file(path, out.str());
}

void write_constants_json(const std::string& path, const ConstantsRecord& rec) {
  json root;
  root["schema_version"] = 1;
  root["source"] = rec.source;
  root["gamma"] = rec.constants.gamma;
  root["lipschitz_jacobian"] = rec.constants.lipschitz_jacobian;
  root["remainder"] = rec.constants.remainder;
  root["increment_bound"] = rec.constants.increment;
  root["variation_rate"] = rec.constants.variation_rate();
  root["input_jacobian_bound"] = rec.b_bar;
  atomic_write_file(path, root.dump(2) + "\n");
}

void write_trajectory_csv(const std::string& path, const RunReport& report,
                          const RunSettings& settings) {
  const int n = static_cast<int>(report.states.front().size());
  const int m = report.inputs.empty() ? static_cast<int>(settings.input_box.lower.size())
                                      : static_cast<int>(report.inputs.front().size());
  std::ostringstream out;
  out << "k,segment";
  for (int i = 1; i <= n; ++i) out << ",x" << i;
  for (int i = 1; i <= m; ++i) out << ",u" << i;
  out << ",eta_norm,in_funnel,excited\n";
  const int num_segments = static_cast<int>(report.segments.size());
  for (std::size_t k = 0; k < report.states.size(); ++k) {
    const int seg = std::min(settings.schedule.segment_of(static_cast<int>(k)), num_segments - 1);
    out << k << "," << seg;
    for (int i = 0; i < n; ++i) out << "," << format_double(report.states[k](i));
    if (k < report.inputs.size()) {
      for (int i = 0; i < m; ++i) out << "," << format_double(report.inputs[k](i));
    } else {
      for (int i = 0; i < m; ++i) out << ",";
    }
    const Eigen::VectorXd& eta = report.etas[k];
    out << "," << format_double(eta.norm());
    bool in_funnel = false;
    if (seg >= 0 && report.segments[seg].p.size() > 0) {
      in_funnel = eta.dot(report.segments[seg].p * eta) <= 1.0 + 1e-6;
    }
    out << "," << (in_funnel ? 1 : 0);
    if (k < report.excited.size()) {
      out << "," << (report.excited[k] ? 1 : 0);
    } else {
      out << ",";
    }
    out << "\n";
  }
  atomic_write_file(path, out.str());
}

void write_funnels_json(const std::string& path, const RunReport& report,
                        const RunSettings& settings, const NominalTrajectory& nom) {
  json root;
  root["schema_version"] = 1;
  root["alpha"] = settings.alpha;
  root["mu"] = settings.mu;
  root["horizon_steps"] = settings.schedule.horizon;
  root["segment_steps"] = settings.schedule.segment_steps;
  root["window_steps"] = settings.schedule.window_steps;
  root["excitation_bound"] = settings.excitation_bound;
  root["state_box"] = {{"lower", vector_json(settings.state_box.lower)},
                       {"upper", vector_json(settings.state_box.upper)}};
  root["input_box"] = {{"lower", vector_json(settings.input_box.lower)},
                       {"upper", vector_json(settings.input_box.upper)}};
  root["bound"] = {{"b_bar", report.bound_params.b_bar},
                   {"p_min_eig", report.bound_params.p_min_eig},
                   {"p_max_eig", report.bound_params.p_max_eig},
                   {"alpha_hat", report.bound_params.alpha_hat()}};

  json nom_states = json::array();
  for (const auto& x : nom.states) nom_states.push_back(vector_json(x));
  json nom_inputs = json::array();
  for (const auto& u : nom.inputs) nom_inputs.push_back(vector_json(u));
  root["nominal"] = {{"states", nom_states},
                     {"inputs", nom_inputs},
                     {"increment_bound", nom.increment_bound}};

  json segments = json::array();
  for (const auto& seg : report.segments) {
    json s;
    s["index"] = seg.segment;
    s["start"] = seg.segment * settings.schedule.segment_steps;
    s["P"] = matrix_json(seg.p);
    s["K"] = matrix_json(seg.k);
    s["L"] = matrix_json(seg.l);
    s["lambda1"] = seg.lambda1;
    s["lambda2"] = seg.lambda2;
    s["nu"] = seg.nu;
    if (std::isfinite(seg.beta)) s["beta"] = seg.beta;
    if (std::isfinite(seg.rho)) s["rho"] = seg.rho;
    s["p_min_envelope"] = matrix_json(seg.p_min_env);
    s["r_max_envelope"] = matrix_json(seg.r_max_env);
    s["synthesized"] = seg.synthesized;
    s["fallback"] = seg.fallback;
    if (seg.fallback) s["fallback_reason"] = seg.fallback_reason;
    if (!seg.diagnostics.status.empty()) {
      s["solver"] = {{"status", seg.diagnostics.status},
                     {"message", seg.diagnostics.message},
                     {"gap", seg.diagnostics.gap},
                     {"newton_iterations", seg.diagnostics.newton_iterations},
                     {"lmi_min_eig", seg.diagnostics.lmi_min_eig},
                     {"lmi_scale", seg.diagnostics.lmi_scale},
                     {"rescaled", seg.diagnostics.rescaled}};
    }
    if (seg.data) {
      s["data"] = {{"window_first", seg.data->window_first},
                   {"H", matrix_json(seg.data->h)},
                   {"H_plus", matrix_json(seg.data->h_plus)},
                   {"Xi", matrix_json(seg.data->xi)}};
    }
    segments.push_back(s);
  }
  root["segments"] = segments;
  atomic_write_file(path, root.dump(2) + "\n");
}

void write_report_json(const std::string& path, const RunReport& report,
                       const ReportExtras& extras) {
  json root;
  root["schema_version"] = 1;
  root["seed"] = extras.seed;
  root["exit_status"] = extras.exit_status;
  root["terminal_deviation"] = report.terminal_deviation;
  root["diverged"] = report.diverged;
  if (report.diverged) root["divergence_step"] = report.divergence_step;
  root["violations"] = {{"funnel", int_list_json(report.violations.funnel)},
                        {"state_box", int_list_json(report.violations.state_box)},
                        {"input_box", int_list_json(report.violations.input_box)},
                        {"lyapunov", int_list_json(report.violations.lyapunov)},
                        {"stability_bound", int_list_json(report.violations.stability_bound)}};
  json fallbacks = json::array();
  for (const auto& f : report.fallback_events) {
    fallbacks.push_back({{"segment", f.segment}, {"reason", f.reason}});
  }
  root["fallback_events"] = fallbacks;
  json ranks = json::array();
  for (const auto& r : report.rank_checks) {
    ranks.push_back(
        {{"segment", r.segment}, {"informative", r.informative}, {"sigma_min", r.sigma_min}});
  }
  root["rank_checks"] = ranks;
  json betas = json::array();
  for (double b : report.betas) betas.push_back(b);
  root["beta"] = betas;
  root["bound"] = {{"b_bar", report.bound_params.b_bar},
                   {"p_min_eig", report.bound_params.p_min_eig},
                   {"p_max_eig", report.bound_params.p_max_eig},
                   {"alpha_hat", report.bound_params.alpha_hat()},
                   {"eta0_norm", report.eta0_norm}};
  json trace = json::array();
  for (double b : report.bound_trace) trace.push_back(b);
  root["bound_trace"] = trace;
  double max_eta = 0.0;
  for (const auto& e : report.etas) max_eta = std::max(max_eta, e.norm());
  root["max_eta"] = max_eta;

  if (extras.baseline_present && extras.baseline != nullptr) {
    const RunReport& b = *extras.baseline;
    double bmax = 0.0;
    for (const auto& e : b.etas) bmax = std::max(bmax, e.norm());
    root["baseline"] = {
        {"diverged", b.diverged},
        {"terminal_deviation", b.terminal_deviation},
        {"max_eta", bmax},
        {"state_box_violations", int_list_json(b.violations.state_box)},
        {"input_box_violations", int_list_json(b.violations.input_box)}};
  }
  atomic_write_file(path, root.dump(2) + "\n");
}

void write_plotdata(const std::string& dir, const RunReport& report,
                    const NominalTrajectory& nom, const RunSettings& settings) {
  const int n = static_cast<int>(report.states.front().size());
  const int num_segments = static_cast<int>(report.segments.size());

  // Per-segment funnel extents sqrt((P^-1)_jj).
  std::vector<Eigen::VectorXd> extents(report.segments.size());
  for (std::size_t s = 0; s < report.segments.size(); ++s) {
    if (report.segments[s].p.size() == 0) {
      extents[s] = Eigen::VectorXd::Zero(n);
      continue;
    }
    const Eigen::MatrixXd pinv = spd_inverse(report.segments[s].p);
    extents[s] = pinv.diagonal().cwiseSqrt();
  }

  for (int j = 0; j < n; ++j) {
    std::ostringstream out;
    out << "k,nominal,actual,band_lo,band_hi\n";
    for (std::size_t k = 0; k < report.states.size(); ++k) {
      const int seg =
          std::min(settings.schedule.segment_of(static_cast<int>(k)), num_segments - 1);
      const double center = nom.states[k](j);
      const double ext = seg >= 0 ? extents[seg](j) : 0.0;
      out << k << "," << format_double(center) << "," << format_double(report.states[k](j))
          << "," << format_double(center - ext) << "," << format_double(center + ext) << "\n";
    }
    atomic_write_file(dir + "/state" + std::to_string(j + 1) + ".csv", out.str());
  }
}

LoadedArtifacts load_artifacts(const std::string& funnels_path,
                               const std::string& trajectory_path) {
  std::ifstream in(funnels_path);
  if (!in) throw ConfigError("cannot open funnels file: " + funnels_path);
  json root;
  try {
    in >> root;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("funnels.json parse error: ") + e.what());
  }

  LoadedArtifacts art;
  try {
    art.settings.alpha = root.at("alpha").get<double>();
    art.settings.mu = root.at("mu").get<double>();
    art.settings.schedule = build_schedule(root.at("horizon_steps").get<int>(),
                                           root.at("segment_steps").get<int>(),
                                           root.at("window_steps").get<int>());
    art.settings.excitation_bound = root.at("excitation_bound").get<double>();
    art.settings.state_box.lower = vector_from_json(root.at("state_box").at("lower"));
    art.settings.state_box.upper = vector_from_json(root.at("state_box").at("upper"));
    art.settings.input_box.lower = vector_from_json(root.at("input_box").at("lower"));
    art.settings.input_box.upper = vector_from_json(root.at("input_box").at("upper"));

    for (const auto& x : root.at("nominal").at("states")) {
      art.nominal.states.push_back(vector_from_json(x));
    }
    for (const auto& u : root.at("nominal").at("inputs")) {
      art.nominal.inputs.push_back(vector_from_json(u));
    }
    art.nominal.increment_bound = root.at("nominal").value("increment_bound", 0.0);

    art.report.bound_params.alpha = art.settings.alpha;
    art.report.bound_params.mu = art.settings.mu;
    art.report.bound_params.segment_steps = art.settings.schedule.segment_steps;
    art.report.bound_params.eps_bar = art.settings.excitation_bound;
    art.report.bound_params.b_bar = root.at("bound").at("b_bar").get<double>();
    art.report.bound_params.p_min_eig = root.at("bound").at("p_min_eig").get<double>();
    art.report.bound_params.p_max_eig = root.at("bound").at("p_max_eig").get<double>();

    for (const auto& s : root.at("segments")) {
      ControllerRecord rec;
      rec.segment = s.at("index").get<int>();
      rec.p = matrix_from_json(s.at("P"));
      rec.k = matrix_from_json(s.at("K"));
      rec.l = matrix_from_json(s.at("L"));
      rec.lambda1 = s.value("lambda1", 0.0);
      rec.lambda2 = s.value("lambda2", 0.0);
      rec.nu = s.value("nu", 0.0);
      rec.beta = s.value("beta", std::numeric_limits<double>::quiet_NaN());
      rec.rho = s.value("rho", std::numeric_limits<double>::quiet_NaN());
      rec.p_min_env = matrix_from_json(s.at("p_min_envelope"));
      rec.r_max_env = matrix_from_json(s.at("r_max_envelope"));
      rec.synthesized = s.at("synthesized").get<bool>();
      rec.fallback = s.value("fallback", false);
      if (s.contains("data")) {
        DataMatrices d;
        d.window_first = s.at("data").at("window_first").get<int>();
        d.h = matrix_from_json(s.at("data").at("H"));
        d.h_plus = matrix_from_json(s.at("data").at("H_plus"));
        d.xi = matrix_from_json(s.at("data").at("Xi"));
        rec.data = d;
      }
      art.report.segments.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("funnels.json: schema error: ") + e.what());
  }

  // Trajectory CSV.
  std::ifstream tin(trajectory_path);
  if (!tin) throw ConfigError("cannot open trajectory file: " + trajectory_path);
  std::string line;
  if (!std::getline(tin, line)) throw ConfigError("trajectory.csv: empty file");
  // Header determines n and m from x*/u* columns.
  int n = 0, m = 0;
  {
    std::stringstream hs(line);
    std::string col;
    while (std::getline(hs, col, ',')) {
      if (col.size() > 1 && col[0] == 'x') ++n;
      if (col.size() > 1 && col[0] == 'u') ++m;
    }
  }
  if (n == 0) throw ConfigError("trajectory.csv: no state columns");
  while (std::getline(tin, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    while (static_cast<int>(cells.size()) < 2 + n + m + 3) cells.push_back("");
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x(i) = std::stod(cells[2 + i]);
    art.report.states.push_back(x);
    if (!cells[2 + n].empty()) {
      Eigen::VectorXd u(m);
      for (int i = 0; i < m; ++i) u(i) = std::stod(cells[2 + n + i]);
      art.report.inputs.push_back(u);
      art.report.excited.push_back(cells[2 + n + m + 2] == "1");
    }
  }
  if (art.report.states.size() > art.nominal.states.size()) {
    throw ConfigError("trajectory.csv: more rows than nominal steps");
  }
  for (std::size_t k = 0; k < art.report.states.size(); ++k) {
    art.report.etas.push_back(art.report.states[k] - art.nominal.states[k]);
    if (k < art.report.inputs.size()) {
      art.report.xis.push_back(art.report.inputs[k] - art.nominal.inputs[k]);
    }
  }
  art.report.terminal_deviation = art.report.etas.empty() ? 0.0 : art.report.etas.back().norm();
  art.report.eta0_norm = art.report.etas.empty() ? 0.0 : art.report.etas.front().norm();

  // Bound trace from the recorded parameters.
  if (art.report.bound_params.p_min_eig > 0.0 && art.report.bound_params.dwell_condition_holds()) {
    for (std::size_t k = 0; k < art.report.states.size(); ++k) {
      art.report.bound_trace.push_back(
          pges_bound(static_cast<int>(k), art.report.bound_params, art.report.eta0_norm));
    }
  }
  return art;
}

void write_verification_json(const std::string& path, const VerificationReportFile& rec) {
  json root;
  root["schema_version"] = 1;
  root["passed"] = rec.passed;
  root["samples_requested"] = rec.samples_requested;
  json segs = json::array();
  for (const auto& s : rec.segments) {
    json j;
    j["segment"] = s.segment;
    j["sampled"] = s.sampled;
    if (s.sampled) {
      j["requested"] = s.outcome.requested;
      j["retained"] = s.outcome.retained;
      j["violations"] = s.outcome.violations;
      j["worst_residual"] = s.outcome.worst_residual;
      j["sampling_empty"] = s.outcome.sampling_empty;
    } else {
      j["skipped"] = true;
    }
    segs.push_back(j);
  }
  root["segments"] = segs;
  root["trace_checks"] = {
      {"funnel", int_list_json(rec.trace_violations.funnel)},
      {"state_box", int_list_json(rec.trace_violations.state_box)},
      {"input_box", int_list_json(rec.trace_violations.input_box)},
      {"lyapunov", int_list_json(rec.trace_violations.lyapunov)},
      {"stability_bound", int_list_json(rec.trace_violations.stability_bound)}};
  atomic_write_file(path, root.dump(2) + "\n");
}

}  // namespace funnel
