// Copyright 2026 The GCE Authors
// SPDX-License-Identifier: Apache-2.0

// gce: profile import, susceptibility analysis, colocation estimates,
// calibration, reproduction of reference measurements and planning.
//
// Exit codes: 0 success, 1 runtime error, 2 invalid input, 3 a reproduction
// check outside its tolerance.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gce/gce.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kInvalidInput = 2;
constexpr int kMismatch = 3;

std::string normalized(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == ' ' || c == '-' || c == '_') continue;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

// Built-in name, then a spec file path, then a spec file in $GCE_SPEC_DIR
// named after the GPU or declaring that name.
gce::GpuSpec resolve_gpu(const std::string& arg) {
  if (auto spec = gce::find_builtin(arg)) return *spec;
  if (fs::is_regular_file(arg)) return gce::gpu_spec_from_json(gce::read_json_file(arg));
  if (const char* dir = std::getenv("GCE_SPEC_DIR"); dir != nullptr && fs::is_directory(dir)) {
    const fs::path direct = fs::path(dir) / (arg + ".json");
    if (fs::is_regular_file(direct)) return gce::gpu_spec_from_json(gce::read_json_file(direct.string()));
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const auto j = gce::read_json_file(f.string());
      if (j.is_object() && j.contains("name") && j["name"].is_string() &&
          normalized(j["name"].get<std::string>()) == normalized(arg)) {
        return gce::gpu_spec_from_json(j);
      }
    }
  }
  throw gce::ValidationError("unknown GPU '" + arg + "' (not built in, not a file, not in GCE_SPEC_DIR)");
}

gce::Placement parse_placement(const std::string& s) {
  if (s == "shared") return gce::Placement::shared();
  const std::string prefix = "partitioned:";
  if (s.rfind(prefix, 0) == 0) {
    const std::string pct = s.substr(prefix.size());
    double share = 0.0;
    const auto [ptr, ec] = std::from_chars(pct.data(), pct.data() + pct.size(), share);
    if (ec != std::errc() || ptr != pct.data() + pct.size() || pct.empty()) {
      throw gce::ValidationError("placement share '" + pct + "' is not a number");
    }
    auto p = gce::Placement::partitioned(share);
    gce::validate_placement(p);
    return p;
  }
  throw gce::ValidationError("placement must be 'shared' or 'partitioned:<pct>', got '" + s + "'");
}

gce::CalibrationParams load_params(const std::string& path) {
  if (path.empty()) return gce::default_calibration();
  auto params = gce::calibration_params_from_json(gce::read_json_file(path));
  gce::validate_params(params);
  return params;
}

gce::KernelProfile load_profile(const std::string& path, const gce::GpuSpec& spec) {
  auto p = gce::kernel_profile_from_json(gce::read_json_file(path));
  gce::validate_profile(p, spec);
  return p;
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
  out << content;
}

std::string dump(const gce::json& j) { return j.dump(2) + "\n"; }

void check_format(const std::string& format) {
  if (format != "text" && format != "json") throw gce::ValidationError("format must be 'text' or 'json'");
}

// Calibration input: "membw_util,slowdown" rows of one kernel against an
// identical copy of itself, so aggregate utilization is twice the value.
std::vector<gce::CalibrationPoint> read_calibration_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw gce::ValidationError("cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  std::vector<gce::CalibrationPoint> points;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = gce::detail::split_csv_line(line, line_no);
    if (line_no == 1) {
      if (fields != std::vector<std::string>{"membw_util", "slowdown"}) {
        throw gce::ValidationError("calibration CSV header must be 'membw_util,slowdown'");
      }
      continue;
    }
    if (fields.size() != 2) throw gce::ValidationError("line " + std::to_string(line_no) + ": expected 2 fields");
    const auto u = gce::detail::parse_decimal(fields[0]);
    const auto s = gce::detail::parse_decimal(fields[1]);
    if (!u || !s) throw gce::ValidationError("line " + std::to_string(line_no) + ": not a number");
    points.push_back({2.0 * *u, *s});
  }
  if (line_no == 0) throw gce::ValidationError("calibration CSV is empty");
  return points;
}

std::vector<gce::Workload> read_workloads(const std::string& path, const gce::GpuSpec& spec) {
  const auto j = gce::read_json_file(path);
  if (!j.is_object() || !j.contains("workloads") || !j["workloads"].is_array()) {
    throw gce::ValidationError("workloads file needs a 'workloads' array");
  }
  const fs::path base = fs::path(path).parent_path();
  std::vector<gce::Workload> out;
  for (const auto& w : j["workloads"]) {
    gce::detail::StrictObject o(w, "workload");
    gce::Workload wl;
    wl.id = o.text("id");
    wl.slack = o.has("slack") ? o.number("slack") : 1.0;
    const auto& kernels = o.raw("kernels");
    if (!kernels.is_array() || kernels.empty()) throw gce::ValidationError("workload '" + wl.id + "' has no kernels");
    for (const auto& k : kernels) {
      gce::detail::StrictObject ko(k, "kernel");
      gce::WeightedKernel wk;
      const auto& prof = ko.raw("profile");
      if (prof.is_string()) {
        wk.profile = gce::kernel_profile_from_json(gce::read_json_file((base / prof.get<std::string>()).string()));
      } else {
        wk.profile = gce::kernel_profile_from_json(prof);
      }
      gce::validate_profile(wk.profile, spec);
      wk.weight = ko.has("weight") ? ko.number("weight") : 1.0;
      ko.finish();
      wl.kernels.push_back(std::move(wk));
    }
    o.finish();
    out.push_back(std::move(wl));
  }
  return out;
}

std::string reference_csv(const gce::ReferenceDataset& d) {
  std::ostringstream os;
  os << "table,key,field,value\n";
  for (const auto& r : d.table2) {
    const std::string key = r.gpu + " " + std::to_string(r.thread_blocks);
    os << "table2," << key << ",membw_util," << gce::fixed4(r.membw_util) << "\n";
    os << "table2," << key << ",slowdown," << gce::fixed4(r.slowdown) << "\n";
  }
  for (const auto& r : d.table3) {
    os << "table3," << r.scenario << ",compute_ipc," << gce::fixed4(r.compute_ipc) << "\n";
    os << "table3," << r.scenario << ",speedup," << gce::fixed4(r.speedup) << "\n";
  }
  for (const auto& r : d.table4) {
    os << "table4," << r.scenario << ",compute_ipc," << gce::fixed4(r.compute_ipc) << "\n";
    os << "table4," << r.scenario << ",fp64_util," << gce::fixed4(r.fp64_util) << "\n";
    os << "table4," << r.scenario << ",speedup," << gce::fixed4(r.speedup) << "\n";
  }
  os << "fig2,peak,array_size_bytes," << gce::fixed4(d.fig2_peak.array_size_bytes) << "\n";
  os << "fig2,peak,slowdown," << gce::fixed4(d.fig2_peak.slowdown) << "\n";
  os << "fig3,sequential,inflection_bytes," << gce::fixed4(d.fig3_inflections.sequential_bytes) << "\n";
  os << "fig3,colocated,inflection_bytes," << gce::fixed4(d.fig3_inflections.colocated_bytes) << "\n";
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GPU colocation interference estimator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gce 1.0.0");

  std::string gpu = "h100";
  std::string placement = "shared";
  std::string params_path;
  std::string out_path;
  std::string format = "text";
  auto common = [&](CLI::App* cmd, bool with_placement, bool with_params) {
    cmd->add_option("--gpu", gpu, "built-in GPU name or spec JSON path")->capture_default_str();
    if (with_placement) cmd->add_option("--placement", placement, "shared | partitioned:<pct>")->capture_default_str();
    if (with_params) cmd->add_option("--params", params_path, "calibration params JSON");
    cmd->add_option("--out", out_path, "output file (default: stdout)");
  };

  // import
  auto* import = app.add_subcommand("import", "build a kernel profile from a metrics CSV");
  std::string csv_path;
  gce::LaunchConfig launch;
  std::string roofline;
  import->add_option("csv", csv_path, "metrics CSV (kernel_name,metric_name,metric_value)")->required();
  import->add_option("--grid", launch.grid_blocks, "thread blocks in the grid")->required();
  import->add_option("--threads", launch.threads_per_block, "threads per block")->required();
  import->add_option("--regs", launch.registers_per_thread, "registers per thread");
  import->add_option("--smem", launch.shared_mem_per_block, "shared memory per block, bytes");
  import->add_option("--duration", launch.duration, "isolated duration");
  import->add_option("--working-set", launch.working_set, "bytes touched by the kernel");
  import->add_option("--roofline", roofline, "compute | memory");
  common(import, false, false);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "susceptibility report for one profile");
  std::string profile_a;
  std::string profile_b;
  analyze->add_option("profile", profile_a, "kernel profile JSON")->required();
  analyze->add_option("--format", format, "text | json")->capture_default_str();
  common(analyze, false, false);

  // estimate
  auto* estimate = app.add_subcommand("estimate", "predict the interference between two kernels");
  estimate->add_option("profile_a", profile_a, "first kernel profile JSON")->required();
  estimate->add_option("profile_b", profile_b, "second kernel profile JSON")->required();
  estimate->add_option("--format", format, "text | json")->capture_default_str();
  common(estimate, true, true);

  // audit
  auto* audit = app.add_subcommand("audit", "compare the estimate with the roofline and occupancy-sum baselines");
  audit->add_option("profile_a", profile_a, "first kernel profile JSON")->required();
  audit->add_option("profile_b", profile_b, "second kernel profile JSON")->required();
  audit->add_option("--format", format, "text | json")->capture_default_str();
  common(audit, false, true);

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "fit the memory bandwidth contention curve");
  std::string table = "ref";
  calibrate->add_option("--table", table, "'ref' for the built-in measurements, or a membw_util,slowdown CSV")
      ->capture_default_str();
  common(calibrate, false, true);

  // reproduce
  auto* reproduce = app.add_subcommand("reproduce", "check predictions against the reference measurements");
  std::string target;
  reproduce->add_option("target", target, "table2 | table3 | table4 | fig2 | fig3 | pitfalls | mm | blocks | all")
      ->required();
  reproduce->add_option("--format", format, "text | json")->capture_default_str();
  reproduce->add_option("--params", params_path, "calibration params JSON");
  reproduce->add_option("--out", out_path, "plot-data CSV path");

  // plan
  auto* plan = app.add_subcommand("plan", "pair workloads under their slowdown budgets");
  std::string workloads_path;
  plan->add_option("workloads", workloads_path, "workloads JSON")->required();
  plan->add_option("--format", format, "text | json")->capture_default_str();
  common(plan, true, true);

  // reference
  auto* reference = app.add_subcommand("reference", "export the reference measurements");
  reference->add_option("--format", format, "json | csv")->capture_default_str();
  reference->add_option("--out", out_path, "output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalidInput;
  }

  try {
    if (*import) {
      if (!roofline.empty()) launch.roofline_bound = gce::parse_roofline_bound(roofline);
      std::ifstream in(csv_path);
      if (!in) throw gce::ValidationError("cannot open '" + csv_path + "'");
      const auto result = gce::build_profile(gce::parse_metrics_csv(in), launch);
      gce::validate_profile(result.profile, resolve_gpu(gpu));
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
      emit(out_path, dump(gce::to_json(result.profile)));
      return kOk;
    }

    if (*analyze) {
      check_format(format);
      const auto spec = resolve_gpu(gpu);
      const auto report = gce::classify_susceptibility(load_profile(profile_a, spec), spec);
      emit(out_path, format == "json" ? dump(gce::report::to_json(report)) : gce::report::text(report));
      return kOk;
    }

    if (*estimate) {
      check_format(format);
      const auto spec = resolve_gpu(gpu);
      const auto where = parse_placement(placement);
      const auto params = load_params(params_path);
      const auto a = load_profile(profile_a, spec);
      const auto b = load_profile(profile_b, spec);
      const auto est = gce::estimate_pair(a, b, spec, where, params);
      emit(out_path, format == "json" ? dump(gce::report::to_json(est)) : gce::report::text(est));
      return kOk;
    }

    if (*audit) {
      check_format(format);
      const auto spec = resolve_gpu(gpu);
      const auto params = load_params(params_path);
      const auto a = load_profile(profile_a, spec);
      const auto b = load_profile(profile_b, spec);
      const auto r = gce::audit(a, b, spec, params);
      emit(out_path, format == "json" ? dump(gce::report::to_json(r)) : gce::report::text(r));
      return kOk;
    }

    if (*calibrate) {
      const auto spec = resolve_gpu(gpu);
      auto params = params_path.empty() ? gce::CalibrationParams{} : load_params(params_path);
      std::vector<gce::CalibrationPoint> points;
      if (table == "ref") {
        for (const auto& row : gce::load_reference_tables().table2_for(spec.name)) {
          points.push_back({2.0 * row.membw_util, row.slowdown});
        }
        params.gpus[spec.name] = gce::calibrate_from_reference(spec);
      } else {
        points = read_calibration_csv(table);
        params.gpus[spec.name].membw = gce::calibrate_piecewise(points);
      }
      if (points.size() < 3) throw gce::ValidationError("calibration needs at least 3 points for " + spec.name);
      std::cout << gce::report::text(spec.name, *params.gpus[spec.name].membw, points);
      if (!out_path.empty()) gce::write_json_file(out_path, gce::to_json(params));
      return kOk;
    }

    if (*reproduce) {
      check_format(format);
      const auto params = load_params(params_path);
      std::vector<std::string> targets;
      if (target == "all") {
        targets = gce::reproduce_targets();
      } else {
        const auto& known = gce::reproduce_targets();
        if (std::find(known.begin(), known.end(), target) == known.end()) {
          throw gce::ValidationError("unknown reproduce target '" + target + "'");
        }
        targets = {target};
      }
      bool pass = true;
      std::string csv;
      gce::json all = gce::json::array();
      for (const auto& t : targets) {
        const auto r = gce::reproduce(t, params);
        pass = pass && r.pass();
        if (format == "json") {
          all.push_back(gce::report::to_json(r));
        } else {
          std::cout << gce::report::text(r);
        }
        csv += targets.size() > 1 ? "# " + t + "\n" + r.csv : r.csv;
      }
      if (format == "json") std::cout << dump(targets.size() == 1 ? all[0] : all);
      if (!out_path.empty()) emit(out_path, csv);
      return pass ? kOk : kMismatch;
    }

    if (*plan) {
      check_format(format);
      const auto spec = resolve_gpu(gpu);
      const auto where = parse_placement(placement);
      const auto params = load_params(params_path);
      const auto p = gce::plan(read_workloads(workloads_path, spec), spec, where, params);
      if (out_path.empty()) {
        std::cout << (format == "json" ? dump(gce::report::to_json(p)) : gce::report::text(p));
      } else {
        emit(out_path, dump(gce::report::to_json(p)));
        std::cout << gce::report::text(p);
      }
      return kOk;
    }

    if (*reference) {
      if (format == "text") format = "json";
      if (format != "json" && format != "csv") throw gce::ValidationError("format must be 'json' or 'csv'");
      const auto& d = gce::load_reference_tables();
      emit(out_path, format == "json" ? dump(gce::to_json(d)) : reference_csv(d));
      return kOk;
    }
  } catch (const gce::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}
