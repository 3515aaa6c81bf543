// ovt: generate, decompose, and diagnose overcomplete fourth-order tensor
// instances. Subcommands: gen, decompose, kappa, bench, selftest.
// Exit codes: 0 success, 1 usage or selftest failure, 2 validation or i/o
// failure, 3 condition failure (instance outside the working regime).

#include <ovt/decompose.hpp>
#include <ovt/instances.hpp>
#include <ovt/io.hpp>
#include <ovt/selftest.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ovt;

constexpr const char* kToolVersion = "1.0.0";

int resolve_cli_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* raw = std::getenv("OVT_THREADS")) {
    const int v = std::atoi(raw);
    if (v > 0) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

Ensemble parse_ensemble(const std::string& name) {
  Ensemble ens;
  if (name == "spherical")
    ens.kind = EnsembleKind::Spherical;
  else if (name == "sparse")
    ens.kind = EnsembleKind::Sparse;
  else if (name == "hypercube")
    ens.kind = EnsembleKind::Hypercube;
  else if (name == "spiked")
    ens.kind = EnsembleKind::Spiked;
  else
    throw IoError("unknown ensemble: " + name);
  return ens;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string());
  os << content;
  if (!os) throw IoError("write failed for " + path.string());
}

void write_manifest(const fs::path& dir, const json& manifest) {
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

json manifest_base(const std::string& command, std::uint64_t seed) {
  return json{{"command", command},
              {"seed", seed},
              {"versions", {{"ovt", kToolVersion}, {"tensor_format", 1}}}};
}

json json_finite(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenConfig {
  std::string ensemble = "spherical";
  std::int64_t d = 0;
  std::int64_t n = 0;
  std::uint64_t seed = 0;
  std::string noise = "spectral";
  double eta = 0.0;
  double spike_lambda = 0.0;
  double sparsity = 0.25;
  std::string out = ".";
};

int run_gen(const GenConfig& cfg) {
  if (cfg.d < 2) {
    std::cerr << "error: d must be >= 2\n";
    return 2;
  }
  if (cfg.n < 1) {
    std::cerr << "error: n must be >= 1\n";
    return 2;
  }
  if (cfg.eta < 0.0) {
    std::cerr << "error: eta must be nonnegative\n";
    return 2;
  }
  Ensemble ens = parse_ensemble(cfg.ensemble);
  ens.spike_lambda = cfg.spike_lambda;
  ens.sparsity_fraction = cfg.sparsity;

  const Matrix comps = gen_components(ens, cfg.d, cfg.n, cfg.seed);
  const SymTensor4 clean = build_tensor(comps);
  SymTensor4 out_tensor = clean;
  double measured_noise = 0.0;
  if (cfg.eta > 0.0) {
    NoiseModel model;
    if (cfg.noise == "spectral") {
      model.kind = NoiseKind::SpectralBounded;
      model.eta = cfg.eta;
    } else if (cfg.noise == "dictionary") {
      model.kind = NoiseKind::DictionarySplit;
      model.eps1 = cfg.eta / 2.0;
      model.eps2 = cfg.eta / 2.0;
    } else {
      std::cerr << "error: noise must be spectral or dictionary\n";
      return 2;
    }
    out_tensor = add_noise(clean, model, Rng::derive(cfg.seed, 0xe7a1ull));
    measured_noise =
        spectral_norm_sym(out_tensor.square_reshape() - clean.square_reshape());
  }

  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  write_tensor4((dir / "tensor.tnsr").string(), out_tensor);
  write_components_csv((dir / "truth.csv").string(), comps);

  json manifest = manifest_base("gen", cfg.seed);
  manifest["ensemble"] = cfg.ensemble;
  manifest["d"] = cfg.d;
  manifest["n"] = cfg.n;
  manifest["noise"] = json{{"kind", cfg.eta > 0.0 ? cfg.noise : "none"},
                           {"eta", cfg.eta},
                           {"measured_reshaping_norm", measured_noise}};
  manifest["files"] = json{{"tensor", "tensor.tnsr"}, {"truth", "truth.csv"}};
  write_manifest(dir, manifest);
  std::cout << "wrote " << (dir / "tensor.tnsr").string() << " (d=" << cfg.d
            << ", n=" << cfg.n << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// decompose
// ---------------------------------------------------------------------------

struct DecomposeConfig {
  std::string in;
  std::int64_t n = 0;
  double eps = 0.0;
  double beta = 0.25;
  double delta = 0.1;
  double sigma_floor = 0.0;
  double kappa_floor = 0.0;
  std::uint64_t seed = 0;
  std::int64_t reps = -1;
  std::string truth;
  std::string out = ".";
  int threads = 0;
};

json report_to_json(const RecoveryReport& rep, const DecomposeConfig& cfg) {
  json out;
  out["recovered_count"] = rep.recovered.size();
  out["covered_fraction"] = rep.covered_fraction;
  out["signed_hausdorff"] = json_finite(rep.signed_hausdorff);
  out["scored"] = rep.scored;
  out["per_vector_best_corr"] = rep.per_vector_best_corr;
  out["condition"] = json{{"sigma_n", rep.condition.sigma_n},
                          {"mu", rep.condition.mu},
                          {"kappa", rep.condition.kappa},
                          {"degenerate", rep.condition.degenerate}};
  out["lift_diagnostics"] = json{{"sigma_n", rep.lift.sigma_n},
                                 {"lifted_lambda_n", rep.lift.lifted_lambda_n},
                                 {"lifted_lambda_next", rep.lift.lifted_lambda_next}};
  out["timings"] = json{{"lift_seconds", rep.timings.lift_seconds},
                        {"round_seconds", rep.timings.round_seconds},
                        {"report_seconds", rep.timings.report_seconds}};
  out["parameters"] = json{{"n", cfg.n},           {"epsilon", cfg.eps},
                           {"beta", cfg.beta},     {"delta", cfg.delta},
                           {"sigma_floor", cfg.sigma_floor},
                           {"kappa_floor", cfg.kappa_floor},
                           {"seed", cfg.seed},     {"repetitions", cfg.reps}};
  return out;
}

int run_decompose(const DecomposeConfig& cfg) {
  const fs::path dir(cfg.out);
  fs::create_directories(dir);

  const SymTensor4 t = read_tensor4(cfg.in);
  Matrix truth;
  const bool have_truth = !cfg.truth.empty();
  if (have_truth) truth = read_components_csv(cfg.truth);

  DecomposeParams params;
  params.n = cfg.n;
  params.epsilon = cfg.eps;
  params.beta = cfg.beta;
  params.delta = cfg.delta;
  params.sigma_floor = cfg.sigma_floor;
  params.kappa_floor = cfg.kappa_floor;
  params.seed = cfg.seed;
  params.repetitions = cfg.reps;
  params.threads = resolve_cli_threads(cfg.threads);

  json manifest = manifest_base("decompose", cfg.seed);
  manifest["input"] = cfg.in;
  manifest["truth"] = have_truth ? json(cfg.truth) : json(nullptr);
  manifest["d"] = t.d();
  manifest["parameters"] = json{{"n", cfg.n},           {"epsilon", cfg.eps},
                                {"beta", cfg.beta},     {"delta", cfg.delta},
                                {"sigma_floor", cfg.sigma_floor},
                                {"kappa_floor", cfg.kappa_floor},
                                {"repetitions", cfg.reps}};

  RecoveryReport rep;
  try {
    rep = decompose(t, params, have_truth ? &truth : nullptr);
  } catch (const ConditionFailure& e) {
    manifest["condition_failure"] = json{{"stage", e.stage},
                                         {"message", e.what()},
                                         {"measured", e.measured},
                                         {"floor", e.floor}};
    write_manifest(dir, manifest);
    throw;
  }

  Matrix recovered(t.d(), static_cast<Index>(rep.recovered.size()));
  for (Index i = 0; i < recovered.cols(); ++i)
    recovered.col(i) = rep.recovered[static_cast<std::size_t>(i)];
  write_components_csv((dir / "recovered.csv").string(), recovered);
  write_text_file(dir / "report.json", report_to_json(rep, cfg).dump(2) + "\n");
  manifest["files"] = json{{"recovered", "recovered.csv"}, {"report", "report.json"}};
  write_manifest(dir, manifest);

  std::cout << "recovered " << rep.recovered.size() << " vectors";
  if (rep.scored)
    std::cout << ", covered_fraction " << detail::f64_to_string(rep.covered_fraction);
  std::cout << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// kappa
// ---------------------------------------------------------------------------

struct KappaConfig {
  std::string ensemble = "spherical";
  std::vector<std::int64_t> d_list;
  std::vector<double> nratio_list;
  std::int64_t trials = 10;
  std::uint64_t seed = 0;
  std::string out = ".";
  bool plot = false;
  int threads = 0;
};

struct KappaRow {
  Index d = 0;
  Index n = 0;
  double ratio = 0.0;
  Index trial = 0;
  double kappa_value = 0.0;
};

std::string kappa_plot_svg(const std::vector<std::int64_t>& d_list,
                           const std::vector<double>& ratios,
                           const std::vector<std::vector<double>>& means) {
  const double width = 640, height = 420;
  const double x0 = 70, x1 = width - 30, y0 = height - 50, y1 = 30;
  double peak = 1e-9;
  for (const auto& row : means)
    for (double m : row) peak = std::max(peak, m);
  const double rmin = *std::min_element(ratios.begin(), ratios.end());
  const double rmax = *std::max_element(ratios.begin(), ratios.end());
  const double rspan = std::max(rmax - rmin, 1e-9);
  auto px = [&](double r) { return x0 + (r - rmin) / rspan * (x1 - x0); };
  auto py = [&](double k) { return y0 - k / peak * (y0 - y1); };
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\""
      << y0 << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\""
      << y1 << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"14\">n / d^2</text>\n";
  svg << "<text x=\"18\" y=\"" << (y0 + y1) / 2
      << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 18 "
      << (y0 + y1) / 2 << ")\">mean kappa</text>\n";
  for (double r : ratios)
    svg << "<text x=\"" << px(r) << "\" y=\"" << y0 + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << detail::f64_to_string(r)
        << "</text>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double k = peak * tick / 4.0;
    svg << "<text x=\"" << x0 - 8 << "\" y=\"" << py(k) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">"
        << detail::f64_to_string(std::round(k * 1000.0) / 1000.0) << "</text>\n";
  }
  for (std::size_t di = 0; di < d_list.size(); ++di) {
    const char* color = palette[di % 5];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t ri = 0; ri < ratios.size(); ++ri)
      svg << px(ratios[ri]) << "," << py(means[di][ri]) << " ";
    svg << "\"/>\n";
    svg << "<text x=\"" << x1 - 8 << "\" y=\"" << y1 + 16 + 16 * static_cast<double>(di)
        << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << color << "\">d = "
        << d_list[di] << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

int run_kappa(const KappaConfig& cfg) {
  if (cfg.d_list.empty() || cfg.nratio_list.empty()) {
    std::cerr << "error: d-list and nratio-list must be nonempty\n";
    return 2;
  }
  if (cfg.trials < 1) {
    std::cerr << "error: trials must be >= 1\n";
    return 2;
  }
  for (std::int64_t d : cfg.d_list)
    if (d < 2) {
      std::cerr << "error: d must be >= 2\n";
      return 2;
    }
  for (double r : cfg.nratio_list)
    if (!(r > 0.0 && r <= 1.0)) {
      std::cerr << "error: nratio values must lie in (0, 1]\n";
      return 2;
    }
  const Ensemble ens = parse_ensemble(cfg.ensemble);

  std::vector<KappaRow> rows;
  for (std::size_t di = 0; di < cfg.d_list.size(); ++di) {
    const Index d = cfg.d_list[di];
    for (std::size_t ri = 0; ri < cfg.nratio_list.size(); ++ri) {
      const double ratio = cfg.nratio_list[ri];
      const Index n = std::clamp<Index>(
          static_cast<Index>(std::lround(ratio * static_cast<double>(d * d))), 1, d * d);
      for (Index trial = 0; trial < cfg.trials; ++trial) {
        KappaRow row;
        row.d = d;
        row.n = n;
        row.ratio = ratio;
        row.trial = trial;
        rows.push_back(row);
      }
    }
  }

  // Trials are independent; each derives its own stream, so any thread count
  // produces the same table.
  auto run_row = [&](KappaRow& row) {
    const std::uint64_t stream = (static_cast<std::uint64_t>(row.d) << 40) ^
                                 (static_cast<std::uint64_t>(row.n) << 20) ^
                                 static_cast<std::uint64_t>(row.trial);
    const Matrix comps = gen_components(ens, row.d, row.n, Rng::derive(cfg.seed, stream));
    row.kappa_value = kappa(comps);
  };
  const int threads = std::min<int>(resolve_cli_threads(cfg.threads),
                                    static_cast<int>(rows.size()));
  if (threads > 1) {
    std::vector<std::thread> pool;
    const std::size_t chunk = (rows.size() + threads - 1) / threads;
    for (int w = 0; w < threads; ++w) {
      const std::size_t lo = w * chunk, hi = std::min(rows.size(), lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, lo, hi] {
        for (std::size_t i = lo; i < hi; ++i) run_row(rows[i]);
      });
    }
    for (auto& th : pool) th.join();
  } else {
    for (auto& row : rows) run_row(row);
  }

  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << "ensemble,d,n,nratio,trial,kappa\n";
  for (const KappaRow& row : rows)
    csv << cfg.ensemble << ',' << row.d << ',' << row.n << ','
        << detail::f64_to_string(row.ratio) << ',' << row.trial << ','
        << detail::f64_to_string(row.kappa_value) << '\n';
  write_text_file(dir / "kappa.csv", csv.str());

  // Per-cell means, both for the manifest and the optional plot.
  std::vector<std::vector<double>> means(cfg.d_list.size(),
                                         std::vector<double>(cfg.nratio_list.size(), 0.0));
  json summary = json::array();
  for (std::size_t di = 0; di < cfg.d_list.size(); ++di)
    for (std::size_t ri = 0; ri < cfg.nratio_list.size(); ++ri) {
      double sum = 0.0;
      Index n = 0;
      for (const KappaRow& row : rows)
        if (row.d == cfg.d_list[di] && row.ratio == cfg.nratio_list[ri]) {
          sum += row.kappa_value;
          n = row.n;
        }
      means[di][ri] = sum / static_cast<double>(cfg.trials);
      summary.push_back(json{{"d", cfg.d_list[di]},
                             {"n", n},
                             {"nratio", cfg.nratio_list[ri]},
                             {"mean_kappa", means[di][ri]}});
    }
  if (cfg.plot)
    write_text_file(dir / "plot.svg",
                    kappa_plot_svg(cfg.d_list, cfg.nratio_list, means));

  json manifest = manifest_base("kappa", cfg.seed);
  manifest["ensemble"] = cfg.ensemble;
  manifest["d_list"] = cfg.d_list;
  manifest["nratio_list"] = cfg.nratio_list;
  manifest["trials"] = cfg.trials;
  manifest["summary"] = summary;
  manifest["files"] = cfg.plot ? json{{"table", "kappa.csv"}, {"plot", "plot.svg"}}
                               : json{{"table", "kappa.csv"}};
  write_manifest(dir, manifest);
  std::cout << "wrote " << rows.size() << " kappa rows to "
            << (dir / "kappa.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchConfig {
  std::vector<std::int64_t> d_list = {8, 12, 16};
  std::string n_rule = "quarter";
  std::int64_t reps = 24;
  std::uint64_t seed = 0;
  std::string out = ".";
  int threads = 0;
};

int run_bench(const BenchConfig& cfg) {
  if (cfg.d_list.empty()) {
    std::cerr << "error: d-list must be nonempty\n";
    return 2;
  }
  for (std::int64_t d : cfg.d_list)
    if (d < 2) {
      std::cerr << "error: d must be >= 2\n";
      return 2;
    }
  if (cfg.reps < 0) {
    std::cerr << "error: reps must be >= 0\n";
    return 2;
  }
  auto n_for = [&](Index d) -> Index {
    if (cfg.n_rule == "quarter") return std::max<Index>(1, d * d / 4);
    if (cfg.n_rule == "half") return std::max<Index>(1, d * d / 2);
    if (cfg.n_rule == "linear") return std::min<Index>(2 * d, d * d);
    throw IoError("unknown n-rule: " + cfg.n_rule);
  };

  struct BenchRow {
    Index d = 0, n = 0;
    double lift_seconds = 0.0, round_seconds = 0.0;
    std::size_t recovered = 0;
  };
  std::vector<BenchRow> rows;
  for (std::int64_t d : cfg.d_list) {
    BenchRow row;
    row.d = d;
    row.n = n_for(d);
    const Matrix comps = gen_components(
        Ensemble{}, row.d, row.n, Rng::derive(cfg.seed, static_cast<std::uint64_t>(d)));
    const SymTensor4 t = build_tensor(comps);

    using Clock = std::chrono::steady_clock;
    EigOptions eig;
    eig.seed = Rng::derive(cfg.seed, 0x11f7ull);
    const auto lift_start = Clock::now();
    const LiftOutput lo = lift(t, row.n, 0.0, 0.0, eig);
    row.lift_seconds = std::chrono::duration<double>(Clock::now() - lift_start).count();

    RoundParams rp;
    rp.repetitions = cfg.reps;
    rp.seed = Rng::derive(cfg.seed, 0x4064ull);
    rp.threads = resolve_cli_threads(cfg.threads);
    const FactoredMatrix w = FactoredMatrix::from_eig(lo.whitener, -0.5);
    const auto round_start = Clock::now();
    const auto recovered = round_all(lo.lifted, lo.pi3_basis, w, rp);
    row.round_seconds = std::chrono::duration<double>(Clock::now() - round_start).count();
    row.recovered = recovered.size();
    rows.push_back(row);
    std::cout << "d=" << row.d << " n=" << row.n << " lift "
              << detail::f64_to_string(row.lift_seconds) << "s round "
              << detail::f64_to_string(row.round_seconds) << "s\n";
  }

  // Least-squares log-log slope of time against d.
  auto slope_of = [&](auto&& time_of) {
    const double m = static_cast<double>(rows.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const BenchRow& row : rows) {
      const double x = std::log(static_cast<double>(row.d));
      const double y = std::log(std::max(time_of(row), 1e-9));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double denom = m * sxx - sx * sx;
    return denom > 0 ? (m * sxy - sx * sy) / denom : 0.0;
  };
  const double slope_lift = slope_of([](const BenchRow& r) { return r.lift_seconds; });
  const double slope_total =
      slope_of([](const BenchRow& r) { return r.lift_seconds + r.round_seconds; });

  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << "d,n,repetitions,lift_seconds,round_seconds,total_seconds,recovered\n";
  for (const BenchRow& row : rows)
    csv << row.d << ',' << row.n << ',' << cfg.reps << ','
        << detail::f64_to_string(row.lift_seconds) << ','
        << detail::f64_to_string(row.round_seconds) << ','
        << detail::f64_to_string(row.lift_seconds + row.round_seconds) << ','
        << row.recovered << '\n';
  write_text_file(dir / "bench.csv", csv.str());

  json manifest = manifest_base("bench", cfg.seed);
  manifest["d_list"] = cfg.d_list;
  manifest["n_rule"] = cfg.n_rule;
  manifest["repetitions"] = cfg.reps;
  manifest["loglog_slope"] = json{{"lift", slope_lift}, {"lift_plus_round", slope_total}};
  manifest["files"] = json{{"table", "bench.csv"}};
  write_manifest(dir, manifest);
  std::cout << "log-log slope, lift " << detail::f64_to_string(slope_lift)
            << ", lift+round " << detail::f64_to_string(slope_total) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

int run_selftest_cmd(bool inject_fault) {
  if (inject_fault) g_sym_fault.store(true);
  const std::vector<SelftestResult> results = run_selftest();
  std::size_t passed = 0;
  for (const SelftestResult& row : results) {
    std::cout << (row.passed ? "PASS" : "FAIL") << "  " << row.name << "  ("
              << detail::f64_to_string(std::round(row.seconds * 1000.0) / 1000.0)
              << "s)\n";
    if (!row.passed) std::cout << "      " << row.detail << "\n";
    passed += row.passed ? 1 : 0;
  }
  std::cout << passed << " of " << results.size() << " checks passed\n";
  return passed == results.size() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral decomposition of overcomplete fourth-order tensors"};
  app.require_subcommand(1);

  GenConfig gen_cfg;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic instance");
  gen_cmd->add_option("--ensemble", gen_cfg.ensemble, "spherical|sparse|hypercube|spiked")
      ->check(CLI::IsMember({"spherical", "sparse", "hypercube", "spiked"}));
  gen_cmd->add_option("--d", gen_cfg.d, "ambient dimension")->required();
  gen_cmd->add_option("--n", gen_cfg.n, "component count")->required();
  gen_cmd->add_option("--seed", gen_cfg.seed, "generator seed");
  gen_cmd->add_option("--noise", gen_cfg.noise, "spectral|dictionary")
      ->check(CLI::IsMember({"spectral", "dictionary"}));
  gen_cmd->add_option("--eta", gen_cfg.eta, "noise level (0 = clean)");
  gen_cmd->add_option("--spike-lambda", gen_cfg.spike_lambda,
                      "spiked covariance strength (<= 0 uses d/2)");
  gen_cmd->add_option("--sparsity", gen_cfg.sparsity, "sparse support fraction");
  gen_cmd->add_option("--out", gen_cfg.out, "output directory");

  DecomposeConfig dec_cfg;
  CLI::App* dec_cmd = app.add_subcommand("decompose", "run the full pipeline on a tensor file");
  dec_cmd->add_option("--in", dec_cfg.in, "input tensor.tnsr")->required();
  dec_cmd->add_option("--n", dec_cfg.n, "component count")->required();
  dec_cmd->add_option("--eps", dec_cfg.eps, "assumed noise scale");
  dec_cmd->add_option("--beta", dec_cfg.beta, "spectral-gap acceptance parameter");
  dec_cmd->add_option("--delta", dec_cfg.delta, "tolerated missing fraction");
  dec_cmd->add_option("--sigma-floor", dec_cfg.sigma_floor, "reshaping eigenvalue gate");
  dec_cmd->add_option("--kappa-floor", dec_cfg.kappa_floor, "lifted eigengap gate");
  dec_cmd->add_option("--seed", dec_cfg.seed, "rounding seed");
  dec_cmd->add_option("--reps", dec_cfg.reps, "repetition override (< 0 = derive)");
  dec_cmd->add_option("--truth", dec_cfg.truth, "ground-truth components CSV");
  dec_cmd->add_option("--out", dec_cfg.out, "output directory");
  dec_cmd->add_option("--threads", dec_cfg.threads, "worker threads (0 = auto)");

  KappaConfig kap_cfg;
  CLI::App* kap_cmd = app.add_subcommand("kappa", "sweep the condition number");
  kap_cmd->add_option("--ensemble", kap_cfg.ensemble, "spherical|sparse|hypercube|spiked")
      ->check(CLI::IsMember({"spherical", "sparse", "hypercube", "spiked"}));
  kap_cmd->add_option("--d-list", kap_cfg.d_list, "dimensions")->delimiter(',')->required();
  kap_cmd->add_option("--nratio-list", kap_cfg.nratio_list, "overcompleteness ratios n/d^2")
      ->delimiter(',')
      ->required();
  kap_cmd->add_option("--trials", kap_cfg.trials, "trials per cell");
  kap_cmd->add_option("--seed", kap_cfg.seed, "base seed");
  kap_cmd->add_option("--out", kap_cfg.out, "output directory");
  kap_cmd->add_flag("--plot", kap_cfg.plot, "also emit plot.svg");
  kap_cmd->add_option("--threads", kap_cfg.threads, "worker threads (0 = auto)");

  BenchConfig bench_cfg;
  CLI::App* bench_cmd = app.add_subcommand("bench", "time the pipeline stages");
  bench_cmd->add_option("--d-list", bench_cfg.d_list, "dimensions")->delimiter(',');
  bench_cmd->add_option("--n-rule", bench_cfg.n_rule, "quarter|half|linear")
      ->check(CLI::IsMember({"quarter", "half", "linear"}));
  bench_cmd->add_option("--reps", bench_cfg.reps, "rounding repetitions per size");
  bench_cmd->add_option("--seed", bench_cfg.seed, "base seed");
  bench_cmd->add_option("--out", bench_cfg.out, "output directory");
  bench_cmd->add_option("--threads", bench_cfg.threads, "worker threads (0 = auto)");

  bool inject_fault = false;
  CLI::App* self_cmd = app.add_subcommand("selftest", "run the invariant suite");
  self_cmd->add_flag("--inject-fault", inject_fault,
                     "plant a symmetrizer fault to prove the suite catches it");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen_cfg);
    if (dec_cmd->parsed()) return run_decompose(dec_cfg);
    if (kap_cmd->parsed()) return run_kappa(kap_cfg);
    if (bench_cmd->parsed()) return run_bench(bench_cfg);
    if (self_cmd->parsed()) return run_selftest_cmd(inject_fault);
  } catch (const ConditionFailure& e) {
    std::cerr << "condition failure [" << e.stage << "]: " << e.what() << " (measured "
              << detail::f64_to_string(e.measured) << ", floor "
              << detail::f64_to_string(e.floor) << ")\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
