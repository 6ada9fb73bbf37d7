// turbmix: command-line driver for the experiments.
//
//   turbmix <subcommand> [options]
//
// Every run writes report.json and data.csv into --out (default
// out/<subcommand>), plus energy_NN.csv / trajectory_NN.csv where relevant and
// frame_NNNN.pgm with --snapshots.  Exit status: 0 pass, 2 verdict failed,
// 1 error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "turbmix/experiments.hpp"

using namespace turbmix;
namespace fs = std::filesystem;

namespace {

struct Options {
  double alpha = 0.5;
  int q = 10;
  int depth = 0;
  int i_max = -1;  // < 0: per-experiment default
  int j_max = -1;
  std::string ladder = "-18:-10:2";
  std::vector<double> kappas;
  std::uint64_t seed = 1;
  std::string out;
  bool snapshots = false;
  std::size_t n = 0;  // particles; 0 selects the experiment default
  int periods = 4;
  double t_probe = 0.3;
  double beta = 0.5;
  double p = 4.0;
  double s = -1.0;
  double M = 1.0;
  std::vector<double> r0;
  std::vector<int> refine_q{8, 9, 10, 11};
  int levels = 12;
  std::string data = "theta0";
  int frame_stride = 16;
};

std::vector<double> parse_ladder(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(std::stod(item));
  if (parts.size() != 3) throw std::invalid_argument("--kappa-ladder expects lo:hi:step (log2 of kappa)");
  return kappa_ladder(parts[0], parts[1], parts[2]);
}

ScalarField make_data(const Options& o, int q) {
  if (o.data == "theta0") return theta0(q) - 0.5;
  if (o.data == "random") {
    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ScalarField f(q);
    for (double& v : f.values()) v = u(rng);
    return f;
  }
  if (o.data == "constant") return ScalarField(q, 1.0);
  throw std::invalid_argument("--data must be theta0, random or constant");
}

std::string numbered(const std::string& stem, std::size_t k, const char* ext, int width = 2) {
  std::ostringstream os;
  os << stem << '_' << std::setw(width) << std::setfill('0') << k << ext;
  return os.str();
}

FieldStudyConfig field_config(const Options& o) {
  FieldStudyConfig cfg;
  cfg.alpha = o.alpha;
  cfg.q = o.q;
  cfg.depth = o.depth;
  if (o.i_max >= 0) cfg.i_max = o.i_max;
  if (o.j_max >= 0) cfg.j_max = o.j_max;
  cfg.M = o.M;
  cfg.kappas = o.kappas.empty() ? parse_ladder(o.ladder) : o.kappas;
  cfg.t_probe = o.t_probe;
  cfg.beta = o.beta;
  cfg.p = o.p;
  cfg.regularity_s = o.s;
  return cfg;
}

/// Runs the kappa ladder, writing energy series and optional frames.
FieldStudy run_study(const Options& o, const fs::path& dir) {
  const FieldStudyConfig cfg = field_config(o);
  const ScalarField data = make_data(o, cfg.q);
  std::size_t frame = 0, record = 0;
  std::ofstream index;
  if (o.snapshots) {
    index.open(dir / "frames.csv");
    index << "frame,kappa,t\n";
  }
  double lo = 0.0, hi = 0.0;
  for (double v : data.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  FrameSink sink;
  if (o.snapshots) {
    sink = [&](double kappa, double t, const ScalarField& f) {
      if (record++ % static_cast<std::size_t>(o.frame_stride) != 0 && t != 1.0) return;
      write_pgm(dir / numbered("frame", frame, ".pgm", 4), f, lo, hi);
      index << frame << ',' << kappa << ',' << t << '\n';
      ++frame;
    };
  }
  FieldStudy s = field_study(cfg, data, sink);
  for (std::size_t k = 0; k < s.runs.size(); ++k) {
    std::ofstream e(dir / numbered("energy", k, ".csv"));
    write_energy_csv(e, s.runs[k].record);
    for (const std::string& w : s.runs[k].record.warnings) std::clog << "kappa " << s.runs[k].kappa << ": " << w << '\n';
  }
  return s;
}

TrajectorySink trajectory_writer(const fs::path& dir, std::ofstream& index) {
  index.open(dir / "trajectories.csv");
  index << "file,series\n";
  auto count = std::make_shared<std::size_t>(0);
  return [dir, count, &index](const std::string& tag, const TrajectoryStats& st) {
    const std::string name = numbered("trajectory", (*count)++, ".csv");
    std::ofstream os(dir / name);
    write_trajectory_csv(os, st);
    index << name << ",\"" << tag << "\"\n";
  };
}

ExperimentReport dispatch(const std::string& cmd, const Options& o, const fs::path& dir) {
  if (cmd == "dissipation") return run_dissipation(run_study(o, dir));
  if (cmd == "converge") return run_convergence(run_study(o, dir));
  if (cmd == "regularity") return run_regularity(run_study(o, dir));
  if (cmd == "intermittency") return run_intermittency(run_study(o, dir), o.refine_q);
  if (cmd == "enhancement") {
    EnhancementConfig cfg;
    cfg.alpha = o.alpha;
    cfg.q = o.q;
    cfg.depth = o.depth;
    if (o.i_max >= 0) cfg.i_max = o.i_max;
    if (o.j_max >= 0) cfg.j_max = o.j_max;
    cfg.kappas = o.kappas.empty() ? parse_ladder(o.ladder) : o.kappas;
    cfg.periods = o.periods;
    return run_enhancement(cfg, make_data(o, o.q));
  }
  if (cmd == "richardson") {
    ParticleStudyConfig cfg;
    cfg.alpha = o.alpha;
    if (o.i_max >= 0) cfg.i_max = o.i_max;
    if (o.j_max >= 0) cfg.j_max = o.j_max;
    if (o.depth > 0) cfg.depth = o.depth;
    if (!o.kappas.empty()) cfg.kappas = o.kappas;
    if (o.n > 0) cfg.n = o.n;
    cfg.seed = o.seed;
    std::ofstream index;
    return run_richardson(cfg, trajectory_writer(dir, index));
  }
  if (cmd == "pairs") {
    PairStudyConfig cfg;
    cfg.alpha = o.alpha;
    if (o.i_max >= 0) cfg.i_max = o.i_max;
    if (o.j_max >= 0) cfg.j_max = o.j_max;
    if (o.depth > 0) cfg.depth = o.depth;
    if (!o.kappas.empty()) cfg.kappa = o.kappas.front();
    if (!o.r0.empty()) cfg.r0_list = o.r0;
    if (o.n > 0) cfg.n = o.n;
    cfg.seed = o.seed;
    std::ofstream index;
    return run_pairs(cfg, trajectory_writer(dir, index));
  }
  if (cmd == "energy-jumps") return run_energy_jumps(o.alpha, make_data(o, o.q), o.levels, o.depth);
  if (cmd == "baseflow-norms") return run_baseflow_norms(o.alpha, o.q, o.depth);
  if (cmd == "selftest") return run_selftest(o.seed);
  throw std::invalid_argument("unknown subcommand " + cmd);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale mixing flow experiments on the 2-torus"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value file with any of the long options");
  Options o;
  app.add_option("--alpha", o.alpha, "Hoelder exponent of the flow")->check(CLI::Range(0.0, 1.0));
  app.add_option("--grid-exp", o.q, "grid is 2^q x 2^q")->check(CLI::Range(1, 14));
  app.add_option("--depth", o.depth, "mixer stages K (0: grid-maximal for field runs)");
  app.add_option("--imax", o.i_max, "deepest time block");
  app.add_option("--jmax", o.j_max, "deepest spatial level");
  app.add_option("--kappa-ladder", o.ladder, "lo:hi:step in log2 kappa, e.g. --kappa-ladder=-18:-10:2");
  app.add_option("--kappa", o.kappas, "explicit diffusivities (overrides the ladder)");
  app.add_option("--seed", o.seed, "random seed");
  app.add_option("--out", o.out, "output directory (default out/<subcommand>)");
  app.add_flag("--snapshots", o.snapshots, "write frame_####.pgm for field runs");
  app.add_option("--frame-stride", o.frame_stride, "record times between frames")->check(CLI::PositiveNumber);
  app.add_option("--particles", o.n, "particles (or pairs)");
  app.add_option("--periods", o.periods, "periods for enhancement");
  app.add_option("--t-probe", o.t_probe, "probe time for intermittency");
  app.add_option("--beta", o.beta, "smoothness of the intermittency norm");
  app.add_option("--norm-p", o.p, "integrability of the intermittency norm");
  app.add_option("--sobolev-s", o.s, "regularity order (negative: (1-alpha)^2 gamma)");
  app.add_option("--mixer-m", o.M, "mixer constant entering gamma");
  app.add_option("--r0", o.r0, "initial pair separations");
  app.add_option("--refine-q", o.refine_q, "grid exponents for the refinement check");
  app.add_option("--levels", o.levels, "levels scanned by energy-jumps");
  app.add_option("--data", o.data, "initial datum: theta0, random or constant");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"dissipation", "final L1/L2 norms over the kappa ladder"},
      {"enhancement", "per-period decay under periodic extension"},
      {"richardson", "single-particle variance Var(X_t)"},
      {"pairs", "pair dispersion envelope"},
      {"converge", "distance to the limiting solution"},
      {"regularity", "L2_t H^s and L2_t H^1 norms"},
      {"intermittency", "H^{beta,p} growth at t_probe"},
      {"energy-jumps", "energy discontinuities of the limiting solution"},
      {"baseflow-norms", "DiscreteTV scaling of the base flow"},
      {"selftest", "fast structural checks"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    const fs::path dir = o.out.empty() ? fs::path("out") / cmd : fs::path(o.out);
    fs::create_directories(dir);
    ExperimentReport rep = dispatch(cmd, o, dir);
    rep.config["command"] = cmd;
    rep.write(dir);
    for (const Check& c : rep.checks) {
      std::printf("%-4s %s: %.6g %s %.6g", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value, c.relation.c_str(), c.bound);
      if (c.relation == "within") std::printf(" +- %.3g", c.tolerance);
      std::printf("\n");
    }
    std::printf("%s %s (%.1f s) -> %s\n", rep.pass() ? "PASS" : "FAIL", cmd.c_str(), rep.runtime_s, dir.string().c_str());
    return rep.pass() ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "turbmix: " << e.what() << '\n';
    return 1;
  }
}
