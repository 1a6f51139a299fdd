#include "cliquesynth/cli.hpp"

#include <fstream>
#include <ostream>

#include <CLI11.hpp>

#include "cliquesynth/analysis.hpp"
#include "cliquesynth/benchmark.hpp"
#include "cliquesynth/io.hpp"
#include "cliquesynth/synthesis.hpp"

namespace cliquesynth {

namespace {

using nlohmann::json;

struct Tolerances {
  double epsilon_rel = 1e-7;
  double eta_min = 1e-6;
  double rcond_min = 1e-12;
  double pattern_tol = 1e-8;
  double solver_tol = 1e-8;
  double gamma_rel_tol = 1e-3;
  double norm_tol = 1e-4;
  int sweep_points = 10000;

  void add_to(CLI::App* app) {
    app->add_option("--epsilon-rel", epsilon_rel, "LMI margin relative to 1 + max|A|")
        ->capture_default_str();
    app->add_option("--eta-min", eta_min)->capture_default_str();
    app->add_option("--rcond-min", rcond_min)->capture_default_str();
    app->add_option("--pattern-tol", pattern_tol)->capture_default_str();
    app->add_option("--solver-tol", solver_tol)->capture_default_str();
    app->add_option("--gamma-rel-tol", gamma_rel_tol)->capture_default_str();
    app->add_option("--norm-tol", norm_tol, "relative bisection width")
        ->capture_default_str();
    app->add_option("--sweep-points", sweep_points)->capture_default_str();
  }

  SynthesisNumerics numerics() const {
    SynthesisNumerics n;
    n.epsilon_rel = epsilon_rel;
    n.eta_min = eta_min;
    n.rcond_min = rcond_min;
    n.pattern_tol = pattern_tol;
    n.solver.tolerance = solver_tol;
    return n;
  }

  CertificationOptions certification() const {
    CertificationOptions c;
    c.pattern_tol = pattern_tol;
    c.gamma_rel_tol = gamma_rel_tol;
    c.sweep_points = sweep_points;
    c.norm.tol_rel = norm_tol;
    c.norm.solver.tolerance = solver_tol;
    return c;
  }
};

SparsityPattern pattern_for(const Instance& inst, const std::string& method) {
  if (method == "centralized") return SparsityPattern::dense(inst.graph.node_count());
  return SparsityPattern::from_graph(inst.graph);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Graph-sparse state-feedback synthesis and certification"};
  app.require_subcommand(1);
  Tolerances tol;

  // gen
  ExperimentConfig gen_cfg;
  std::string gen_out;
  std::string gen_disc = "zoh";
  CLI::App* gen = app.add_subcommand("gen", "generate a random disk-graph instance");
  gen->add_option("--n", gen_cfg.agents, "number of agents")->capture_default_str();
  gen->add_option("--block", gen_cfg.block_size, "state size per agent")
      ->capture_default_str();
  gen->add_option("--radius", gen_cfg.radius)->capture_default_str();
  gen->add_option("--T", gen_cfg.sample_time, "sampling period")->capture_default_str();
  gen->add_option("--seed", gen_cfg.seed)->capture_default_str();
  gen->add_option("--discretization", gen_disc)
      ->check(CLI::IsMember({"zoh", "euler"}))
      ->capture_default_str();
  gen->add_option("--out", gen_out)->required();

  // synth
  std::string synth_in, synth_out, synth_method, synth_objective = "hinf";
  std::string synth_form = "reduced";
  std::optional<double> synth_gamma;
  bool synth_no_certify = false;
  CLI::App* synth = app.add_subcommand("synth", "synthesize a structured gain");
  synth->add_option("--in", synth_in)->required();
  synth->add_option("--method", synth_method)
      ->required()
      ->check(CLI::IsMember({"diag", "ext", "clique", "clique-ext", "centralized"}));
  synth->add_option("--objective", synth_objective)
      ->check(CLI::IsMember({"stabilize", "hinf"}))
      ->capture_default_str();
  synth->add_option("--gamma", synth_gamma, "fixed H-infinity level (feasibility)");
  synth->add_option("--formulation", synth_form)
      ->check(CLI::IsMember({"reduced", "literal"}))
      ->capture_default_str();
  synth->add_flag("--no-certify", synth_no_certify);
  synth->add_option("--out", synth_out)->required();
  tol.add_to(synth);

  // verify
  std::string verify_in, verify_gain;
  CLI::App* verify = app.add_subcommand("verify", "re-certify a stored gain");
  verify->add_option("--in", verify_in)->required();
  verify->add_option("--gain", verify_gain)->required();
  tol.add_to(verify);

  // norm
  std::string norm_in, norm_gain, norm_method = "bisect";
  bool norm_no_feedthrough = false;
  CLI::App* norm = app.add_subcommand("norm", "closed-loop H-infinity norm");
  norm->add_option("--in", norm_in)->required();
  norm->add_option("--gain", norm_gain)->required();
  norm->add_option("--method", norm_method)
      ->check(CLI::IsMember({"bisect", "sweep"}))
      ->capture_default_str();
  norm->add_flag("--no-feedthrough", norm_no_feedthrough, "drop the D K term");
  tol.add_to(norm);

  // bench
  ExperimentConfig bench_cfg;
  std::string bench_out, bench_plot, bench_disc = "zoh";
  bool bench_no_timing = false;
  CLI::App* bench = app.add_subcommand("bench", "run the randomized comparison");
  bench->add_option("--samples", bench_cfg.samples)->capture_default_str();
  bench->add_option("--seed", bench_cfg.seed)->capture_default_str();
  bench->add_option("--n", bench_cfg.agents)->capture_default_str();
  bench->add_option("--radius", bench_cfg.radius)->capture_default_str();
  bench->add_option("--T", bench_cfg.sample_time)->capture_default_str();
  bench->add_option("--discretization", bench_disc)
      ->check(CLI::IsMember({"zoh", "euler"}))
      ->capture_default_str();
  bench->add_option("--workers", bench_cfg.workers)->capture_default_str();
  bench->add_flag("--no-timing", bench_no_timing, "write zero times for reproducible CSV");
  bench->add_option("--plot-data", bench_plot, "ratio table for plotting");
  bench->add_option("--out", bench_out)->required();
  tol.add_to(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitMalformed;
  }

  try {
    if (*gen) {
      gen_cfg.discretization = parse_discretization(gen_disc);
      const Instance inst = generate_instance(gen_cfg, gen_cfg.seed);
      write_json_file(gen_out, instance_to_json(inst));
      out << "wrote " << gen_out << " (" << inst.graph.edge_count() << " edges)\n";
      return kExitOk;
    }

    if (*synth) {
      const Instance inst = instance_from_json(read_json_file(synth_in));
      SynthesisProblem pb;
      pb.plant = inst.plant;
      pb.structure = inst.structure;
      pb.method.family = parse_family(synth_method);
      pb.graph = pb.method.family == Family::kCentralized
                     ? Graph::complete(inst.graph.node_count())
                     : inst.graph;
      pb.cover = maximal_cliques(pb.graph);
      pb.method.objective = parse_objective(synth_objective);
      if (synth_gamma) {
        if (pb.method.objective != Objective::kHinfMinimize) {
          throw InputError("--gamma requires --objective hinf");
        }
        pb.method.objective = Objective::kHinfFeasible;
        pb.method.gamma = *synth_gamma;
      }
      pb.numerics = tol.numerics();
      pb.numerics.formulation = parse_formulation(synth_form);
      try {
        pb.validate();
      } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
      }

      const SynthesisResult res = synthesize(pb);
      std::optional<Certification> cert;
      if (res.feasible() && !synth_no_certify) {
        cert = certify_controller(pb.plant, res.K, pb.structure, pb.pattern(),
                                  res.gamma, tol.certification());
      }
      write_json_file(synth_out, result_to_json(res, cert));
      out << "status " << to_string(res.status);
      if (res.gamma) out << ", gamma " << *res.gamma;
      out << '\n';
      if (!res.feasible()) {
        err << res.stats.message << '\n';
        return kExitInfeasible;
      }
      if (cert && !cert->passed()) {
        err << "certification failed: " << cert->failure << '\n';
        return kExitCertification;
      }
      return kExitOk;
    }

    if (*verify) {
      const Instance inst = instance_from_json(read_json_file(verify_in));
      const GainFile g = gain_from_json(read_json_file(verify_gain));
      if (g.K.rows() != inst.structure.m() || g.K.cols() != inst.structure.n()) {
        throw InputError("gain shape does not match the instance");
      }
      const Certification cert =
          certify_controller(inst.plant, g.K, inst.structure,
                             pattern_for(inst, g.method), g.gamma, tol.certification());
      out << certification_to_json(cert).dump(2) << '\n';
      if (!cert.passed()) {
        err << "certification failed: " << cert.failure << '\n';
        return kExitCertification;
      }
      return kExitOk;
    }

    if (*norm) {
      const Instance inst = instance_from_json(read_json_file(norm_in));
      const GainFile g = gain_from_json(read_json_file(norm_gain));
      if (!inst.plant.has_hinf_channels()) {
        throw InputError("instance has no disturbance/performance channels");
      }
      if (g.K.rows() != inst.structure.m() || g.K.cols() != inst.structure.n()) {
        throw InputError("gain shape does not match the instance");
      }
      const ClosedLoop loop = close_loop(inst.plant, g.K, !norm_no_feedthrough);
      json report = {{"method", norm_method}};
      try {
        if (norm_method == "sweep") {
          report["hinf"] = hinf_norm_sweep(loop, tol.sweep_points);
        } else {
          NormOptions no;
          no.tol_rel = tol.norm_tol;
          no.solver.tolerance = tol.solver_tol;
          const BisectionResult b = hinf_norm_bisection(loop, no);
          report["hinf"] = b.upper;
          report["lower"] = b.lower;
          report["iterations"] = b.iterations;
          report["converged"] = b.converged;
        }
      } catch (const NotSchurError& e) {
        err << e.what() << '\n';
        return kExitCertification;
      }
      out << report.dump(2) << '\n';
      return kExitOk;
    }

    if (*bench) {
      bench_cfg.discretization = parse_discretization(bench_disc);
      bench_cfg.record_timing = !bench_no_timing;
      bench_cfg.numerics = tol.numerics();
      const CertificationOptions c = tol.certification();
      bench_cfg.certification.pattern_tol = c.pattern_tol;
      bench_cfg.certification.gamma_rel_tol = c.gamma_rel_tol;
      bench_cfg.certification.sweep_points = c.sweep_points;
      bench_cfg.certification.norm = c.norm;
      try {
        bench_cfg.validate();
      } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
      }
      const ExperimentResult result = run_experiment(bench_cfg);
      {
        std::ofstream csv(bench_out);
        if (!csv) throw std::runtime_error("cannot write " + bench_out);
        write_csv(csv, result);
      }
      if (!bench_plot.empty()) {
        std::ofstream plot(bench_plot);
        if (!plot) throw std::runtime_error("cannot write " + bench_plot);
        write_plot_data(plot, result);
      }
      write_summary(out, result);
      return kExitOk;
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitMalformed;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitMalformed;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitMalformed;
  }
  return kExitMalformed;
}

}  // namespace cliquesynth
