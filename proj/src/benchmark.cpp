#include "cliquesynth/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ostream>
#include <thread>

namespace cliquesynth {

namespace {

std::string column_name(Family f) {
  std::string s = to_string(f);
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

Discretization parse_discretization(const std::string& name) {
  if (name == "zoh") return Discretization::kZoh;
  if (name == "euler") return Discretization::kEuler;
  throw std::invalid_argument("unknown discretization '" + name + "'");
}

const char* to_string(Discretization d) {
  return d == Discretization::kZoh ? "zoh" : "euler";
}

void ExperimentConfig::validate() const {
  if (samples < 0) throw std::invalid_argument("ExperimentConfig: samples < 0");
  if (agents < 1 || block_size < 1) {
    throw std::invalid_argument("ExperimentConfig: agents and block size must be positive");
  }
  if (!(radius >= 0.0)) throw std::invalid_argument("ExperimentConfig: radius < 0");
  if (!(sample_time > 0.0)) throw std::invalid_argument("ExperimentConfig: T must be positive");
  if (!(entry_low < entry_high)) {
    throw std::invalid_argument("ExperimentConfig: empty entry interval");
  }
  if (workers < 1) throw std::invalid_argument("ExperimentConfig: workers < 1");
}

ContinuousPlant random_continuous_plant(const ExperimentConfig& config,
                                        std::mt19937_64& rng) {
  const int n = config.agents * config.block_size;
  std::uniform_real_distribution<double> dist(config.entry_low, config.entry_high);
  const auto draw = [&] {
    double v;
    do v = dist(rng);
    while (v <= config.entry_low);  // open interval
    return v;
  };
  ContinuousPlant p;
  p.A.resize(n, n);
  p.B.resize(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) p.A(i, j) = draw();
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) p.B(i, j) = draw();
  return p;
}

Instance generate_instance(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  DiskGraph dg = disk_graph(config.agents, config.radius, rng);
  const ContinuousPlant cp = random_continuous_plant(config, rng);
  const DiscretePair dp =
      config.discretization == Discretization::kZoh
          ? zoh_discretize<double>(cp.A, cp.B, config.sample_time)
          : euler_discretize<double>(cp.A, cp.B, config.sample_time);
  const int n = static_cast<int>(cp.A.rows());
  Instance inst;
  inst.structure = BlockStructure::uniform(config.agents, config.block_size);
  inst.graph = std::move(dg.graph);
  inst.positions = std::move(dg.positions);
  inst.plant.A = dp.A;
  inst.plant.B = dp.B;
  inst.plant.Bv = Eigen::MatrixXd::Identity(n, n);
  inst.plant.C = Eigen::MatrixXd::Identity(n, n);
  inst.plant.D = Eigen::MatrixXd::Identity(n, n);
  inst.plant.Dw = Eigen::MatrixXd::Identity(n, n);
  return inst;
}

std::string MethodRecord::status_label() const {
  if (certified) return to_string(status);
  if (status == SynthesisStatus::kOptimal || status == SynthesisStatus::kFeasible) {
    return "CertificationFailure";
  }
  return to_string(status);
}

SampleRecord run_sample(const ExperimentConfig& config, int index) {
  SampleRecord rec;
  rec.sample = index;
  rec.seed = config.seed + static_cast<std::uint64_t>(index);
  const Instance inst = generate_instance(config, rec.seed);
  const CliqueCover cover = maximal_cliques(inst.graph);
  rec.edges = static_cast<int>(inst.graph.edges().size());
  rec.cliques = cover.size();

  for (std::size_t k = 0; k < kBenchmarkFamilies.size(); ++k) {
    MethodRecord& mr = rec.methods[k];
    SynthesisProblem pb;
    pb.plant = inst.plant;
    pb.structure = inst.structure;
    pb.graph = kBenchmarkFamilies[k] == Family::kCentralized
                   ? Graph::complete(inst.graph.node_count())
                   : inst.graph;
    pb.cover = maximal_cliques(pb.graph);
    pb.method.family = kBenchmarkFamilies[k];
    pb.method.objective = Objective::kHinfMinimize;
    pb.numerics = config.numerics;

    const auto t0 = std::chrono::steady_clock::now();
    SynthesisResult res;
    try {
      res = synthesize(pb);
    } catch (const std::exception& e) {
      res.status = SynthesisStatus::kNumericalFailure;
      res.stats.message = e.what();
    }
    const auto t1 = std::chrono::steady_clock::now();
    if (config.record_timing) {
      mr.time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    mr.status = res.status;
    if (!res.feasible()) {
      mr.failure = res.stats.message;
      continue;
    }
    mr.gamma = res.gamma;
    try {
      const Certification cert = certify_controller(
          pb.plant, res.K, pb.structure, pb.pattern(), res.gamma,
          config.certification);
      mr.certified = cert.passed();
      if (!mr.certified) mr.failure = cert.failure;
    } catch (const std::exception& e) {
      mr.failure = e.what();
    }
  }

  const MethodRecord& cen = rec.methods[kCentralizedIndex];
  if (cen.certified) {
    for (MethodRecord& mr : rec.methods) {
      if (mr.certified) mr.ratio = *mr.gamma / *cen.gamma;
    }
  }
  return rec;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult out;
  out.samples.resize(config.samples);
  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int i = next++; i < config.samples; i = next++) {
      out.samples[i] = run_sample(config, i);
    }
  };
  const int threads = std::min(config.workers, std::max(config.samples, 1));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (std::size_t k = 0; k < kBenchmarkFamilies.size(); ++k) {
    MethodSummary& s = out.summary[k];
    std::vector<double> ratios;
    for (const SampleRecord& r : out.samples) {
      if (r.methods[k].failed()) ++s.failures;
      if (r.methods[k].ratio) ratios.push_back(*r.methods[k].ratio);
    }
    s.ratio_count = static_cast<int>(ratios.size());
    if (!ratios.empty()) {
      double sum = 0.0;
      for (double v : ratios) sum += v;
      s.mean_ratio = sum / ratios.size();
      std::sort(ratios.begin(), ratios.end());
      const std::size_t h = ratios.size() / 2;
      s.median_ratio = ratios.size() % 2 ? ratios[h] : 0.5 * (ratios[h - 1] + ratios[h]);
    }
  }
  for (const SampleRecord& r : out.samples) {
    if (r.methods[kCentralizedIndex].failed()) ++out.baseline_failures;
  }
  return out;
}

void write_csv(std::ostream& os, const ExperimentResult& result) {
  os << "sample,seed,edges,cliques";
  for (Family f : kBenchmarkFamilies) {
    const std::string c = column_name(f);
    os << ',' << c << "_status," << c << "_gamma," << c << "_ratio," << c
       << "_time_ms";
  }
  os << '\n';
  for (const SampleRecord& r : result.samples) {
    os << r.sample << ',' << r.seed << ',' << r.edges << ',' << r.cliques;
    for (const MethodRecord& m : r.methods) {
      os << ',' << m.status_label() << ',';
      if (m.certified) os << fmt(*m.gamma);
      os << ',';
      if (m.ratio) os << fmt(*m.ratio);
      os << ',' << fmt(m.time_ms);
    }
    os << '\n';
  }
}

void write_plot_data(std::ostream& os, const ExperimentResult& result) {
  os << "sample,method,ratio,failed\n";
  for (const SampleRecord& r : result.samples) {
    for (std::size_t k = 0; k < kBenchmarkFamilies.size(); ++k) {
      if (static_cast<int>(k) == kCentralizedIndex) continue;
      const MethodRecord& m = r.methods[k];
      os << r.sample << ',' << column_name(kBenchmarkFamilies[k]) << ',';
      if (m.ratio) os << fmt(*m.ratio);
      os << ',' << (m.failed() ? 1 : 0) << '\n';
    }
  }
}

void write_summary(std::ostream& os, const ExperimentResult& result) {
  os << "method        failures  ratios  mean_ratio  median_ratio\n";
  for (std::size_t k = 0; k < kBenchmarkFamilies.size(); ++k) {
    const MethodSummary& s = result.summary[k];
    char line[128];
    std::snprintf(line, sizeof line, "%-12s  %8d  %6d  %10.6f  %12.6f\n",
                  column_name(kBenchmarkFamilies[k]).c_str(), s.failures,
                  s.ratio_count, s.mean_ratio, s.median_ratio);
    os << line;
  }
  os << "baseline failures: " << result.baseline_failures << '\n';
}

}  // namespace cliquesynth
