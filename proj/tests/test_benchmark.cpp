#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "cliquesynth/benchmark.hpp"

using namespace cliquesynth;
using Eigen::MatrixXd;

namespace {

using MatrixXld = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

// Scaling and squaring with a 30-term Taylor series in long double.
MatrixXld taylor_expm(const MatrixXld& M) {
  const long double norm = M.cwiseAbs().colwise().sum().maxCoeff();
  const int s = norm > 0.5L ? static_cast<int>(std::ceil(std::log2(norm / 0.5L))) : 0;
  const MatrixXld X = M / std::ldexp(1.0L, s);
  MatrixXld term = MatrixXld::Identity(M.rows(), M.cols());
  MatrixXld sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = (term * X / static_cast<long double>(k)).eval();
    sum += term;
  }
  for (int i = 0; i < s; ++i) sum = (sum * sum).eval();
  return sum;
}

double rel_err(const MatrixXd& a, const MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST(Zoh, ZeroDynamicsIsIntegrator) {
  const MatrixXd Bc = MatrixXd::Random(3, 2);
  const DiscretePair d = zoh_discretize<double>(MatrixXd::Zero(3, 3), Bc, 0.01);
  EXPECT_LE((d.A - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((d.B - 0.01 * Bc).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Zoh, ScalarClosedForm) {
  const DiscretePair d = zoh_discretize<double>(MatrixXd::Constant(1, 1, 1.0),
                                                MatrixXd::Constant(1, 1, 2.0), 0.01);
  EXPECT_NEAR(d.A(0, 0), std::exp(0.01), 1e-15);
  EXPECT_NEAR(d.B(0, 0), 2.0 * std::expm1(0.01), 1e-15);
}

TEST(Zoh, MatchesTaylorOracle) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 8, m = 1 + trial % 3;
    MatrixXd Ac(n, n), Bc(n, m);
    for (Eigen::Index i = 0; i < Ac.size(); ++i) Ac(i) = u(rng);
    for (Eigen::Index i = 0; i < Bc.size(); ++i) Bc(i) = u(rng);
    Ac *= 10.0 / Ac.norm();
    const double T = trial % 2 ? 0.01 : 0.5;
    const DiscretePair d = zoh_discretize<double>(Ac, Bc, T);
    MatrixXld aug = MatrixXld::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = Ac.cast<long double>() * T;
    aug.topRightCorner(n, m) = Bc.cast<long double>() * T;
    const MatrixXld e = taylor_expm(aug);
    EXPECT_LE(rel_err(d.A, e.topLeftCorner(n, n).cast<double>()), 1e-10);
    EXPECT_LE(rel_err(d.B, e.topRightCorner(n, m).cast<double>()), 1e-10);
  }
}

TEST(Zoh, RejectsBadInput) {
  EXPECT_THROW(zoh_discretize<double>(MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 1), 0.0),
               std::invalid_argument);
  EXPECT_THROW(zoh_discretize<double>(MatrixXd::Zero(2, 3), MatrixXd::Zero(2, 1), 0.1),
               std::invalid_argument);
}

TEST(Euler, FirstOrder) {
  MatrixXd Ac(2, 2);
  Ac << 1, 2, 3, 4;
  const DiscretePair d = euler_discretize<double>(Ac, MatrixXd::Identity(2, 2), 0.1);
  MatrixXd expect(2, 2);
  expect << 1.1, 0.2, 0.3, 1.4;
  EXPECT_LE((d.A - expect).norm(), 1e-15);
  EXPECT_LE((d.B - 0.1 * MatrixXd::Identity(2, 2)).norm(), 1e-15);
}

TEST(RandomPlant, EntriesInOpenUnitInterval) {
  ExperimentConfig config;
  std::mt19937_64 rng(2);
  double sum = 0.0;
  int count = 0;
  for (int k = 0; k < 40; ++k) {
    const ContinuousPlant p = random_continuous_plant(config, rng);
    ASSERT_EQ(p.A.rows(), 10);
    ASSERT_EQ(p.B.cols(), 10);
    for (const MatrixXd* m : {&p.A, &p.B}) {
      EXPECT_GT(m->minCoeff(), 0.0);
      EXPECT_LT(m->maxCoeff(), 1.0);
      sum += m->sum();
      count += static_cast<int>(m->size());
    }
  }
  EXPECT_NEAR(sum / count, 0.5, 0.02);
}

TEST(Instance, ProtocolShapes) {
  ExperimentConfig config;
  const Instance inst = generate_instance(config, 7);
  EXPECT_EQ(inst.structure.nodes(), 10);
  EXPECT_EQ(inst.plant.n(), 10);
  EXPECT_EQ(inst.plant.Bv, MatrixXd::Identity(10, 10));
  EXPECT_EQ(inst.plant.C, MatrixXd::Identity(10, 10));
  EXPECT_EQ(inst.plant.D, MatrixXd::Identity(10, 10));
  EXPECT_EQ(inst.plant.Dw, MatrixXd::Identity(10, 10));
  for (int i = 0; i < 10; ++i)
    for (int j = i + 1; j < 10; ++j)
      EXPECT_EQ(inst.graph.has_edge(i, j),
                (inst.positions[i] - inst.positions[j]).norm() <= config.radius);
  // Small T keeps the discrete plant close to I + T·A_c.
  EXPECT_LE((inst.plant.A - MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff(), 0.02);
}

TEST(Instance, DeterministicPerSeed) {
  ExperimentConfig config;
  const Instance a = generate_instance(config, 11);
  const Instance b = generate_instance(config, 11);
  const Instance c = generate_instance(config, 12);
  EXPECT_EQ(a.plant.A, b.plant.A);
  EXPECT_EQ(a.plant.B, b.plant.B);
  EXPECT_EQ(a.graph.edges(), b.graph.edges());
  EXPECT_NE(a.plant.A, c.plant.A);
}

TEST(Instance, BlockSizeScalesDimensions) {
  ExperimentConfig config;
  config.agents = 4;
  config.block_size = 2;
  const Instance inst = generate_instance(config, 3);
  EXPECT_EQ(inst.plant.n(), 8);
  EXPECT_EQ(inst.plant.m(), 8);
  EXPECT_EQ(inst.structure.nodes(), 4);
}

TEST(Config, Validation) {
  ExperimentConfig config;
  EXPECT_NO_THROW(config.validate());
  config.samples = -1;
  EXPECT_THROW(config.validate(), std::invalid_argument);
  config = {};
  config.entry_high = config.entry_low;
  EXPECT_THROW(config.validate(), std::invalid_argument);
  config = {};
  config.sample_time = 0.0;
  EXPECT_THROW(config.validate(), std::invalid_argument);
}

TEST(Experiment, ZeroSamplesGivesHeaderOnly) {
  ExperimentConfig config;
  config.samples = 0;
  const ExperimentResult r = run_experiment(config);
  EXPECT_TRUE(r.samples.empty());
  std::ostringstream os;
  write_csv(os, r);
  const std::string csv = os.str();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1);
  EXPECT_EQ(csv.rfind("sample,seed,edges,cliques,diag_status", 0), 0u);
}

TEST(Experiment, SmallSweepIsReproducibleAndConsistent) {
  ExperimentConfig config;
  config.samples = 2;
  config.agents = 5;
  config.seed = 5;
  config.record_timing = false;
  const ExperimentResult a = run_experiment(config);
  config.workers = 2;
  const ExperimentResult b = run_experiment(config);
  std::ostringstream ca, cb;
  write_csv(ca, a);
  write_csv(cb, b);
  EXPECT_EQ(ca.str(), cb.str());
  ASSERT_EQ(a.samples.size(), 2u);
  for (const SampleRecord& s : a.samples) {
    EXPECT_EQ(s.seed, config.seed + static_cast<std::uint64_t>(s.sample));
    const MethodRecord& cen = s.methods[kCentralizedIndex];
    for (const MethodRecord& m : s.methods) {
      EXPECT_EQ(m.time_ms, 0.0);
      if (m.certified && cen.certified) {
        ASSERT_TRUE(m.ratio.has_value());
        EXPECT_NEAR(*m.ratio, *m.gamma / *cen.gamma, 1e-12);
        EXPECT_GE(*m.ratio, 1.0 - 1e-3);
      }
    }
  }
  std::ostringstream plot;
  write_plot_data(plot, a);
  const std::string rows = plot.str();
  EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 1 + 2 * 4);
}
