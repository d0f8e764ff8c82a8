// Microbenchmarks over the hot paths: the branch layers, the full forward
// and backward passes, metric pooling, and corpus splitting.

#include <benchmark/benchmark.h>

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "stance/corpus.hpp"
#include "stance/evaluation.hpp"
#include "stance/glan.hpp"
#include "stance/label.hpp"
#include "stance/rng.hpp"

namespace {

using stance::Rng;
using stance::Stance;
namespace glan = stance::glan;

Eigen::MatrixXd random_matrix(Rng& rng, long rows, long cols) {
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) m(i, j) = rng.uniform() * 2.0 - 1.0;
  }
  return m;
}

void bm_mha_stack(benchmark::State& state) {
  const long n = state.range(0);
  const long h = 64;
  Rng rng(1);
  const Eigen::MatrixXd H = random_matrix(rng, n, h);
  const Eigen::MatrixXd branch = random_matrix(rng, n, h);
  glan::LayerNormParams ln{Eigen::VectorXd::Ones(h), Eigen::VectorXd::Zero(h)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(glan::mha_stack(branch, H, ln, 0.1, 3));
  }
}
BENCHMARK(bm_mha_stack)->Arg(4)->Arg(16)->Arg(64);

void bm_structural_branch(benchmark::State& state) {
  const long n = state.range(0);
  const long h = 64;
  Rng rng(2);
  const Eigen::MatrixXd H = random_matrix(rng, n, h);
  const Eigen::MatrixXd w0 = random_matrix(rng, h, h);
  const Eigen::MatrixXd w1 = random_matrix(rng, h, h);
  const auto graph = glan::CommentGraph::chain(static_cast<int>(n));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        glan::structural_branch(H, graph, w0, w1, glan::Activation::ReLU, true));
  }
}
BENCHMARK(bm_structural_branch)->Arg(4)->Arg(16)->Arg(64);

glan::GlanModel make_model(int hidden_size) {
  glan::GlanConfig config;
  config.hidden_size = hidden_size;
  Rng rng(3);
  return {config, glan::GlanParams::init(hidden_size, rng)};
}

void bm_predict(benchmark::State& state) {
  const long n = state.range(0);
  const int h = 64;
  Rng rng(4);
  const Eigen::MatrixXd H = random_matrix(rng, n, h);
  const Eigen::VectorXd target = random_matrix(rng, 1, h).row(0).transpose();
  const auto graph = glan::CommentGraph::chain(static_cast<int>(n));
  const auto model = make_model(h);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.predict(H, graph, target));
  }
}
BENCHMARK(bm_predict)->Arg(4)->Arg(16);

void bm_forward_backward(benchmark::State& state) {
  const long n = state.range(0);
  const int h = 64;
  Rng rng(5);
  const Eigen::MatrixXd H = random_matrix(rng, n, h);
  const Eigen::VectorXd target = random_matrix(rng, 1, h).row(0).transpose();
  const auto graph = glan::CommentGraph::chain(static_cast<int>(n));
  const auto model = make_model(h);
  glan::GlanParams grads = glan::GlanParams::zeros(h);
  for (auto _ : state) {
    grads.set_zero();
    benchmark::DoNotOptimize(
        model.forward_backward(H, graph, target, Stance::Favor, grads));
  }
}
BENCHMARK(bm_forward_backward)->Arg(4)->Arg(16);

void bm_f_avg(benchmark::State& state) {
  const long n = state.range(0);
  Rng rng(6);
  std::vector<Stance> gold, pred;
  for (long i = 0; i < n; ++i) {
    gold.push_back(static_cast<Stance>(rng.below(3)));
    pred.push_back(static_cast<Stance>(rng.below(3)));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(stance::evaluation::f_avg(gold, pred));
  }
}
BENCHMARK(bm_f_avg)->Arg(1000)->Arg(100000);

void bm_split_corpus(benchmark::State& state) {
  const long n = state.range(0);
  std::vector<stance::corpus::StanceInstance> instances;
  const std::vector<std::string> targets = {"guns", "tax", "energy", "schools"};
  for (long i = 0; i < n; ++i) {
    stance::corpus::StanceInstance inst;
    inst.instance_id = "i" + std::to_string(i);
    inst.thread_id = inst.instance_id;
    inst.target = targets[i % targets.size()];
    inst.label = static_cast<Stance>(i % 3);
    inst.depth = 1;
    inst.path = {"u"};
    instances.push_back(std::move(inst));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(stance::corpus::split_corpus(instances, 1));
  }
}
BENCHMARK(bm_split_corpus)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
