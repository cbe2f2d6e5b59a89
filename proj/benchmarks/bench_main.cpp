#include <benchmark/benchmark.h>

#include "msmo/autodiff.hpp"
#include "msmo/model.hpp"
#include "msmo/synth.hpp"
#include "msmo/trainer.hpp"

using namespace msmo;

namespace {

ad::Tensor filled(std::size_t r, std::size_t c, Rng& rng) {
  ad::Tensor t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform(rng, -1.0, 1.0);
  return t;
}

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng = make_rng(1);
  ad::Var a = ad::parameter(filled(n, n, rng));
  ad::Var b = ad::parameter(filled(n, n, rng));
  for (auto _ : state) {
    a.zero_grad();
    b.zero_grad();
    ad::backward(ad::sum(ad::tanh(ad::matmul(a, b))));
    benchmark::DoNotOptimize(a.grad().data());
  }
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(16)->Arg(32)->Arg(64);

void BM_SoftmaxRows(benchmark::State& state) {
  Rng rng = make_rng(2);
  ad::Var x = ad::parameter(filled(static_cast<std::size_t>(state.range(0)), kNumTags, rng));
  for (auto _ : state) {
    x.zero_grad();
    ad::backward(ad::sum(ad::log(ad::softmax_rows(x))));
    benchmark::DoNotOptimize(x.grad().data());
  }
}
BENCHMARK(BM_SoftmaxRows)->Arg(12)->Arg(48);

struct Fixture {
  Fixture() : bundle(synth_bilingual(SynthConfig{})), model(Vocabulary::from_bundle(bundle), ModelConfig{}, 1) {}
  CorpusBundle bundle;
  Model model;
};

void BM_EncodeSentence(benchmark::State& state) {
  Fixture f;
  const auto& tokens = f.bundle.split(SplitName::Train).front().view(Variant::S).tokens;
  for (auto _ : state) benchmark::DoNotOptimize(f.model.tag_probs(tokens).value().data());
}
BENCHMARK(BM_EncodeSentence);

void BM_MultiobjectiveStep(benchmark::State& state) {
  Fixture f;
  Trainer trainer(f.model, make_training_data(f.bundle, f.bundle.target_langs, false), TrainConfig{},
                  TrainMode::Msmo, 1);
  std::size_t step = 0;
  for (auto _ : state) benchmark::DoNotOptimize(trainer.multiobjective_update(++step).loss_total);
}
BENCHMARK(BM_MultiobjectiveStep)->Unit(benchmark::kMillisecond);

void BM_CriticUpdate(benchmark::State& state) {
  Fixture f;
  Trainer trainer(f.model, make_training_data(f.bundle, f.bundle.target_langs, false), TrainConfig{},
                  TrainMode::Msmo, 1);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.critic_update());
}
BENCHMARK(BM_CriticUpdate)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
