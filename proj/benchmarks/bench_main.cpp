#include <benchmark/benchmark.h>

#include <cmath>

#include "gwe/convae.hpp"
#include "gwe/cooc.hpp"
#include "gwe/embed.hpp"
#include "gwe/glyph.hpp"
#include "gwe/seqmodel.hpp"
#include "gwe/utf8.hpp"

using namespace gwe;

namespace {

void BM_ConvaeEncode(benchmark::State& state) {
  const auto params = convae::init_params(convae::Geometry::standard(), 1);
  SyntheticRasterizer font;
  const auto bitmap = render_bitmap(0x6C34, font, {});
  for (auto _ : state) benchmark::DoNotOptimize(convae::encode(bitmap, params));
}
BENCHMARK(BM_ConvaeEncode)->Unit(benchmark::kMillisecond);

void BM_ConvaeBackward(benchmark::State& state) {
  const auto params = convae::init_params(convae::Geometry::standard(), 1);
  const auto set = synthetic_motif_set(1, 4, 2);
  std::vector<convae::FeatureMap> batch;
  for (const auto& b : set.bitmaps) batch.push_back(convae::bitmap_to_map(b));
  for (auto _ : state) benchmark::DoNotOptimize(convae::backward(batch, params, 1e-4));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_ConvaeBackward)->Unit(benchmark::kMillisecond);

// One CBOW-family update with a 10-word window and 10 negatives.
void BM_CbowStep(benchmark::State& state) {
  const auto variant = static_cast<Variant>(state.range(0));
  std::vector<std::string> tokens;
  for (int i = 0; i < 200; ++i) {
    tokens.push_back(utf8::encode(0x4E00 + static_cast<char32_t>(i % 97)) +
                     utf8::encode(0x4E00 + static_cast<char32_t>((i * 7) % 89)));
  }
  const auto vocab = build_vocab(tokens, 0);
  const std::size_t dims = 512;
  Matrix g(vocab.char_count(), dims);
  Rng rng(3);
  for (auto& v : g.values()) v = rng.uniform(-0.1, 0.1);
  const GlyphTable glyphs(g);
  const ModelContext ctx{&vocab, &glyphs, nullptr};
  auto store = EmbeddingStore::init(vocab.size(), vocab.char_count(), 0, dims, 4);
  const NegSampler sampler(vocab.freqs());
  std::vector<WordId> context(10);
  for (auto _ : state) {
    const auto target = static_cast<WordId>(rng.below(vocab.size()));
    for (auto& c : context) c = static_cast<WordId>(rng.below(vocab.size()));
    const auto negs = sampler.draw_negatives(10, target, rng);
    benchmark::DoNotOptimize(cbow_step(variant, target, context, negs, store, ctx, 0.025));
  }
  state.SetLabel(std::string(variant_name(variant)));
}
BENCHMARK(BM_CbowStep)
    ->Arg(static_cast<int>(Variant::kCbow))
    ->Arg(static_cast<int>(Variant::kCwe))
    ->Arg(static_cast<int>(Variant::kCtxG));

void BM_GloveEpoch(benchmark::State& state) {
  const auto V = static_cast<std::uint32_t>(state.range(0));
  SparseCooc cooc;
  cooc.vocab_size = V;
  Rng rng(5);
  for (std::uint32_t i = 0; i < V; ++i) {
    for (std::uint32_t j = 0; j < V; ++j) {
      if (rng.uniform() < 0.2) cooc.entries.push_back({i, j, 1.0 + 50.0 * rng.uniform()});
    }
  }
  GloveConfig cfg;
  cfg.dims = 100;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(glove_train(cooc, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cooc.entries.size()));
}
BENCHMARK(BM_GloveEpoch)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_GruWordVector(benchmark::State& state) {
  const auto gru = seq::GruParams::init(512, 256, 1);
  const auto head = seq::MlpHead::init(256, 200, 200, 2);
  Rng rng(6);
  std::vector<std::vector<double>> chars(static_cast<std::size_t>(state.range(0)), std::vector<double>(512));
  for (auto& c : chars) {
    for (auto& v : c) v = rng.uniform(-0.1, 0.1);
  }
  const seq::Sequence s(chars.begin(), chars.end());
  for (auto _ : state) benchmark::DoNotOptimize(seq::head_forward(seq::gru_forward(s, gru), head));
}
BENCHMARK(BM_GruWordVector)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
