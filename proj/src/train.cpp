#include <algorithm>
#include <iostream>
#include <numeric>
#include <random>

#include "schemex/errors.hpp"
#include "schemex/training.hpp"

namespace schemex {

TrainReport train(Model& model, const std::vector<Example>& corpus, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (corpus.empty()) throw std::invalid_argument("training corpus is empty");

  TrainReport report;
  AdamState state;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<bool> overflowed(corpus.size(), false);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    std::size_t epoch_count = 0;

    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      TensorMap batch_grads;
      std::size_t used = 0;
      for (std::size_t b = begin; b < end; ++b) {
        const std::size_t idx = order[b];
        if (overflowed[idx]) continue;
        try {
          GradientResult r = backward(model, corpus[idx], cfg.max_len);
          epoch_total += r.loss.total;
          ++epoch_count;
          ++used;
          if (batch_grads.empty()) {
            batch_grads = std::move(r.grads);
          } else {
            for (auto& [name, g] : batch_grads) {
              const auto& src = r.grads.at(name).data;
              for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += src[i];
            }
          }
        } catch (const ContextOverflow& e) {
          overflowed[idx] = true;
          ++report.skipped;
          std::clog << "train: skipping example " << idx << ": " << e.what() << '\n';
        }
      }
      if (used == 0) continue;
      if (used > 1) {
        const double inv = 1.0 / static_cast<double>(used);
        for (auto& [_, g] : batch_grads) {
          for (double& x : g.data) x *= inv;
        }
      }
      ++report.steps;
      optimizer_step(model.params, batch_grads, state, cfg, report.steps);
    }

    const double mean = epoch_count == 0 ? 0.0 : epoch_total / static_cast<double>(epoch_count);
    report.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return report;
}

Model make_desk_model(const std::vector<Example>& corpus, std::uint64_t seed, std::size_t max_vocab) {
  const auto strings = corpus_strings(corpus);
  ModelConfig cfg;
  cfg.seed = seed;
  return make_model(cfg, build_vocab(strings, max_vocab, prompt_sugar_tokens()));
}

}  // namespace schemex
