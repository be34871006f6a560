#ifndef MCN_TESTS_FIXTURES_H_
#define MCN_TESTS_FIXTURES_H_

// Small shared setups; dims match gradcheck_model_config().

#include "mcn/gradcheck.h"
#include "mcn/meta_trainer.h"
#include "mcn/synth_data.h"

namespace mcn::testing {

inline CorpusConfig tiny_corpus_config() {
  CorpusConfig c;
  c.n_classes = 4;
  c.clips_per_class = 8;
  c.frames = 3;
  c.height = 8;
  c.width = 8;
  c.sprite_size = 2;
  return c;
}

inline CorpusSplit tiny_split() {
  return split_support_query(generate_corpus(tiny_corpus_config()), 0.5, 3);
}

inline TrainConfig tiny_train_config() {
  TrainConfig t = gradcheck_model_config();
  t.epochs = 2;
  t.eval.ks = {1, 3};
  t.eval.probe_iters = 50;
  return t;
}

}  // namespace mcn::testing

#endif  // MCN_TESTS_FIXTURES_H_
