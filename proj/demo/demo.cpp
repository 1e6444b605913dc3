// Generates a small synthetic corpus, fits the DPM, and prints the type
// proportions and one user's timeline.

#include <iostream>

#include "pietl/dpm.hpp"
#include "pietl/eval.hpp"
#include "pietl/synth.hpp"
#include "pietl/timeline.hpp"

int main(int argc, char** argv) {
  using namespace pietl;
  const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 1;

  synth::GenConfig gc = synth::separable_preset();
  gc.users = 5;
  gc.epochs = 8;
  gc.docs_per_cell = 10;
  gc.vocab_size = 200;
  const auto g = synth::generate(gc, seed);

  auto state = dpm::init_state(g.corpus, synth::sampler_hyper(gc), seed);
  const PosteriorSummary summary = dpm::run_chain(state, {100, 50, 1});

  const auto p = type_proportions(summary);
  std::cout << "documents " << g.corpus.num_docs() << ", topics " << state.num_topics() << '\n';
  std::cout << "PublicTG " << p[0] << "  PublicTS " << p[1] << "  PersonTG " << p[2] << "  PersonTS " << p[3] << '\n';
  std::cout << "label accuracy " << eval::label_accuracy(summary, g.truth.labels) << '\n';

  const auto tl = timeline::build_timeline(g.corpus.user_name(0), summary, g.corpus);
  std::cout << '\n' << timeline::timeline_to_text(tl, g.corpus);
}
