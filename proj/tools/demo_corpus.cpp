// Generates the two-speaker synthetic demo corpus (parallel pulse-train
// vowels) so the pipeline can be exercised without any external dataset.

#include <iostream>

#include <CLI11.hpp>

#include "vc/pipeline/synthcorpus.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic two-speaker demo corpus generator"};
  std::string dir = "demo-corpus";
  vc::pipeline::DemoCorpusSpec spec;
  app.add_option("--dir", dir, "Output directory");
  app.add_option("--utterances", spec.utterances_per_speaker, "Utterances per speaker");
  app.add_option("--validation", spec.validation_per_speaker, "Held-out utterances per speaker");
  app.add_option("--seed", spec.seed, "Corpus seed");
  CLI11_PARSE(app, argc, argv);

  try {
    std::string manifest = vc::pipeline::write_demo_corpus(dir, spec);
    std::cout << manifest << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
