#pragma once

#include <filesystem>
#include <string>

#include "shad/generator.hpp"
#include "shad/model.hpp"
#include "shad/tokenizer.hpp"
#include "shad/train.hpp"

namespace shad::testing {

/// A small ReAct corpus with its vocabulary and a briefly trained model.
struct Toy {
  Corpus corpus;
  Vocab vocab;
  ModelDims dims;
  ModelParams<float> base;
};

inline const Toy& toy() {
  static const Toy t = [] {
    Toy t;
    t.corpus = generate_corpus(react_generator_config(120, 5));
    t.vocab = build_vocab(t.corpus, 2048);
    t.dims = ModelDims{static_cast<int>(t.vocab.size()), 16, 1, 2, 256};
    TrainConfig c;
    c.learning_rate = 3e-3;
    c.epochs = 1;
    c.batch_size = 8;
    c.seed = 2;
    t.base = train(ModelParams<float>::initialize(t.dims, 1), t.corpus, t.vocab, c).params;
    return t;
  }();
  return t;
}

/// Removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace shad::testing
