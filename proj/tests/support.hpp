#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "acrostic/cue_list.hpp"
#include "acrostic/eval.hpp"
#include "acrostic/lm.hpp"
#include "acrostic/tokenizer.hpp"

namespace acrostic::testing {

inline std::filesystem::path data_dir() { return ACROSTIC_DATA_DIR; }
inline std::filesystem::path fixture_dir() { return ACROSTIC_FIXTURE_DIR; }
inline std::string cli_path() { return ACROSTIC_CLI; }

inline std::vector<std::vector<Token>> tokenized(const std::filesystem::path& dir) {
  std::vector<std::vector<Token>> out;
  for (const auto& doc : read_corpus_dir(dir)) out.push_back(tokenize(doc));
  return out;
}

/// The bundled desk-scale setup: order-3 model on corpus/lm, cue list from corpus/cue.
struct ToySetup {
  NGramModel model;
  CueList cues;
  std::vector<Prompt> prompts;
  std::vector<Prompt> comment_rich_prompts;

  static const ToySetup& get() {
    static const ToySetup setup = [] {
      const auto lm = tokenized(data_dir() / "corpus" / "lm");
      const auto cue_docs = read_corpus_dir(data_dir() / "corpus" / "cue");
      std::vector<std::vector<Token>> cue_corpus;
      for (const auto& d : cue_docs) cue_corpus.push_back(tokenize(d));
      const PairCounts pc = count_cooccurrence(cue_corpus);
      const auto heldout = read_corpus_dir(data_dir() / "corpus" / "heldout");
      return ToySetup{train_ngram(lm, 3, 0.01),
                      build_cue_list(pc, entropy_percentile(pc, 75.0), CueDirection::HighEntropyCue,
                                     corpus_fingerprint(cue_docs)),
                      extract_prompts(heldout, LanguageProfile::python_like()),
                      extract_comment_rich_prompts(heldout, LanguageProfile::python_like())};
    }();
    return setup;
  }
};

inline const std::string kTestKey("\x00\x01\x02\x03\x04\x05\x06\x07\x08\x09\x0a\x0b\x0c\x0d\x0e\x0f", 16);

}  // namespace acrostic::testing
