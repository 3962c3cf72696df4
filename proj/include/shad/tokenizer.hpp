#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "shad/corpus.hpp"

namespace shad {

using TokenId = int;

/// Word-level vocabulary; ids 0-4 are the reserved specials.
class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr TokenId kSep = 4;
  static constexpr std::size_t kNumSpecials = 5;

  Vocab();
  explicit Vocab(std::vector<std::string> tokens);

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// One token per line; a newline token is written as the two characters "\n".
  std::string serialize() const;
  static Vocab deserialize(std::string_view text);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// A unit produced by the splitter: [start, end) of the source text.
struct Piece {
  std::size_t start = 0;
  std::size_t end = 0;
};

/// Splits on whitespace and punctuation. Runs of [A-Za-z0-9_] (and any
/// non-ASCII bytes) form one unit; every other printable character is its own
/// unit; '\n' is kept as a unit because it carries layout; other whitespace is
/// dropped and belongs to no unit.
std::vector<Piece> split_text(std::string_view text);

struct Tokenization {
  std::vector<TokenId> ids;
  /// Character span of each token, into input for i < boundary - 1, into
  /// output for i >= boundary. The separator has an empty span.
  std::vector<Piece> char_spans;
  std::size_t boundary = 0;

  std::size_t output_count() const { return ids.size() - boundary; }
};

class TokenizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Most frequent units first, ties lexicographic, up to max_size entries
/// including the specials. Throws std::invalid_argument if max_size < 6.
Vocab build_vocab(const std::vector<const Corpus*>& corpora, std::size_t max_size);
Vocab build_vocab(const Corpus& corpus, std::size_t max_size);

/// Input tokens, SEP, output tokens. Throws TokenizeError naming the sample
/// when the sequence exceeds max_length.
Tokenization tokenize(const Sample& sample, const Vocab& vocab, std::size_t max_length);

/// Fine role of each output token (role of its first character); empty if
/// the sample carries no spans.
std::vector<RoleKind> output_token_roles(const Sample& sample, const Tokenization& tok);

}  // namespace shad
