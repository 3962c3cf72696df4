#include "shad/tokenizer.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace shad {

namespace {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> specials{"<pad>", "<bos>", "<eos>", "<unk>", "<sep>"};
  return specials;
}

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c >= 0x80;
}

}  // namespace

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(std::vector<std::string> tokens) {
  tokens_ = special_tokens();
  for (auto& t : tokens)
    if (std::find(tokens_.begin(), tokens_.end(), t) == tokens_.end()) tokens_.push_back(std::move(t));
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<TokenId>(i));
}

TokenId Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::string Vocab::serialize() const {
  std::string out;
  for (std::size_t i = kNumSpecials; i < tokens_.size(); ++i) {
    out += tokens_[i] == "\n" ? "\\n" : tokens_[i];
    out += '\n';
  }
  return out;
}

Vocab Vocab::deserialize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(pos, nl - pos));
    tokens.push_back(line == "\\n" ? "\n" : line);
    pos = nl + 1;
  }
  return Vocab(std::move(tokens));
}

std::vector<Piece> split_text(std::string_view text) {
  std::vector<Piece> pieces;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_word_byte(c)) {
      std::size_t j = i;
      while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
      pieces.push_back({i, j});
      i = j;
    } else if (c == '\n' || !(c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f')) {
      pieces.push_back({i, i + 1});
      ++i;
    } else {
      ++i;
    }
  }
  return pieces;
}

Vocab build_vocab(const std::vector<const Corpus*>& corpora, std::size_t max_size) {
  if (max_size < Vocab::kNumSpecials + 1)
    throw std::invalid_argument("vocabulary max_size must be at least " + std::to_string(Vocab::kNumSpecials + 1));
  std::map<std::string, std::size_t> counts;
  auto count_text = [&](std::string_view text) {
    for (const auto& p : split_text(text)) ++counts[std::string(text.substr(p.start, p.end - p.start))];
  };
  bool any = false;
  for (const Corpus* corpus : corpora) {
    for (const auto& sample : corpus->samples) {
      count_text(sample.input);
      count_text(sample.output);
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("cannot build a vocabulary from an empty corpus");
  for (const auto& s : special_tokens()) counts.erase(s);

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  for (const auto& [token, count] : ranked) {
    if (tokens.size() + Vocab::kNumSpecials >= max_size) break;
    tokens.push_back(token);
  }
  return Vocab(std::move(tokens));
}

Vocab build_vocab(const Corpus& corpus, std::size_t max_size) { return build_vocab({&corpus}, max_size); }

Tokenization tokenize(const Sample& sample, const Vocab& vocab, std::size_t max_length) {
  Tokenization tok;
  for (const auto& p : split_text(sample.input)) {
    tok.ids.push_back(vocab.id(std::string_view(sample.input).substr(p.start, p.end - p.start)));
    tok.char_spans.push_back(p);
  }
  tok.ids.push_back(Vocab::kSep);
  tok.char_spans.push_back({0, 0});
  tok.boundary = tok.ids.size();
  for (const auto& p : split_text(sample.output)) {
    tok.ids.push_back(vocab.id(std::string_view(sample.output).substr(p.start, p.end - p.start)));
    tok.char_spans.push_back(p);
  }
  if (tok.ids.size() > max_length)
    throw TokenizeError("sample " + sample.id + " has " + std::to_string(tok.ids.size()) +
                        " tokens, exceeding the maximum sequence length " + std::to_string(max_length));
  return tok;
}

std::vector<RoleKind> output_token_roles(const Sample& sample, const Tokenization& tok) {
  std::vector<RoleKind> roles;
  if (!sample.role_spans) return roles;
  roles.reserve(tok.output_count());
  for (std::size_t i = tok.boundary; i < tok.ids.size(); ++i) {
    auto role = role_at(sample, tok.char_spans[i].start);
    if (!role) throw TokenizeError("sample " + sample.id + ": token outside role spans");
    roles.push_back(*role);
  }
  return roles;
}

}  // namespace shad
