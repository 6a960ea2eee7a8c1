#pragma once

// Code and comment tokenization. Programming symbols are first-class tokens;
// comment words are lowercased and carry stopword flags so that the
// augmentation operators can skip them.

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace cpr {

enum class TokenKind { identifier, symbol, literal, keyword, word, stopword };
enum class Stream { code, comment };

inline std::string_view to_string(TokenKind k) {
  switch (k) {
    case TokenKind::identifier: return "identifier";
    case TokenKind::symbol: return "symbol";
    case TokenKind::literal: return "literal";
    case TokenKind::keyword: return "keyword";
    case TokenKind::word: return "word";
    case TokenKind::stopword: return "stopword";
  }
  return "?";
}

inline std::string_view to_string(Stream s) {
  return s == Stream::code ? "code" : "comment";
}

struct Token {
  std::string text;
  TokenKind kind = TokenKind::word;
  Stream stream = Stream::comment;
  std::size_t position = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

using WordSet = std::unordered_set<std::string>;

class TokenSequence {
 public:
  TokenSequence() = default;
  explicit TokenSequence(Stream stream) : stream_(stream) {}

  Stream stream() const noexcept { return stream_; }
  std::size_t length() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }

  const std::vector<Token>& tokens() const noexcept { return tokens_; }
  const Token& operator[](std::size_t i) const { return tokens_[i]; }

  auto begin() const noexcept { return tokens_.begin(); }
  auto end() const noexcept { return tokens_.end(); }

  void push_back(std::string text, TokenKind kind) {
    tokens_.push_back(Token{std::move(text), kind, stream_, tokens_.size()});
  }

  std::vector<std::string> texts() const {
    std::vector<std::string> out;
    out.reserve(tokens_.size());
    for (const auto& t : tokens_) out.push_back(t.text);
    return out;
  }

  /// Builds a sequence from already-ordered tokens, renumbering positions.
  static TokenSequence from_tokens(Stream stream, std::vector<Token> tokens) {
    TokenSequence seq(stream);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      tokens[i].stream = stream;
      tokens[i].position = i;
    }
    seq.tokens_ = std::move(tokens);
    return seq;
  }

  friend bool operator==(const TokenSequence& a, const TokenSequence& b) {
    return a.stream_ == b.stream_ && a.tokens_ == b.tokens_;
  }

 private:
  Stream stream_ = Stream::code;
  std::vector<Token> tokens_;
};

namespace detail {

inline constexpr std::array<std::string_view, 11> kMultiCharOperators = {
    "==", "<=", ">=", "!=", "&&", "||", "->", "++", "--", "+=", "-="};

inline bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}
inline bool is_ident_start(char c) {
  auto u = static_cast<unsigned char>(c);
  return std::isalpha(u) || c == '_' || c == '$' || u >= 0x80;
}
inline bool is_ident_char(char c) {
  return is_ident_start(c) || std::isdigit(static_cast<unsigned char>(c));
}
inline bool is_digit(char c) {
  return std::isdigit(static_cast<unsigned char>(c)) != 0;
}

inline const WordSet& shared_keywords() {
  static const WordSet kw = {
      "if",     "else",   "for",    "while",  "do",     "return", "break",
      "continue", "switch", "case",  "default", "int",   "float",  "double",
      "char",   "void",   "new",    "class",  "struct", "const",  "static",
      "public", "private", "def",   "function", "var",  "let",    "in",
      "and",    "or",     "not",    "boolean", "bool",  "long",   "try",
      "catch",  "throw",  "import", "this"};
  return kw;
}

inline const WordSet* language_keywords(std::string_view language) {
  static const WordSet java = {
      "abstract", "assert",   "boolean",   "break",     "byte",     "case",
      "catch",    "char",     "class",     "const",     "continue", "default",
      "do",       "double",   "else",      "enum",      "extends",  "final",
      "finally",  "float",    "for",       "goto",      "if",       "implements",
      "import",   "instanceof", "int",     "interface", "long",     "native",
      "new",      "package",  "private",   "protected", "public",   "return",
      "short",    "static",   "strictfp",  "super",     "switch",   "synchronized",
      "this",     "throw",    "throws",    "transient", "try",      "void",
      "volatile", "while",    "var"};
  static const WordSet python = {
      "and",   "as",     "assert", "async",  "await",  "break", "class",
      "continue", "def", "del",    "elif",   "else",   "except", "finally",
      "for",   "from",   "global", "if",     "import", "in",    "is",
      "lambda", "nonlocal", "not", "or",     "pass",   "raise", "return",
      "try",   "while",  "with",   "yield"};
  static const WordSet c = {
      "auto",   "break",  "case",     "char",   "const",   "continue",
      "default", "do",    "double",   "else",   "enum",    "extern",
      "float",  "for",    "goto",     "if",     "inline",  "int",
      "long",   "register", "restrict", "return", "short", "signed",
      "sizeof", "static", "struct",   "switch", "typedef", "union",
      "unsigned", "void", "volatile", "while"};
  static const WordSet javascript = {
      "break",  "case",   "catch",    "class",  "const",  "continue",
      "debugger", "default", "delete", "do",    "else",   "export",
      "extends", "finally", "for",    "function", "if",   "import",
      "in",     "instanceof", "let",  "new",    "return", "super",
      "switch", "this",   "throw",    "try",    "typeof", "var",
      "void",   "while",  "with",     "yield",  "async",  "await"};
  if (language == "java") return &java;
  if (language == "python") return &python;
  if (language == "c") return &c;
  if (language == "javascript" || language == "js") return &javascript;
  return nullptr;
}

inline bool is_literal_word(std::string_view w) {
  static const std::array<std::string_view, 8> lits = {
      "true", "false", "null", "None", "True", "False", "nullptr", "undefined"};
  return std::find(lits.begin(), lits.end(), w) != lits.end();
}

// Whitespace inside string literals is escaped so that no token carries
// whitespace; the escaped form retokenizes to the same single token.
inline void append_escaped(std::string& out, char c) {
  switch (c) {
    case ' ': out += "\\x20"; break;
    case '\t': out += "\\t"; break;
    case '\n': out += "\\n"; break;
    case '\r': out += "\\r"; break;
    case '\v': out += "\\v"; break;
    case '\f': out += "\\f"; break;
    default: out += c;
  }
}

}  // namespace detail

/// Splits source code into identifier, keyword, literal and symbol tokens.
/// Multi-character operators are matched maximally. `language` selects the
/// keyword table; unknown languages use a shared table.
inline TokenSequence tokenize_code(std::string_view source,
                                   std::string_view language = {}) {
  using namespace detail;
  const WordSet* keywords = language_keywords(language);
  if (keywords == nullptr) keywords = &shared_keywords();

  TokenSequence seq(Stream::code);
  std::size_t i = 0;
  const std::size_t n = source.size();
  while (i < n) {
    const char c = source[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (c == '"' || c == '\'' || c == '`') {
      std::string lit(1, c);
      std::size_t j = i + 1;
      while (j < n) {
        const char d = source[j];
        if (d == '\\' && j + 1 < n) {
          lit += d;
          append_escaped(lit, source[j + 1]);
          j += 2;
          continue;
        }
        append_escaped(lit, d);
        ++j;
        if (d == c) break;
      }
      seq.push_back(std::move(lit), TokenKind::literal);
      i = j;
      continue;
    }
    if (is_digit(c)) {
      std::size_t j = i;
      while (j < n && (is_ident_char(source[j]))) ++j;
      if (j + 1 < n && source[j] == '.' && is_digit(source[j + 1])) {
        ++j;
        while (j < n && is_ident_char(source[j])) ++j;
      }
      seq.push_back(std::string(source.substr(i, j - i)), TokenKind::literal);
      i = j;
      continue;
    }
    if (is_ident_start(c)) {
      std::size_t j = i;
      while (j < n && is_ident_char(source[j])) ++j;
      std::string word(source.substr(i, j - i));
      TokenKind kind = TokenKind::identifier;
      if (is_literal_word(word)) {
        kind = TokenKind::literal;
      } else if (keywords->contains(word)) {
        kind = TokenKind::keyword;
      }
      seq.push_back(std::move(word), kind);
      i = j;
      continue;
    }
    std::string_view rest = source.substr(i);
    auto op = std::find_if(kMultiCharOperators.begin(), kMultiCharOperators.end(),
                           [&](std::string_view o) { return rest.starts_with(o); });
    if (op != kMultiCharOperators.end()) {
      seq.push_back(std::string(*op), TokenKind::symbol);
      i += op->size();
      continue;
    }
    seq.push_back(std::string(1, c), TokenKind::symbol);
    ++i;
  }
  return seq;
}

/// Lowercased comment words split on whitespace and punctuation.
inline TokenSequence tokenize_comment(std::string_view text,
                                      const WordSet& stopwords) {
  TokenSequence seq(Stream::comment);
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    const bool stop = stopwords.contains(word);
    seq.push_back(std::move(word), stop ? TokenKind::stopword : TokenKind::word);
    word.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '_' || u >= 0x80) {
      word += static_cast<char>(std::tolower(u));
    } else {
      flush();
    }
  }
  flush();
  return seq;
}

inline std::string join_texts(const std::vector<std::string>& texts) {
  std::string out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (i) out += ' ';
    out += texts[i];
  }
  return out;
}

inline std::string detokenize(const TokenSequence& seq) {
  return join_texts(seq.texts());
}

}  // namespace cpr
