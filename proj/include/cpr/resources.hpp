#pragma once

// Plain-text resources: stopword lists, synonym lexicons and the phrase table
// used by the stub back-translator.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cpr/error.hpp"
#include "cpr/tokenizer.hpp"

namespace cpr {

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      parts.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return parts;
}

inline std::ifstream open_resource(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open resource file " + path.string());
  return in;
}

}  // namespace detail

/// One word per line; blank lines and '#' comments ignored.
inline WordSet parse_word_list(std::istream& in) {
  WordSet words;
  std::string line;
  while (std::getline(in, line)) {
    auto w = detail::trim(line);
    if (w.empty() || w.front() == '#') continue;
    for (auto& ch : w) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    words.insert(std::move(w));
  }
  return words;
}

inline WordSet load_word_list(const std::filesystem::path& path) {
  auto in = detail::open_resource(path);
  return parse_word_list(in);
}

/// `key<TAB>alt1,alt2,...` per line. Keys may be multi-word phrases.
using SynonymTable = std::map<std::string, std::vector<std::string>>;

inline SynonymTable parse_synonym_table(std::istream& in) {
  SynonymTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("missing TAB separator", lineno);
    auto key = detail::trim(std::string_view(line).substr(0, tab));
    auto alts = detail::split(std::string_view(line).substr(tab + 1), ',');
    std::erase_if(alts, [](const std::string& a) { return a.empty(); });
    if (key.empty() || alts.empty()) throw ParseError("empty entry", lineno);
    auto& slot = table[key];
    for (auto& a : alts) slot.push_back(std::move(a));
  }
  return table;
}

inline SynonymTable load_synonym_table(const std::filesystem::path& path) {
  auto in = detail::open_resource(path);
  return parse_synonym_table(in);
}

/// Source of replacement words for SR and RI.
class SynonymProvider {
 public:
  virtual ~SynonymProvider() = default;
  virtual std::vector<std::string> synonyms(const Token& token) const = 0;
};

/// Lexicon lookup by token text (directional as written in the file).
class LexiconSynonyms final : public SynonymProvider {
 public:
  LexiconSynonyms() = default;
  explicit LexiconSynonyms(SynonymTable table) : table_(std::move(table)) {}

  std::vector<std::string> synonyms(const Token& token) const override {
    auto it = table_.find(token.text);
    return it == table_.end() ? std::vector<std::string>{} : it->second;
  }

  const SynonymTable& table() const noexcept { return table_; }

 private:
  SynonymTable table_;
};

/// Code-safe substitution: only identifiers are eligible and the sole
/// "synonym" is a renamed identifier, so operators and literals are never
/// mutated.
class IdentifierRenamer final : public SynonymProvider {
 public:
  std::vector<std::string> synonyms(const Token& token) const override {
    if (token.kind != TokenKind::identifier) return {};
    return {token.text + "_r"};
  }
};

/// Default resource bundle shipped in data/.
struct Resources {
  WordSet stopwords;
  LexiconSynonyms lexicon;
  SynonymTable phrase_table;

  static std::filesystem::path default_dir() {
    if (const char* env = std::getenv("CPR_DATA_DIR"); env && *env) return env;
#ifdef CPR_DEFAULT_DATA_DIR
    return CPR_DEFAULT_DATA_DIR;
#else
    return "data";
#endif
  }

  static Resources load(const std::filesystem::path& dir = default_dir()) {
    Resources r;
    r.stopwords = load_word_list(dir / "stopwords.txt");
    r.lexicon = LexiconSynonyms(load_synonym_table(dir / "lexicon.tsv"));
    r.phrase_table = load_synonym_table(dir / "phrase_table.tsv");
    return r;
  }
};

}  // namespace cpr
