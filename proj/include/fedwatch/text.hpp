#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fedwatch/types.hpp"

namespace fedwatch {

struct TokenizedPost {
  std::vector<std::string> tokens;  // lowercased remainder after mentions/hashtags/URLs are cut out
  std::int64_t mentions = 0;
  std::int64_t hashtags = 0;
  std::int64_t urls = 0;
};

/// Strips HTML markup and entities. Mentions are @name or @name@domain,
/// hashtags #word, URLs scheme://... runs.
TokenizedPost tokenize_post(std::string_view content);

/// Lowercase alphanumeric split used for both post bodies and lexicon terms.
std::vector<std::string> split_tokens(std::string_view text);

class HateLexicon {
 public:
  HateLexicon() = default;
  explicit HateLexicon(const std::vector<std::string>& terms);

  /// One term per line; blank lines and lines starting with '#' are skipped.
  static HateLexicon load(const std::filesystem::path& path);

  bool empty() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }
  const std::vector<std::vector<std::string>>& terms() const { return terms_; }

 private:
  std::vector<std::vector<std::string>> terms_;  // each term as a token run
};

/// Occurrences of lexicon terms in `tokens`. Multi-word terms match as
/// contiguous runs; several terms matching at one start position count once.
/// Throws Error on an empty lexicon.
std::int64_t count_hate_words(const std::vector<std::string>& tokens, const HateLexicon& lexicon);

}  // namespace fedwatch
