#include "fedwatch/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>

namespace fedwatch {

namespace {

std::string strip_markup(std::string_view html) {
  std::string out;
  out.reserve(html.size());
  bool in_tag = false;
  for (std::size_t i = 0; i < html.size(); ++i) {
    const char c = html[i];
    if (in_tag) {
      if (c == '>') in_tag = false;
      continue;
    }
    if (c == '<') {
      in_tag = true;
      // Block-level breaks separate words.
      const auto rest = html.substr(i + 1, 3);
      if (rest.starts_with("br") || rest.starts_with("p") || rest.starts_with("/p")) out.push_back(' ');
      continue;
    }
    out.push_back(c);
  }
  static const std::pair<std::string_view, std::string_view> entities[] = {
      {"&amp;", "&"}, {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&#39;", "'"}, {"&apos;", "'"},
      {"&nbsp;", " "}};
  for (const auto& [from, to] : entities) {
    std::size_t pos = 0;
    while ((pos = out.find(from, pos)) != std::string::npos) {
      out.replace(pos, from.size(), to);
      pos += to.size();
    }
  }
  return out;
}

// Replaces every match of `re` (group `keep` preserved as prefix) with a space and counts it.
std::int64_t cut_matches(std::string& text, const std::regex& re, int keep_group) {
  std::int64_t n = 0;
  std::string out;
  out.reserve(text.size());
  auto begin = std::sregex_iterator(text.begin(), text.end(), re);
  std::size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    out.append(text, last, static_cast<std::size_t>(m.position(0)) - last);
    if (keep_group > 0) out.append(m[keep_group].str());
    out.push_back(' ');
    last = static_cast<std::size_t>(m.position(0) + m.length(0));
    ++n;
  }
  out.append(text, last, std::string::npos);
  text = std::move(out);
  return n;
}

}  // namespace

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    // Bytes >= 0x80 belong to UTF-8 letters; keep them inside tokens.
    if (std::isalnum(c) || c >= 0x80 || c == '_') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

TokenizedPost tokenize_post(std::string_view content) {
  static const std::regex url_re(R"([A-Za-z][A-Za-z0-9+.\-]*://[^\s<>"]+)");
  static const std::regex mention_re(
      R"((^|[^A-Za-z0-9_@/]))"
      R"(@[A-Za-z0-9_]+(?:@[A-Za-z0-9\-]+(?:\.[A-Za-z0-9\-]+)+)?)");
  static const std::regex hashtag_re(R"((^|[^A-Za-z0-9_&#/]))" R"(#[A-Za-z0-9_]+)");

  TokenizedPost out;
  std::string text = strip_markup(content);
  out.urls = cut_matches(text, url_re, 0);
  out.mentions = cut_matches(text, mention_re, 1);
  out.hashtags = cut_matches(text, hashtag_re, 1);
  out.tokens = split_tokens(text);
  return out;
}

HateLexicon::HateLexicon(const std::vector<std::string>& terms) {
  std::set<std::vector<std::string>> seen;
  for (const auto& t : terms) {
    auto run = split_tokens(t);
    if (!run.empty() && seen.insert(run).second) terms_.push_back(std::move(run));
  }
}

HateLexicon HateLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read lexicon " + path.string());
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    terms.push_back(line);
  }
  return HateLexicon(terms);
}

std::int64_t count_hate_words(const std::vector<std::string>& tokens, const HateLexicon& lexicon) {
  if (lexicon.empty()) throw Error("hate lexicon is empty");
  std::int64_t count = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const bool hit = std::any_of(lexicon.terms().begin(), lexicon.terms().end(), [&](const auto& term) {
      return i + term.size() <= tokens.size() &&
             std::equal(term.begin(), term.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i));
    });
    if (hit) ++count;
  }
  return count;
}

}  // namespace fedwatch
