#include <doctest.h>

#include "fedwatch/text.hpp"
#include "test_util.hpp"

using namespace fedwatch;

TEST_CASE("tokenize_post counts mentions, hashtags and URLs") {
  auto t = tokenize_post("Hi @bob@x.y see https://a.b #news");
  CHECK(t.mentions == 1);
  CHECK(t.hashtags == 1);
  CHECK(t.urls == 1);
  CHECK(t.tokens == std::vector<std::string>{"hi", "see"});
}

TEST_CASE("empty content") {
  auto t = tokenize_post("");
  CHECK(t.tokens.empty());
  CHECK(t.mentions == 0);
  CHECK(t.hashtags == 0);
  CHECK(t.urls == 0);
}

TEST_CASE("markup is stripped before matching") {
  auto t = tokenize_post("<p>@a @b</p>");
  CHECK(t.mentions == 2);
  CHECK(t.tokens.empty());

  // Pleroma renders mentions and hashtags as nested anchors.
  auto html = tokenize_post(
      R"(<p><span class="h-card"><a class="u-url mention" href="https://x.example/users/al">@<span>al</span></a></span> )"
      R"(look <a class="hashtag" href="https://x.example/tag/cats" rel="tag">#<span>cats</span></a> &amp; dogs<br/>)"
      R"(<a href="https://news.example/a?b=1">https://news.example/a?b=1</a></p>)");
  CHECK(html.mentions == 1);
  CHECK(html.hashtags == 1);
  CHECK(html.urls == 1);
  CHECK(html.tokens == std::vector<std::string>{"look", "dogs"});
}

TEST_CASE("emails, URL fragments and entities are not mentions or hashtags") {
  auto t = tokenize_post("mail me at me@x.example or https://x.example/#frag &#39;quoted&#39;");
  CHECK(t.mentions == 0);
  CHECK(t.hashtags == 0);
  CHECK(t.urls == 1);
}

TEST_CASE("count_hate_words") {
  HateLexicon lex({"foo", "bar baz"});
  CHECK(count_hate_words(tokenize_post("foo and bar baz").tokens, lex) == 2);
  CHECK(count_hate_words(tokenize_post("nothing to see").tokens, lex) == 0);
  CHECK(count_hate_words(tokenize_post("foo foo").tokens, lex) == 2);
  CHECK(count_hate_words(tokenize_post("bar qux baz").tokens, lex) == 0);
}

TEST_CASE("overlapping terms count once per start position") {
  HateLexicon lex({"bar", "bar baz"});
  CHECK(count_hate_words(split_tokens("bar baz bar"), lex) == 2);
}

TEST_CASE("empty lexicon is an error") {
  CHECK_THROWS_AS(count_hate_words({"x"}, HateLexicon{}), Error);
}

TEST_CASE("shipped test lexicon has 50 terms") {
  auto lex = HateLexicon::load(fedwatch::testing::fixture("lexicon_test.txt"));
  CHECK(lex.size() == 50);
  CHECK(count_hate_words(split_tokens("SLUR01 and a Hate Phrase03"), lex) == 2);
}
