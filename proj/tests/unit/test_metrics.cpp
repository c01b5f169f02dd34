#include <doctest.h>

#include <json.hpp>

#include "memagent/metrics.hpp"
#include "memagent/text.hpp"
#include "test_support.hpp"

using namespace memagent;

namespace {

nlohmann::json load_json(const std::string& rel) {
  return nlohmann::json::parse(memagent::testing::read_file(memagent::testing::data_path(rel)));
}

}  // namespace

TEST_CASE("BLEU identity and empty") {
  CHECK(sentence_bleu4("the cat sat on the mat", "the cat sat on the mat") == doctest::Approx(100.0));
  const std::vector<std::string> c{"the cat sat on the mat"}, r{"the cat sat on the mat"};
  CHECK(bleu4(c, r) == doctest::Approx(100.0));
  CHECK(sentence_bleu4("", "the cat sat on the mat") == 0.0);
  const std::vector<std::string> e{""};
  CHECK(bleu4(e, r) == 0.0);
}

TEST_CASE("BLEU input validation") {
  const std::vector<std::string> one{"a"}, two{"a", "b"}, none;
  CHECK_THROWS_AS(bleu4(one, two), ArgumentError);
  CHECK_THROWS_AS(bleu4(none, none), ArgumentError);
}

TEST_CASE("BLEU matches the independent oracle on the 50-pair corpus") {
  const auto oracle = load_json("fixtures/bleu_oracle.json");
  std::vector<std::string> cands, refs;
  for (const auto& p : oracle["pairs"]) {
    cands.push_back(p["candidate"]);
    refs.push_back(p["reference"]);
    CAPTURE(p["candidate"].get<std::string>());
    CAPTURE(p["reference"].get<std::string>());
    CHECK(std::abs(sentence_bleu4(cands.back(), refs.back()) - p["sentence_bleu"].get<double>()) <= 1e-4);
  }
  REQUIRE(cands.size() == 50);
  CHECK(std::abs(bleu4(cands, refs) - oracle["corpus_bleu"].get<double>()) <= 1e-4);
}

TEST_CASE("BLEU ignores case and punctuation") {
  CHECK(sentence_bleu4("On the wooden table!", "on the wooden table") == doctest::Approx(100.0));
}

TEST_CASE("METEOR hand-evaluated cases") {
  // m=3, one chunk: penalty 0.5 * (1/3)^3.
  CHECK(meteor("a b c", "a b c") == doctest::Approx(100.0 * (1.0 - 0.5 / 27.0)).epsilon(1e-9));
  CHECK(std::abs(meteor("a b c", "a b c") - 98.15) <= 0.01);
  // P=1, R=3/4, Fmean=0.75/0.975, two chunks over three matches.
  CHECK(meteor("the cat sat", "the cat was sat") ==
        doctest::Approx(100.0 * (0.75 / 0.975) * (1.0 - 0.5 * 8.0 / 27.0)).epsilon(1e-9));
  // Stem matches only: running~run, dogs~dog; one chunk of two.
  CHECK(meteor("running dogs", "run dog") == doctest::Approx(93.75));
  CHECK(meteor("zebra quartz", "mug table") == 0.0);
  CHECK(meteor("", "a b") == 0.0);
  CHECK(meteor("a b", "") == 0.0);
}

TEST_CASE("METEOR alignment prefers adjacency") {
  const auto al = meteor_alignment({"the", "mug", "the", "table"}, {"the", "table"});
  CHECK(al.matches == 2);
  CHECK(al.chunks == 1);
}

TEST_CASE("ROUGE-L") {
  CHECK(rouge_l_f("a b c d", "a c d e") == 75.0);
  CHECK(rouge_l_f("the red mug", "the red mug") == 100.0);
  CHECK(rouge_l_f("", "a") == 0.0);
  CHECK(rouge_l_f("the cat", "cat the") == 50.0);
  CHECK(lcs_length({"a", "b", "c", "d"}, {"a", "c", "d", "e"}) == 3);
  CHECK(lcs_length({}, {"a"}) == 0);
}

TEST_CASE("Porter stemmer matches the reference word list") {
  const auto oracle = load_json("fixtures/porter_oracle.json");
  REQUIRE(oracle.size() > 100);
  for (const auto& [word, stem] : oracle.items()) {
    CAPTURE(word);
    CHECK(porter_stem(word) == stem.get<std::string>());
  }
}

TEST_CASE("identity scores") {
  const std::string s = "i put the keys in the blue drawer";
  CHECK(sentence_bleu4(s, s) == doctest::Approx(100.0));
  CHECK(rouge_l_f(s, s) == 100.0);
  const double m = static_cast<double>(normalized_words(s).size());
  CHECK(meteor(s, s) == doctest::Approx(100.0 * (1.0 - 0.5 / (m * m * m))));
}
