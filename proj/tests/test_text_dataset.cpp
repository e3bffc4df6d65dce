#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "doctest.h"
#include "halluscore/dataset.hpp"
#include "halluscore/error.hpp"
#include "halluscore/rng.hpp"
#include "halluscore/text.hpp"

using namespace halluscore;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

}  // namespace

TEST_SUITE("core-model") {

TEST_CASE("normalize_text folds case, whitespace and edge punctuation") {
  CHECK(normalize_text("  The  Answer! ") == "the answer");
  CHECK(normalize_text("") == "");
  CHECK(normalize_text("Paris") == "paris");
  CHECK(normalize_text("\tA B\n") == "a b");
  CHECK(normalize_text("“Quoted”") == "quoted");
  CHECK(normalize_text("it's fine") == "it's fine");
  CHECK(normalize_text("FULLWIDTHＡ") == "fullwidtha");
  CHECK(normalize_text("!!") == "");
}

TEST_CASE("label_by_containment follows normalized substring rule") {
  CHECK(label_by_containment("Paris", "The capital is Paris.") == 1);
  CHECK(label_by_containment("London", "The capital is Paris.") == 0);
  CHECK_THROWS_AS((void)label_by_containment("!!", "anything"), Error);
}

TEST_CASE("label_by_containment ignores case, edge punctuation, spacing") {
  // decorate both sides with formatting noise; the label must not move
  Rng rng(404);
  const std::string ref = "Mount Everest";
  const std::string resp = "the tallest mountain is Mount Everest indeed";
  const char* prefixes[] = {"", "  ", "\"", "('", "\t “"};
  const char* suffixes[] = {"", "!", "??", "  .", "”)."};
  for (int trial = 0; trial < 50; ++trial) {
    std::string r = ref;
    std::string s = resp;
    if (rng.bernoulli(0.5)) {
      for (auto& c : r)
        if (c >= 'a' && c <= 'z') c = char(c - 32);
    }
    r = prefixes[rng.below(5)] + r + suffixes[rng.below(5)];
    s = prefixes[rng.below(5)] + s + suffixes[rng.below(5)];
    CHECK(label_by_containment(r, s) == 1);
    CHECK(label_by_containment("K2", s) == 0);
  }
}

TEST_CASE("load_dataset keeps order, extras and optional fields") {
  const auto path = temp_file("hs_dataset_ok.jsonl");
  write_file(path,
             R"({"id":"a","input":"q1","response":"r1","label":1,"source":"unit"})"
             "\n"
             R"({"id":"b","input":"q2","response":"r2","reference_answer":"x","samples":["s1","s2"]})"
             "\n");
  const Dataset d = load_dataset(path.string());
  REQUIRE(d.size() == 2);
  CHECK(d.examples[0].id == "a");
  CHECK(d.examples[0].label == 1);
  CHECK(d.examples[0].extras.at("source") == "\"unit\"");
  CHECK(d.examples[1].id == "b");
  CHECK(!d.examples[1].label.has_value());
  CHECK(d.examples[1].reference_answer == "x");
  REQUIRE(d.examples[1].samples.size() == 2);
  CHECK(d.examples[1].samples[1] == "s2");
  std::filesystem::remove(path);
}

TEST_CASE("load_dataset rejects duplicates, empties and bad lines") {
  const auto dup = temp_file("hs_dataset_dup.jsonl");
  write_file(dup,
             R"({"id":"a","input":"q","response":"r"})"
             "\n"
             R"({"id":"a","input":"q","response":"r"})"
             "\n");
  CHECK_THROWS_WITH_AS((void)load_dataset(dup.string()),
                       doctest::Contains("\"a\""), Error);

  const auto empty = temp_file("hs_dataset_empty.jsonl");
  write_file(empty, "");
  CHECK_THROWS_AS((void)load_dataset(empty.string()), Error);

  const auto bad = temp_file("hs_dataset_bad.jsonl");
  write_file(bad, R"({"id":"a","input":"q","response":"r"})"
                  "\nnot json\n");
  CHECK_THROWS_WITH_AS((void)load_dataset(bad.string()),
                       doctest::Contains("line 2"), Error);

  const auto badlabel = temp_file("hs_dataset_badlabel.jsonl");
  write_file(badlabel, R"({"id":"a","input":"q","response":"r","label":2})"
                       "\n");
  CHECK_THROWS_AS((void)load_dataset(badlabel.string()), Error);

  for (const auto& p : {dup, empty, bad, badlabel}) std::filesystem::remove(p);
}

TEST_CASE("dataset round-trips through save and load") {
  Dataset d;
  d.name = "roundtrip";
  Example a;
  a.id = "a";
  a.input = "what is “up”?";
  a.response = "nothing\nmuch";
  a.label = 0;
  a.extras["weird"] = "[1,2,{\"k\":null}]";
  Example b;
  b.id = "b";
  b.input = "q";
  b.response = "r";
  b.reference_answer = "r";
  b.samples = {"one", "two", "three"};
  d.examples = {a, b};

  const auto path = temp_file("hs_dataset_rt.jsonl");
  save_dataset(d, path.string());
  const Dataset back = load_dataset(path.string());
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.examples[i].id == d.examples[i].id);
    CHECK(back.examples[i].input == d.examples[i].input);
    CHECK(back.examples[i].response == d.examples[i].response);
    CHECK(back.examples[i].label == d.examples[i].label);
    CHECK(back.examples[i].reference_answer == d.examples[i].reference_answer);
    CHECK(back.examples[i].samples == d.examples[i].samples);
    CHECK(back.examples[i].extras == d.examples[i].extras);
  }
  std::filesystem::remove(path);
}

TEST_CASE("split_dataset sizes, determinism and degenerate input") {
  Dataset d;
  d.name = "split";
  for (int i = 0; i < 10; ++i) {
    Example ex;
    ex.id = "ex" + std::to_string(i);
    ex.input = "q";
    ex.response = "r";
    d.examples.push_back(ex);
  }
  const SplitAssignment s1 = split_dataset(d, 0.8, 7);
  CHECK(s1.calibration_ids.size() == 8);
  CHECK(s1.test_ids.size() == 2);

  const SplitAssignment s2 = split_dataset(d, 0.8, 7);
  CHECK(s1.calibration_ids == s2.calibration_ids);
  CHECK(s1.test_ids == s2.test_ids);

  const SplitAssignment s3 = split_dataset(d, 0.8, 8);
  CHECK(s1.calibration_ids != s3.calibration_ids);

  Dataset tiny;
  tiny.name = "tiny";
  Example only;
  only.id = "x";
  only.input = "q";
  only.response = "r";
  tiny.examples = {only};
  CHECK_THROWS_AS((void)split_dataset(tiny, 0.8, 1), Error);
  CHECK_THROWS_AS((void)split_dataset(d, 0.0, 1), Error);
  CHECK_THROWS_AS((void)split_dataset(d, 1.0, 1), Error);
}

TEST_CASE("split_dataset partitions the id set for many seeds and sizes") {
  for (std::size_t n : {2u, 3u, 5u, 17u, 64u}) {
    Dataset d;
    d.name = "part";
    for (std::size_t i = 0; i < n; ++i) {
      Example ex;
      ex.id = "id" + std::to_string(i);
      ex.input = "q";
      ex.response = "r";
      d.examples.push_back(ex);
    }
    for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
      const auto split = split_dataset(d, 0.5, seed);
      std::set<std::string> all(split.calibration_ids.begin(),
                                split.calibration_ids.end());
      for (const auto& id : split.test_ids) {
        CHECK(all.insert(id).second);  // disjointness
      }
      CHECK(all.size() == n);  // coverage
    }
  }
}

TEST_CASE("scorer kind names round-trip") {
  const ScorerKind kinds[] = {
      {ScorerBase::PTrue, 0},
      {ScorerBase::PTrueVerbalized, 0},
      {ScorerBase::PInputContradict, 0},
      {ScorerBase::PSelfContradict, 0},
      {ScorerBase::PFactContradict, 0},
      {ScorerBase::InversePerplexity, 0},
      {ScorerBase::NliDirect, 0},
      {ScorerBase::SelfCheckNli, 3},
      {ScorerBase::SimilarityDegree, 10},
      {ScorerBase::HallucinationRail, 2},
  };
  for (const auto& kind : kinds) {
    CHECK(parse_scorer_kind(to_string(kind)) == kind);
  }
  CHECK(to_string(ScorerKind{ScorerBase::SelfCheckNli, 3}) ==
        "selfcheck_nli_k3");
  CHECK_THROWS_AS((void)parse_scorer_kind("nope"), Error);
  CHECK_THROWS_AS((void)parse_scorer_kind("selfcheck_nli_k0"), Error);
  CHECK_THROWS_AS((void)parse_scorer_kind("selfcheck_nli_kx"), Error);
}

TEST_CASE("score matrix indexing and missing mask") {
  auto m = ScoreMatrix::create({"a", "b"},
                               {{ScorerBase::PTrue, 0},
                                {ScorerBase::NliDirect, 0}});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 2);
  CHECK(!m.has(0, 0));
  m.set(0, 1, 0.25);
  CHECK(m.has(0, 1));
  CHECK(m.at(0, 1) == 0.25);
  m.clear(0, 1);
  CHECK(!m.has(0, 1));
  CHECK(m.row_of("b") == 1);
  CHECK(m.col_of({ScorerBase::NliDirect, 0}) == 1);
  CHECK_THROWS_AS((void)m.row_of("zz"), Error);
}

}  // TEST_SUITE
