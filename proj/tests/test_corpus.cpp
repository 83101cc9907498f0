#include <catch2/catch_amalgamated.hpp>

#include "gseo/corpus.hpp"
#include "helpers.hpp"

using namespace gseo;

namespace {

Corpus fixture_corpus() {
  return load_corpus(testutil::fixture_dir() / "corpus_6.jsonl", Adapter::Canonical);
}

}  // namespace

TEST_CASE("canonical fixture loads with a clean validation report", "[corpus]") {
  Corpus c = fixture_corpus();
  ValidationReport r = validate_corpus(c);
  CHECK(r.ok());
  CHECK(r.samples == 6);
  CHECK(r.sources == 7);
  CHECK(r.images == 8);
  CHECK(r.images_without_caption == 2);
}

TEST_CASE("dataset difficulty tiers", "[corpus]") {
  CHECK(dataset_difficulty("wit") == Difficulty::Easy);
  CHECK(dataset_difficulty("wiki") == Difficulty::Easy);
  CHECK(dataset_difficulty("web") == Difficulty::Easy);
  CHECK(dataset_difficulty("arxiv") == Difficulty::Medium);
  CHECK(dataset_difficulty("recipe") == Difficulty::Hard);
  CHECK(dataset_difficulty("manual") == Difficulty::Hard);
  CHECK_THROWS_AS(dataset_difficulty("news"), Error);
}

TEST_CASE("source cardinality is two for web and one elsewhere", "[corpus]") {
  CHECK(expected_source_count("web") == 2);
  CHECK(expected_source_count("wit") == 1);
  Corpus c = fixture_corpus();
  for (const auto& s : c.samples) {
    CHECK(s.sources.size() == expected_source_count(s.dataset));
  }
}

TEST_CASE("benchmark adapter maps alias field names", "[corpus]") {
  Corpus c = load_corpus(testutil::fixture_dir() / "mramg_sample", Adapter::Mramg);
  REQUIRE(c.samples.size() == 2);

  // Directory loads sort by filename: MRAMG-Wit.jsonl before web.jsonl.
  const QuerySample& wit = c.samples[0];
  CHECK(wit.sample_id == "mwit-01");
  CHECK(wit.dataset == "wit");  // from the filename stem
  CHECK(wit.query == "Where do snow leopards live?");
  REQUIRE(wit.sources.size() == 1);
  CHECK(wit.sources[0].source_id == "mwit-01-d1");
  REQUIRE(wit.sources[0].images.size() == 1);
  CHECK(wit.sources[0].images[0].image_id == "mwit-img-7");
  CHECK(wit.sources[0].images[0].locator == "https://img.example.org/leopard.jpg");
  REQUIRE(wit.sources[0].images[0].original_caption.has_value());
  CHECK(*wit.sources[0].images[0].original_caption == "Snow leopard resting on a rocky ledge");

  const QuerySample& web = c.samples[1];
  CHECK(web.dataset == "web");  // "MRAMG-Web" tag, normalized
  REQUIRE(web.sources.size() == 2);
  CHECK(web.sources[1].source_id == "mweb-01-d2");
  CHECK(web.sources[0].images[0].original_caption == "Suspension bridge towers at dusk");
}

TEST_CASE("duplicate sample ids fail the load", "[corpus]") {
  testutil::TempDir tmp;
  std::string rec =
      R"({"sample_id":"dup-1","dataset":"wit","query":"q?","sources":[{"source_id":"s1","text":"Alpha beta."}]})";
  std::string rec2 =
      R"({"sample_id":"dup-1","dataset":"wit","query":"q?","sources":[{"source_id":"s2","text":"Gamma delta."}]})";
  write_file_atomic(tmp.path / "c.jsonl", rec + "\n" + rec2 + "\n");
  try {
    load_corpus(tmp.path / "c.jsonl", Adapter::Canonical);
    FAIL("expected a schema violation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaViolation);
  }
}

TEST_CASE("dangling image reference fails the load", "[corpus]") {
  testutil::TempDir tmp;
  std::string rec =
      R"({"qa_id":"d-1","question":"q?","documents":[{"doc_id":"s1","content":"Alpha beta.","image_ids":["missing-img"]}],"images":[]})";
  write_file_atomic(tmp.path / "wit.jsonl", rec + "\n");
  try {
    load_corpus(tmp.path / "wit.jsonl", Adapter::Mramg);
    FAIL("expected a dangling reference");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DanglingReference);
    CHECK(e.detail().find("missing-img") != std::string::npos);
  }
}

TEST_CASE("wrong source count for the dataset fails the load", "[corpus]") {
  testutil::TempDir tmp;
  std::string rec =
      R"({"sample_id":"w-1","dataset":"web","query":"q?","sources":[{"source_id":"s1","text":"Alpha beta."}]})";
  write_file_atomic(tmp.path / "c.jsonl", rec + "\n");
  CHECK_THROWS_AS(load_corpus(tmp.path / "c.jsonl", Adapter::Canonical), Error);
}

TEST_CASE("missing local image files are flagged, remote locators are not", "[corpus]") {
  testutil::TempDir tmp;
  std::string rec =
      R"({"sample_id":"m-1","dataset":"wit","query":"q?","sources":[{"source_id":"s1","text":"Alpha beta.","images":[{"image_id":"i1","locator":"/nonexistent/img.png"}]}]})";
  write_file_atomic(tmp.path / "c.jsonl", rec + "\n");
  CHECK_THROWS_AS(load_corpus(tmp.path / "c.jsonl", Adapter::Canonical), Error);

  // Same shape with a remote locator loads fine.
  std::string ok =
      R"({"sample_id":"m-2","dataset":"wit","query":"q?","sources":[{"source_id":"s1","text":"Alpha beta.","images":[{"image_id":"i1","locator":"https://x.example/i.png"}]}]})";
  write_file_atomic(tmp.path / "ok.jsonl", ok + "\n");
  Corpus c = load_corpus(tmp.path / "ok.jsonl", Adapter::Canonical);
  CHECK(c.samples.size() == 1);
}

TEST_CASE("whitespace-only captions are treated as absent", "[corpus]") {
  testutil::TempDir tmp;
  std::string rec =
      R"({"sample_id":"c-1","dataset":"wit","query":"q?","sources":[{"source_id":"s1","text":"Alpha beta.","images":[{"image_id":"i1","locator":"https://x.example/i.png","caption":"   "}]}]})";
  write_file_atomic(tmp.path / "c.jsonl", rec + "\n");
  Corpus c = load_corpus(tmp.path / "c.jsonl", Adapter::Canonical);
  CHECK_FALSE(c.samples[0].sources[0].images[0].original_caption.has_value());
  CHECK(validate_corpus(c).images_without_caption == 1);
}

TEST_CASE("caption text keeps inner whitespace, loses only the trailing run", "[corpus]") {
  testutil::TempDir tmp;
  std::string rec =
      R"({"sample_id":"c-2","dataset":"wit","query":"q?","sources":[{"source_id":"s1","text":"Alpha beta.","images":[{"image_id":"i1","locator":"https://x.example/i.png","caption":"a  b\n"}]}]})";
  write_file_atomic(tmp.path / "c.jsonl", rec + "\n");
  Corpus c = load_corpus(tmp.path / "c.jsonl", Adapter::Canonical);
  CHECK(*c.samples[0].sources[0].images[0].original_caption == "a  b");
}

TEST_CASE("select_subset filters by dataset and sample id in corpus order", "[corpus]") {
  Corpus c = fixture_corpus();

  SubsetFilter by_dataset;
  by_dataset.datasets = {"web"};
  Corpus web = select_subset(c, by_dataset, 0);
  REQUIRE(web.samples.size() == 1);
  CHECK(web.samples[0].sample_id == "web-0001");

  SubsetFilter by_id;
  by_id.sample_ids = {"manual-0001", "wit-0001"};
  Corpus two = select_subset(c, by_id, 0);
  REQUIRE(two.samples.size() == 2);
  CHECK(two.samples[0].sample_id == "wit-0001");  // corpus order, not filter order
  CHECK(two.samples[1].sample_id == "manual-0001");
}

TEST_CASE("select_subset limit shuffles deterministically then truncates", "[corpus]") {
  Corpus c = fixture_corpus();
  SubsetFilter f;
  f.limit = 3;
  Corpus a = select_subset(c, f, 7);
  Corpus b = select_subset(c, f, 7);
  REQUIRE(a.samples.size() == 3);
  for (size_t i = 0; i < 3; ++i) CHECK(a.samples[i].sample_id == b.samples[i].sample_id);

  Corpus d = select_subset(c, f, 8);
  bool same = true;
  for (size_t i = 0; i < 3; ++i) same = same && d.samples[i].sample_id == a.samples[i].sample_id;
  CHECK_FALSE(same);  // a different seed reorders this corpus

  SubsetFilter all;
  all.limit = 100;
  CHECK(select_subset(c, all, 7).samples.size() == 6);
}

TEST_CASE("select_subset rejects empty selections and zero limits", "[corpus]") {
  Corpus c = fixture_corpus();
  SubsetFilter none;
  none.datasets = {"nosuch"};
  try {
    select_subset(c, none, 0);
    FAIL("expected empty selection");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySelection);
  }
  SubsetFilter zero;
  zero.limit = 0;
  try {
    select_subset(c, zero, 0);
    FAIL("expected invalid request");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidRequest);
  }
}

TEST_CASE("canonical serialization round-trips", "[corpus]") {
  Corpus c = fixture_corpus();
  testutil::TempDir tmp;
  write_file_atomic(tmp.path / "round.jsonl", corpus_to_jsonl(c));
  Corpus back = load_corpus(tmp.path / "round.jsonl", Adapter::Canonical);
  REQUIRE(back.samples.size() == c.samples.size());
  for (size_t i = 0; i < c.samples.size(); ++i) {
    CHECK(back.samples[i].sample_id == c.samples[i].sample_id);
    CHECK(back.samples[i].dataset == c.samples[i].dataset);
    CHECK(back.samples[i].query == c.samples[i].query);
    REQUIRE(back.samples[i].sources.size() == c.samples[i].sources.size());
    for (size_t j = 0; j < c.samples[i].sources.size(); ++j) {
      CHECK(back.samples[i].sources[j].text == c.samples[i].sources[j].text);
      CHECK(back.samples[i].sources[j].images.size() == c.samples[i].sources[j].images.size());
    }
  }
}

TEST_CASE("unreadable corpus path raises", "[corpus]") {
  try {
    load_corpus("/nonexistent/corpus.jsonl", Adapter::Canonical);
    FAIL("expected unreadable path");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnreadablePath);
  }
}

TEST_CASE("json array files parse like jsonl", "[corpus]") {
  testutil::TempDir tmp;
  std::string body =
      R"([{"sample_id":"a-1","dataset":"wiki","query":"q?","sources":[{"source_id":"s1","text":"Alpha beta."}]}])";
  write_file_atomic(tmp.path / "c.json", body);
  Corpus c = load_corpus(tmp.path / "c.json", Adapter::Canonical);
  REQUIRE(c.samples.size() == 1);
  CHECK(c.samples[0].sample_id == "a-1");
}
