#include <doctest.h>

#include <algorithm>
#include <set>

#include "geoicl/corpus.hpp"
#include "test_support.hpp"

using namespace geoicl;
using namespace geoicl::testing;

namespace {

std::string record_line(const std::string& id, const std::string& split,
                        const std::string& qtype = "selection",
                        const std::string& source = "GeoMath") {
  GeoRecord rec = make_record(id, "What is the area of square " + id + "?");
  rec.split = split_from_string(split);
  rec.qtype = qtype_from_string(qtype);
  rec.source = source_from_string(source);
  if (rec.qtype == QuestionType::Cloze)
    rec.answer = AnswerValue::make_numeric(4.0);
  if (rec.qtype == QuestionType::Proving) rec.answer = AnswerValue::make_text("");
  return record_to_json_line(rec);
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("fixture of six valid lines loads six records") {
  TempDir dir("corpus");
  write_lines(dir / "d.jsonl",
              {record_line("q1", "train"), record_line("q2", "train"),
               record_line("q3", "val"), record_line("q4", "test"),
               record_line("q5", "train", "cloze"),
               record_line("q6", "train", "proving")});
  auto result = load_dataset(dir / "d.jsonl");
  CHECK(result.records.size() == 6);
  CHECK(result.skipped.empty());
  CHECK(result.records[0].id == "q1");
  CHECK(result.records[4].qtype == QuestionType::Cloze);
}

TEST_CASE("duplicate id on lines 2 and 5 is rejected with both lines") {
  TempDir dir("corpus");
  write_lines(dir / "d.jsonl",
              {record_line("q0", "train"), record_line("q1", "train"),
               record_line("q2", "train"), record_line("q3", "train"),
               record_line("q1", "val")});
  try {
    load_dataset(dir / "d.jsonl");
    FAIL("expected DuplicateId");
  } catch (const Error& e) {
    CHECK(e.kind() == "DuplicateId");
    CHECK(std::string(e.what()).find("q1") != std::string::npos);
    CHECK(std::string(e.what()).find("2,5") != std::string::npos);
  }
}

TEST_CASE("missing image file is rejected with its line number") {
  TempDir dir("corpus");
  GeoRecord rec = make_record("q1", "question text");
  rec.image = ImageRef{"img/does_not_exist.png", ""};
  write_lines(dir / "d.jsonl", {record_to_json_line(rec)});
  try {
    load_dataset(dir / "d.jsonl");
    FAIL("expected MissingImage");
  } catch (const Error& e) {
    CHECK(e.kind() == "MissingImage");
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    CHECK(std::string(e.what()).find("q1") != std::string::npos);
  }
}

TEST_CASE("lenient mode skips bad records and keeps the rest") {
  TempDir dir("corpus");
  write_lines(dir / "d.jsonl",
              {record_line("q1", "train"), "{not json",
               record_line("q2", "train"), record_line("q1", "test")});
  LoadOptions opts;
  opts.lenient = true;
  auto result = load_dataset(dir / "d.jsonl", kDatasetSchemaVersion, opts);
  CHECK(result.records.size() == 2);
  REQUIRE(result.skipped.size() == 2);
  CHECK(result.skipped[0].line == 2);
  CHECK(result.skipped[1].line == 4);
}

TEST_CASE("malformed records carry line and reason") {
  TempDir dir("corpus");
  GeoRecord rec = make_record("q1", "q");
  rec.qtype = QuestionType::Cloze;  // still carries a choice answer
  write_lines(dir / "d.jsonl", {record_to_json_line(rec)});
  CHECK_THROWS_AS(load_dataset(dir / "d.jsonl"), MalformedRecordError);
}

TEST_CASE("selection invariants: choice count and index range") {
  CHECK_THROWS_AS(AnswerValue::make_choice(0, {"only"}), Error);
  CHECK_THROWS_AS(AnswerValue::make_choice(4, {"a", "b", "c", "d"}), Error);
  CHECK_THROWS_AS(
      AnswerValue::make_choice(0, {"1", "2", "3", "4", "5", "6", "7", "8", "9"}),
      Error);
  CHECK(AnswerValue::make_choice(7, {"1", "2", "3", "4", "5", "6", "7", "8"})
            .choice_index == 7);
}

TEST_CASE("unknown schema version is refused") {
  TempDir dir("corpus");
  write_lines(dir / "d.jsonl", {record_line("q1", "train")});
  CHECK_THROWS_AS(load_dataset(dir / "d.jsonl", "v9"), Error);
}

TEST_CASE("round-trip: canonical write is a byte-level fixed point") {
  TempDir dir("corpus");
  // Mixed fixture with unicode, steps, all answer kinds.
  GeoRecord a = make_record("a1", "In △ABC, ∠B = 90°, find AC.");
  a.solution_steps = {"By Pythagoras AC² = AB² + BC².", "AC = 5."};
  GeoRecord b = make_record("b2", "Volume of the cube?", Split::Val,
                            QuestionType::Cloze, AnswerValue::make_numeric(27));
  GeoRecord c = make_record("c3", "Prove AB ∥ CD.", Split::Test,
                            QuestionType::Proving, AnswerValue::make_text(""));
  c.language = Language::Zh;
  write_dataset({a, b, c}, dir / "one.jsonl");
  auto loaded1 = load_dataset(dir / "one.jsonl").records;
  write_dataset(loaded1, dir / "two.jsonl");
  auto loaded2 = load_dataset(dir / "two.jsonl").records;
  write_dataset(loaded2, dir / "three.jsonl");

  CHECK(read_file(dir / "two.jsonl") == read_file(dir / "three.jsonl"));
  REQUIRE(loaded1.size() == 3);
  CHECK(loaded1[0].solution_steps.size() == 2);
  CHECK(loaded1[1].answer.numeric == 27);
  CHECK(loaded1[2].language == Language::Zh);
}

TEST_CASE("filter_split partitions the dataset") {
  Dataset d = {make_record("a", "q", Split::Train),
               make_record("b", "q", Split::Test)};
  auto test = filter_split(d, Split::Test);
  REQUIRE(test.size() == 1);
  CHECK(test[0].id == "b");
  CHECK(filter_split(d, Split::Val).empty());

  // train ∪ val ∪ test = dataset
  Dataset big;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    auto split = static_cast<Split>(rng() % 3);
    big.push_back(make_record("r" + std::to_string(i), "q", split));
  }
  auto tr = filter_split(big, Split::Train);
  auto va = filter_split(big, Split::Val);
  auto te = filter_split(big, Split::Test);
  CHECK(tr.size() + va.size() + te.size() == big.size());
  std::set<std::string> ids;
  for (const auto& part : {tr, va, te})
    for (const auto& rec : part) ids.insert(rec.id);
  CHECK(ids.size() == big.size());
}

TEST_CASE("compute_stats counts by source, qtype and split") {
  Dataset d;
  for (int i = 0; i < 3; ++i)
    d.push_back(make_record("s" + std::to_string(i), "q", Split::Train));
  d.push_back(make_record("s3", "q", Split::Test));
  d.push_back(make_record("c0", "q", Split::Train, QuestionType::Cloze,
                          AnswerValue::make_numeric(1)));
  d.push_back(make_record("c1", "q", Split::Val, QuestionType::Cloze,
                          AnswerValue::make_numeric(2)));
  auto stats = compute_stats(d);
  CHECK(stats.total == 6);
  CHECK(stats.count(Source::GeoMath, QuestionType::Selection) == 4);
  CHECK(stats.count_test(Source::GeoMath, QuestionType::Selection) == 1);
  CHECK(stats.count(Source::GeoMath, QuestionType::Cloze) == 2);
  CHECK(stats.count_test(Source::GeoMath, QuestionType::Cloze) == 0);
  CHECK(stats.count(Source::UniGeo, QuestionType::Proving) == 0);
}

TEST_CASE("empty dataset gives an all-zero table") {
  auto stats = compute_stats({});
  CHECK(stats.total == 0);
  for (int s = 0; s < DatasetStats::kSources; ++s)
    for (int t = 0; t < DatasetStats::kTypes; ++t)
      for (int sp = 0; sp < DatasetStats::kSplits; ++sp)
        CHECK(stats.counts[s][t][sp] == 0);
  auto table = render_stats_table(stats);
  CHECK(table.find("QA-selection") != std::string::npos);
}

TEST_CASE("stats are a pure function of the record multiset") {
  Dataset d = {make_record("a", "q", Split::Train),
               make_record("b", "q", Split::Test),
               make_record("c", "q", Split::Val, QuestionType::Cloze,
                           AnswerValue::make_numeric(1))};
  auto s1 = compute_stats(d);
  std::reverse(d.begin(), d.end());
  auto s2 = compute_stats(d);
  CHECK(s1.counts == s2.counts);
  CHECK(s1.image_text_pairs == s2.image_text_pairs);
  CHECK(render_stats_table(s1) == render_stats_table(s2));
}

// Full-size synthetic ingest shaped like the published GeoMath statistics:
// 4258 selection (404 test) and 1423 cloze (150 test).
TEST_CASE("GeoMath-shaped ingest reproduces the reference rows") {
  TempDir dir("corpus_big");
  std::vector<std::string> lines;
  lines.reserve(4258 + 1423);
  auto add = [&](int n, int n_test, const std::string& prefix,
                 const std::string& qtype) {
    for (int i = 0; i < n; ++i)
      lines.push_back(record_line(prefix + std::to_string(i),
                                  i < n_test ? "test" : "train", qtype));
  };
  add(4258, 404, "sel", "selection");
  add(1423, 150, "clz", "cloze");
  write_lines(dir / "geomath.jsonl", lines);

  auto result = load_dataset(dir / "geomath.jsonl");
  auto stats = compute_stats(result.records);
  CHECK(stats.count(Source::GeoMath, QuestionType::Selection) == 4258);
  CHECK(stats.count_test(Source::GeoMath, QuestionType::Selection) == 404);
  CHECK(stats.count(Source::GeoMath, QuestionType::Cloze) == 1423);
  CHECK(stats.count_test(Source::GeoMath, QuestionType::Cloze) == 150);

  auto table = render_stats_table(stats);
  CHECK(table.find("4258(404)") != std::string::npos);
  CHECK(table.find("1423(150)") != std::string::npos);
}

TEST_CASE("load_image decodes inline and file references") {
  TempDir dir("corpus_img");
  ImageRaster img = checker_image(3, 2, 3);
  write_png(img, dir / "x.png");

  GeoRecord by_path = make_record("p", "q");
  by_path.image = ImageRef{"x.png", ""};
  CHECK(load_image(by_path, dir.path()) == img);

  GeoRecord by_inline = make_record("i", "q");
  by_inline.image = inline_ref(img);
  CHECK(load_image(by_inline, dir.path()) == img);
}

}  // TEST_SUITE
