#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "dhcn/common.hpp"
#include "dhcn/data.hpp"
#include "dhcn/rng.hpp"
#include "doctest.h"

using namespace dhcn;

namespace {

// writes content to a scratch file in the working directory and removes it
// when the test ends
struct ScratchFile {
  std::string path;
  explicit ScratchFile(const std::string& name, const std::string& content)
      : path("scratch_" + name) {
    std::ofstream out(path, std::ios::binary);
    out << content;
  }
  ~ScratchFile() { std::remove(path.c_str()); }
};

RawSession session(std::string id, std::vector<std::string> items,
                   std::optional<std::int64_t> ts = std::nullopt) {
  return RawSession{std::move(id), std::move(items), ts};
}

}  // namespace

TEST_CASE("load_sessions parses the line format") {
  ScratchFile f("ok.tsv",
                "s1\t12 7 12 3\n"
                "\n"
                "s2\t4 5\t1700000000\n");
  std::vector<RawSession> got = load_sessions(f.path);
  REQUIRE(got.size() == 2);
  CHECK(got[0].session_id == "s1");
  CHECK(got[0].items == std::vector<std::string>{"12", "7", "12", "3"});
  CHECK(!got[0].timestamp.has_value());
  CHECK(got[1].items == std::vector<std::string>{"4", "5"});
  CHECK(got[1].timestamp.value() == 1700000000);
}

TEST_CASE("load_sessions rejects malformed lines with line numbers") {
  {
    ScratchFile f("empty_items.tsv", "s1\t1 2\ns2\t\n");
    CHECK_THROWS_WITH_AS(load_sessions(f.path), doctest::Contains("line 2"), ParseError);
  }
  {
    ScratchFile f("no_tab.tsv", "justonefield\n");
    CHECK_THROWS_WITH_AS(load_sessions(f.path), doctest::Contains("line 1"), ParseError);
  }
  {
    ScratchFile f("bad_ts.tsv", "s1\t1 2\tnotanumber\n");
    CHECK_THROWS_WITH_AS(load_sessions(f.path), doctest::Contains("line 1"), ParseError);
  }
  {
    ScratchFile f("too_many.tsv", "s1\t1 2\t10\textra\n");
    CHECK_THROWS_AS(load_sessions(f.path), ParseError);
  }
  {
    ScratchFile f("blank.tsv", "\n\n");
    CHECK_THROWS_AS(load_sessions(f.path), DataError);
  }
  CHECK_THROWS_AS(load_sessions("does_not_exist.tsv"), IoError);
}

TEST_CASE("filter_dataset removes rare items then short sessions") {
  // item "r" appears 4 times over the corpus, below the threshold of 5
  std::vector<RawSession> in = {
      session("a", {"x", "r", "x", "y"}),  //
      session("b", {"r", "x", "y"}),       //
      session("c", {"r", "y", "x"}),       //
      session("d", {"r", "y"}),            // reduced to just "y" -> dropped
      session("e", {"x", "y", "y"}),
  };
  FilterStats stats;
  std::vector<RawSession> out = filter_dataset(in, 5, 2, &stats);
  REQUIRE(out.size() == 4);
  for (const RawSession& s : out)
    for (const std::string& item : s.items) CHECK(item != "r");
  CHECK(out[0].items == std::vector<std::string>{"x", "x", "y"});
  CHECK(out[3].items == std::vector<std::string>{"x", "y", "y"});
  CHECK(stats.items_removed == 1);
  CHECK(stats.sessions_dropped == 1);

  // no-op thresholds leave the corpus untouched
  std::vector<RawSession> same = filter_dataset(in, 1, 1);
  REQUIRE(same.size() == in.size());
  for (std::size_t i = 0; i < in.size(); ++i) CHECK(same[i].items == in[i].items);

  // idempotence: refiltering this output changes nothing (the surviving
  // items still clear the frequency bar after the session drop)
  FilterStats again_stats;
  std::vector<RawSession> again = filter_dataset(out, 5, 2, &again_stats);
  REQUIRE(again.size() == out.size());
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(again[i].items == out[i].items);
  CHECK(again_stats.items_removed == 0);
  CHECK(again_stats.sessions_dropped == 0);

  CHECK_THROWS_AS(filter_dataset({session("a", {"q", "w"})}, 5, 2), DataError);
  CHECK_THROWS_AS(filter_dataset({}, 5, 2), ContractError);
}

TEST_CASE("split_train_test takes the temporal tail") {
  std::vector<RawSession> ten;
  for (int i = 0; i < 10; ++i) ten.push_back(session("s" + std::to_string(i), {"a", "b"}));
  auto [train, test] = split_train_test(ten, 0.2);
  CHECK(train.size() == 8);
  REQUIRE(test.size() == 2);
  CHECK(test[0].session_id == "s8");
  CHECK(test[1].session_id == "s9");

  // ceiling rule: 0.5 of 3 sessions -> 2 test, 1 train
  std::vector<RawSession> three = {session("a", {"x"}), session("b", {"x"}),
                                   session("c", {"x"})};
  auto [tr3, te3] = split_train_test(three, 0.5);
  CHECK(tr3.size() == 1);
  CHECK(te3.size() == 2);

  // timestamps out of file order: split follows time order
  std::vector<RawSession> timed = {
      session("late", {"x"}, 300),
      session("early", {"x"}, 100),
      session("mid", {"x"}, 200),
  };
  auto [trt, tet] = split_train_test(timed, 0.3);
  REQUIRE(tet.size() == 1);
  CHECK(tet[0].session_id == "late");
  CHECK(trt[0].session_id == "early");

  // a session without a timestamp keeps the whole list in input order
  std::vector<RawSession> mixed = {
      session("p", {"x"}, 300),
      session("q", {"x"}),
      session("r", {"x"}, 100),
  };
  auto [trm, tem] = split_train_test(mixed, 0.3);
  REQUIRE(tem.size() == 1);
  CHECK(tem[0].session_id == "r");

  CHECK_THROWS_AS(split_train_test(ten, 0.0), ContractError);
  CHECK_THROWS_AS(split_train_test(ten, 1.0), ContractError);
  CHECK_THROWS_AS(split_train_test({ten[0]}, 0.5), ContractError);
  // fraction so high the training side would be empty
  CHECK_THROWS_AS(split_train_test(three, 0.99), DataError);
}

TEST_CASE("augment_sequences expands prefixes") {
  Vocabulary vocab;
  for (const char* t : {"a", "b", "c"}) vocab.add(t);

  AugmentStats stats;
  std::vector<LabeledSequence> got =
      augment_sequences({session("s", {"a", "b", "c"})}, vocab, 50, &stats);
  REQUIRE(got.size() == 2);
  CHECK(got[0].prefix == std::vector<std::size_t>{0});
  CHECK(got[0].target == 1);
  CHECK(got[1].prefix == std::vector<std::size_t>{0, 1});
  CHECK(got[1].target == 2);
  CHECK(stats.produced == 2);

  // length-2 session -> exactly one pair
  CHECK(augment_sequences({session("s", {"b", "a"})}, vocab, 50).size() == 1);

  // recency truncation: only the most recent max_session_len items survive
  std::vector<LabeledSequence> trunc =
      augment_sequences({session("s", {"a", "b", "c", "a"})}, vocab, 2, &stats);
  REQUIRE(trunc.size() == 3);
  CHECK(trunc[2].prefix == std::vector<std::size_t>{1, 2});  // [a,b,c] -> [b,c]
  CHECK(stats.prefixes_truncated == 1);
}

TEST_CASE("augment_sequences handles unknown items") {
  Vocabulary vocab;
  for (const char* t : {"a", "b"}) vocab.add(t);

  // target unknown -> pair dropped; unknown prefix items stripped
  AugmentStats stats;
  std::vector<LabeledSequence> got =
      augment_sequences({session("s", {"a", "zz", "b"})}, vocab, 50, &stats);
  REQUIRE(got.size() == 1);  // ([a], zz) dropped; ([a, zz], b) -> ([a], b)
  CHECK(got[0].prefix == std::vector<std::size_t>{0});
  CHECK(got[0].target == 1);
  CHECK(stats.dropped_oov_target == 1);
  CHECK(stats.oov_items_stripped == 1);

  // prefix that empties after stripping -> dropped
  std::vector<LabeledSequence> none =
      augment_sequences({session("s", {"zz", "a"})}, vocab, 50, &stats);
  CHECK(none.empty());
  CHECK(stats.dropped_empty_prefix == 1);
}

TEST_CASE("augmentation count matches the per-session recount") {
  Rng rng(99);
  Vocabulary vocab;
  for (int i = 0; i < 20; ++i) vocab.add("i" + std::to_string(i));
  std::vector<RawSession> sessions;
  std::size_t expected = 0;
  for (int s = 0; s < 40; ++s) {
    std::size_t len = 2 + rng.below(8);
    std::vector<std::string> items;
    for (std::size_t k = 0; k < len; ++k) items.push_back("i" + std::to_string(rng.below(20)));
    expected += len - 1;
    sessions.push_back(session("s" + std::to_string(s), std::move(items)));
  }
  AugmentStats stats;
  std::vector<LabeledSequence> got = augment_sequences(sessions, vocab, 50, &stats);
  CHECK(got.size() == expected);  // fully in-vocab corpus: no drops
  CHECK(stats.produced == expected);
  CHECK(stats.dropped_oov_target == 0);
}

TEST_CASE("make_batches pads, masks and shuffles deterministically") {
  Rng rng(7);
  std::vector<LabeledSequence> seqs;
  for (int i = 0; i < 250; ++i) {
    LabeledSequence s;
    std::size_t len = 1 + rng.below(6);
    for (std::size_t k = 0; k < len; ++k) s.prefix.push_back(rng.below(30));
    s.target = rng.below(30);
    seqs.push_back(std::move(s));
  }

  std::vector<Batch> batches = make_batches(seqs, 100, true, 42);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size == 100);
  CHECK(batches[1].size == 100);
  CHECK(batches[2].size == 50);

  for (const Batch& b : batches) {
    REQUIRE(b.items.size() == b.size * b.max_len);
    REQUIRE(b.mask.size() == b.size * b.max_len);
    std::size_t widest = 0;
    for (std::size_t r = 0; r < b.size; ++r) {
      // mask row sum equals the stated length; padding carries -1 and mask 0
      std::size_t mask_sum = 0;
      for (std::size_t c = 0; c < b.max_len; ++c) {
        mask_sum += b.mask[r * b.max_len + c];
        if (c < b.lengths[r]) {
          CHECK(b.mask[r * b.max_len + c] == 1);
          CHECK(b.items[r * b.max_len + c] >= 0);
        } else {
          CHECK(b.mask[r * b.max_len + c] == 0);
          CHECK(b.items[r * b.max_len + c] == -1);
        }
      }
      CHECK(mask_sum == b.lengths[r]);
      CHECK(b.lengths[r] >= 1);
      CHECK(b.lengths[r] <= b.max_len);
      widest = std::max(widest, b.lengths[r]);
      // unique id list is sorted, deduplicated, and covers the row's items
      const auto& uniq = b.unique_items_per_row[r];
      CHECK(std::is_sorted(uniq.begin(), uniq.end()));
      CHECK(std::adjacent_find(uniq.begin(), uniq.end()) == uniq.end());
      for (std::size_t c = 0; c < b.lengths[r]; ++c)
        CHECK(std::binary_search(uniq.begin(), uniq.end(),
                                 static_cast<std::size_t>(b.items[r * b.max_len + c])));
    }
    CHECK(widest == b.max_len);  // padded width is tight
  }

  // determinism: same seed gives the identical batch stream
  std::vector<Batch> rerun = make_batches(seqs, 100, true, 42);
  for (std::size_t i = 0; i < batches.size(); ++i) {
    CHECK(rerun[i].items == batches[i].items);
    CHECK(rerun[i].targets == batches[i].targets);
  }
  // a different seed reorders it
  std::vector<Batch> other = make_batches(seqs, 100, true, 43);
  CHECK(other[0].targets != batches[0].targets);
  // no shuffle keeps input order
  std::vector<Batch> plain = make_batches(seqs, 100, false, 0);
  CHECK(plain[0].targets[0] == seqs[0].target);

  CHECK_THROWS_AS(make_batches({}, 100, false, 0), ContractError);
}

TEST_CASE("build_dataset keeps the test split out of the vocabulary") {
  // "q" appears 6 times overall but only 4 land in the training split; "zz"
  // appears only in the held-out tail. Neither may enter the vocabulary.
  std::string text;
  for (int i = 0; i < 4; ++i)
    text += "s" + std::to_string(i) + "\ta b q\t" + std::to_string(100 + i) + "\n";
  for (int i = 4; i < 8; ++i)
    text += "s" + std::to_string(i) + "\ta b\t" + std::to_string(100 + i) + "\n";
  text += "s8\ta q zz\t200\n";
  text += "s9\tb q zz a\t201\n";
  ScratchFile f("leak.tsv", text);

  PipelineStats stats;
  // fraction 0.2 -> the 2 newest sessions (s8, s9) are test
  ProcessedDataset d = build_dataset(f.path, 0.2, 5, 2, 50, &stats);
  CHECK(stats.train_split == 8);
  CHECK(stats.test_split == 2);
  CHECK(d.vocab.lookup("a").has_value());
  CHECK(d.vocab.lookup("b").has_value());
  CHECK(!d.vocab.lookup("q").has_value());   // train frequency 4 < 5 despite 6 overall
  CHECK(!d.vocab.lookup("zz").has_value());  // test-only item
  CHECK(d.vocab.size() == 2);

  // train sessions are index-mapped and q-free
  for (const auto& s : d.train_sessions)
    for (std::size_t idx : s) CHECK(idx < d.vocab.size());

  // test sequences survive via the strip/drop rules and stay in-vocab
  REQUIRE(!d.test_sequences.empty());
  for (const LabeledSequence& s : d.test_sequences) {
    CHECK(s.target < d.vocab.size());
    for (std::size_t idx : s.prefix) CHECK(idx < d.vocab.size());
  }
}

TEST_CASE("dataset round-trips through its file format") {
  std::string text;
  Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    std::string line = "s" + std::to_string(i) + "\t";
    std::size_t len = 2 + rng.below(5);
    for (std::size_t k = 0; k < len; ++k) {
      if (k) line += ' ';
      line += "i" + std::to_string(rng.below(6));
    }
    line += "\t" + std::to_string(1000 + i);
    text += line + "\n";
  }
  ScratchFile f("roundtrip.tsv", text);
  ProcessedDataset d = build_dataset(f.path, 0.2, 2, 2, 10);

  const std::string out = "scratch_roundtrip.bin";
  d.save(out);
  ProcessedDataset back = ProcessedDataset::load(out);
  std::remove(out.c_str());

  REQUIRE(back.vocab.size() == d.vocab.size());
  for (std::size_t i = 0; i < d.vocab.size(); ++i) CHECK(back.vocab.token(i) == d.vocab.token(i));
  CHECK(back.max_session_len == d.max_session_len);
  REQUIRE(back.train_sessions.size() == d.train_sessions.size());
  for (std::size_t i = 0; i < d.train_sessions.size(); ++i)
    CHECK(back.train_sessions[i] == d.train_sessions[i]);
  REQUIRE(back.train_sequences.size() == d.train_sequences.size());
  REQUIRE(back.test_sequences.size() == d.test_sequences.size());

  // identical batches under the same seed, before and after the round trip
  std::vector<Batch> b1 = make_batches(d.train_sequences, 8, true, 11);
  std::vector<Batch> b2 = make_batches(back.train_sequences, 8, true, 11);
  REQUIRE(b1.size() == b2.size());
  for (std::size_t i = 0; i < b1.size(); ++i) {
    CHECK(b1[i].items == b2[i].items);
    CHECK(b1[i].mask == b2[i].mask);
    CHECK(b1[i].targets == b2[i].targets);
    CHECK(b1[i].lengths == b2[i].lengths);
  }

  CHECK_THROWS_AS(ProcessedDataset::load("missing.bin"), IoError);
  ScratchFile junk("junk.bin", "NOTMAGICX_____");
  CHECK_THROWS_AS(ProcessedDataset::load(junk.path), IoError);
}

TEST_CASE("vocabulary basics") {
  Vocabulary v;
  v.add("x");
  v.add("y");
  CHECK(v.size() == 2);
  CHECK(v.lookup("x").value() == 0);
  CHECK(v.lookup("y").value() == 1);
  CHECK(!v.lookup("z").has_value());
  CHECK(v.token(1) == "y");
  CHECK_THROWS_AS(v.token(2), ContractError);
  CHECK_THROWS_AS(v.add("x"), ContractError);

  // first-appearance order over sessions
  Vocabulary w = Vocabulary::from_sessions(
      {session("a", {"c", "a", "c"}), session("b", {"b", "a"})});
  CHECK(w.lookup("c").value() == 0);
  CHECK(w.lookup("a").value() == 1);
  CHECK(w.lookup("b").value() == 2);
}
