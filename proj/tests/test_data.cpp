#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "catfill/data/bundle.hpp"
#include "catfill/data/dataset.hpp"
#include "catfill/data/ingest.hpp"
#include "catfill/model/gradient_check.hpp"
#include "support.hpp"

using namespace catfill;
using namespace catfill::data;
using testing_support::TempDir;

namespace {

IngestResult ingest_text(const std::string& text, InputFormat f) {
  std::istringstream in(text);
  return ingest(in, f);
}

std::vector<CheckinRecord> records_for(const std::string& user, std::size_t n,
                                       std::int64_t start = 1000) {
  std::vector<CheckinRecord> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({user, "cat" + std::to_string(i % 3), start + static_cast<std::int64_t>(i)});
  return out;
}

UserSequence sequence(std::vector<int> cats) {
  UserSequence s;
  s.categories = std::move(cats);
  for (std::size_t i = 0; i < s.categories.size(); ++i) s.timestamps.push_back(static_cast<std::int64_t>(i));
  return s;
}

}  // namespace

TEST(Time, Iso8601RoundTrip) {
  const auto t = parse_iso8601_utc("2012-04-03T18:00:09Z");
  ASSERT_TRUE(t);
  EXPECT_EQ(*t, 1333476009);
  EXPECT_EQ(format_iso8601_utc(*t), "2012-04-03T18:00:09Z");
  EXPECT_FALSE(parse_iso8601_utc("2012-13-03T18:00:09Z"));
  EXPECT_FALSE(parse_iso8601_utc("yesterday"));
}

TEST(Time, FoursquareFormat) {
  const auto t = parse_foursquare_time("Tue Apr 03 18:00:09 +0000 2012");
  ASSERT_TRUE(t);
  EXPECT_EQ(*t, 1333476009);
  EXPECT_FALSE(parse_foursquare_time("Tue Foo 03 18:00:09 +0000 2012"));
}

TEST(Ingest, ThreeWellFormedLines) {
  const auto r = ingest_text(
      "u1\tBar\t2012-04-03T18:00:09Z\nu1\tGym\t2012-04-03T19:00:00Z\nu2\tBar\t2012-04-04T08:00:00Z\n",
      InputFormat::Simple3);
  EXPECT_EQ(r.records.size(), 3u);
  EXPECT_TRUE(r.rejects.empty());
  EXPECT_EQ(r.records[1].category_name, "Gym");
}

TEST(Ingest, FoursquareColumns) {
  const std::string line =
      "470\t49bbd6c0f964a520f4531fe3\t4bf58dd8d48988d127951735\tArts & Crafts Store\t40.71981\t-74.00258\t-240\tTue Apr 03 18:00:09 +0000 2012\n";
  const auto r = ingest_text(line, InputFormat::Foursquare8);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].user_id, "470");
  EXPECT_EQ(r.records[0].category_name, "Arts & Crafts Store");
  EXPECT_EQ(r.records[0].timestamp, 1333476009);
}

TEST(Ingest, SevenColumnLineIsRejectedOthersKept) {
  std::string text;
  const std::string good = "1\tv\tc\tCafe\t0\t0\t0\tTue Apr 03 18:00:09 +0000 2012\n";
  for (int i = 0; i < 150; ++i) text += good;
  text += "1\tv\tc\tCafe\t0\t0\tTue Apr 03 18:00:09 +0000 2012\n";
  const auto r = ingest_text(text, InputFormat::Foursquare8);
  EXPECT_EQ(r.records.size(), 150u);
  ASSERT_EQ(r.rejects.size(), 1u);
  EXPECT_EQ(r.rejects[0].line, 151u);
}

TEST(Ingest, TooManyRejectsIsFatal) {
  EXPECT_THROW(ingest_text("u\tBar\t2012-04-03T18:00:09Z\nbroken line\n", InputFormat::Simple3), DataError);
}

TEST(Ingest, MissingFileIsIoError) {
  EXPECT_THROW(ingest("/nonexistent/checkins.tsv", InputFormat::Simple3), IoError);
}

TEST(Ingest, Latin1FallbackAndCrlf) {
  const auto r = ingest_text("u\tCaf\xe9\t2012-04-03T18:00:09Z\r\n", InputFormat::Simple3);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].category_name, "Caf\xc3\xa9");
  EXPECT_EQ(to_utf8_permissive("Caf\xc3\xa9"), "Caf\xc3\xa9");
}

TEST(FilterUsers, NineDroppedTenKept) {
  auto recs = records_for("nine", 9);
  const auto ten = records_for("ten", 10);
  recs.insert(recs.end(), ten.begin(), ten.end());
  const auto ds = filter_users(recs, 10);
  ASSERT_EQ(ds.users.size(), 1u);
  EXPECT_EQ(ds.vocab.user_id(0), "ten");
  EXPECT_EQ(ds.users[0].length(), 10u);
}

TEST(FilterUsers, EmptyResultIsError) {
  EXPECT_THROW(filter_users(records_for("a", 3), 10), DataError);
}

TEST(FilterUsers, SortsByTimeStably) {
  std::vector<CheckinRecord> recs;
  for (int i = 0; i < 10; ++i) recs.push_back({"u", "c" + std::to_string(i), 100 - (i / 2)});
  const auto ds = filter_users(recs, 10);
  const auto& s = ds.users[0];
  for (std::size_t i = 1; i < s.length(); ++i) EXPECT_LE(s.timestamps[i - 1], s.timestamps[i]);
  // equal timestamps keep input order: c8 then c9 come first
  EXPECT_EQ(ds.vocab.category_name(s.categories[0]), "c8");
  EXPECT_EQ(ds.vocab.category_name(s.categories[1]), "c9");
}

TEST(Vocab, BijectionAndPad) {
  const auto ds = filter_users(records_for("u", 12), 10);
  const auto& v = ds.vocab;
  EXPECT_EQ(v.category_count(), 3);
  for (int c = 1; c <= v.category_count(); ++c) EXPECT_EQ(v.category_index(v.category_name(c)), c);
  EXPECT_THROW(v.category_name(kPad), ContractError);
  EXPECT_THROW(v.category_index("nope"), ContractError);
}

TEST(Split, ExampleLengths) {
  const auto a = split(20);
  EXPECT_EQ(a.train_size(), 16u);
  EXPECT_EQ(a.val_size(), 2u);
  EXPECT_EQ(a.test_size(), 2u);
  const auto b = split(10);
  EXPECT_EQ(b.train_size(), 8u);
  EXPECT_EQ(b.val_size(), 1u);
  EXPECT_EQ(b.test_size(), 1u);
  const auto c = split(11);
  EXPECT_EQ(c.train_size(), 8u);
  EXPECT_EQ(c.val_size(), 1u);
  EXPECT_EQ(c.test_size(), 2u);
}

TEST(Split, SizesPartitionEveryLength) {
  for (std::size_t L = 10; L < 500; ++L) {
    const auto r = split(L);
    EXPECT_EQ(r.train_size() + r.val_size() + r.test_size(), L);
    for (std::size_t p = 0; p < L; ++p) {
      const auto t = r.tag(p);
      EXPECT_EQ(t == Split::Train, p < r.train_end);
    }
  }
}

TEST(MakeSamples, WindowsAtTheEdges) {
  const auto seq = sequence({1, 2, 3, 4, 5});
  const auto s = make_samples(seq, split(5), 3);
  EXPECT_EQ(s.front().forward, (std::vector<int>{kPad, kPad, kPad}));
  EXPECT_EQ(s.back().backward, (std::vector<int>{kPad, kPad, kPad}));
  EXPECT_EQ(s.front().previous(), kPad);
  EXPECT_EQ(s.back().next(), kPad);
}

TEST(MakeSamples, MiddleOfFive) {
  // a..e = 1..5, target c at 1-based position 3
  const auto s = make_samples(sequence({1, 2, 3, 4, 5}), split(5), 2);
  EXPECT_EQ(s[2].target, 3);
  EXPECT_EQ(s[2].forward, (std::vector<int>{1, 2}));
  EXPECT_EQ(s[2].backward, (std::vector<int>{5, 4}));
  EXPECT_EQ(s[2].previous(), 2);
  EXPECT_EQ(s[2].next(), 4);
}

TEST(MakeSamples, WindowsCrossSplitBoundaries) {
  std::vector<int> cats(20);
  for (int i = 0; i < 20; ++i) cats[static_cast<std::size_t>(i)] = 1 + i % 7;
  const auto s = make_samples(sequence(cats), split(20), 3);
  // position 16 is the first validation sample; its forward window is train data
  EXPECT_EQ(s[16].split, Split::Val);
  EXPECT_EQ(s[16].forward, (std::vector<int>{cats[13], cats[14], cats[15]}));
  // last train sample sees validation/test check-ins after it
  EXPECT_EQ(s[15].backward, (std::vector<int>{cats[18], cats[17], cats[16]}));
}

TEST(MakeSamples, InvariantsOnRandomCorpora) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::size_t w = 1 + seed % 6;
    const auto ds = model::random_dataset(6, 4, 10, 40, seed);
    const auto samples = materialize(ds, w);
    std::size_t k = 0;
    for (const auto& seq : ds.users) {
      std::vector<int> rebuilt;
      for (std::size_t l = 0; l < seq.length(); ++l, ++k) {
        const auto& s = samples[k];
        ASSERT_EQ(s.user, seq.user);
        ASSERT_EQ(s.position, l);
        rebuilt.push_back(s.target);
        // PAD only as a contiguous far-side prefix
        for (const auto* win : {&s.forward, &s.backward}) {
          bool seen_real = false;
          for (int c : *win) {
            if (c != kPad) seen_real = true;
            else ASSERT_FALSE(seen_real);
          }
        }
        if (l > 0) {
          EXPECT_EQ(s.forward.back(), seq.categories[l - 1]);
        }
        if (l + 1 < seq.length()) {
          EXPECT_EQ(s.backward.back(), seq.categories[l + 1]);
        }
        // neither window contains the target position
        const std::size_t fwd_real = std::min(w, l);
        const std::size_t bwd_real = std::min(w, seq.length() - 1 - l);
        for (std::size_t i = 0; i < fwd_real; ++i)
          EXPECT_EQ(s.forward[w - 1 - i], seq.categories[l - 1 - i]);
        for (std::size_t i = 0; i < bwd_real; ++i)
          EXPECT_EQ(s.backward[w - 1 - i], seq.categories[l + 1 + i]);
      }
      EXPECT_EQ(rebuilt, seq.categories);
    }
  }
}

TEST(Pipeline, DeterministicFromBytes) {
  std::string text;
  for (int u = 0; u < 5; ++u)
    for (int i = 0; i < 15; ++i)
      text += "user" + std::to_string(u) + "\tcat" + std::to_string((u * 7 + i * 3) % 5) +
              "\t2012-04-0" + std::to_string(1 + i % 9) + "T1" + std::to_string(u) + ":00:00Z\n";
  auto run = [&] {
    const auto r = ingest_text(text, InputFormat::Simple3);
    return materialize(filter_users(r.records), 4);
  };
  EXPECT_EQ(run(), run());
}

TEST(Partition, SplitsBySampleTag) {
  const auto ds = model::random_dataset(5, 3, 20, 30, 9);
  const auto set = partition(ds, 3);
  std::size_t expected_train = 0;
  for (const auto& u : ds.users) expected_train += split(u.length()).train_size();
  EXPECT_EQ(set.train.size(), expected_train);
  EXPECT_EQ(set.train.size() + set.val.size() + set.test.size(), ds.checkin_count());
  for (const auto& s : set.val) EXPECT_EQ(s.split, Split::Val);
  EXPECT_EQ(&set.of(Split::Test), &set.test);
}

TEST(Bundle, RoundTrip) {
  TempDir dir("bundle");
  const auto ds = model::random_dataset(7, 4, 12, 25, 3);
  const auto samples = materialize(ds, 4);
  write_bundle(dir.path(), ds, samples, 4);
  const auto b = load_bundle(dir.path());
  EXPECT_EQ(b.window, 4u);
  EXPECT_EQ(b.samples, samples);
  EXPECT_EQ(b.dataset.vocab.categories(), ds.vocab.categories());
  EXPECT_EQ(b.dataset.vocab.users(), ds.vocab.users());
  for (std::size_t u = 0; u < ds.users.size(); ++u)
    EXPECT_EQ(b.dataset.users[u].categories, ds.users[u].categories);
  const auto st = stats(b.dataset);
  EXPECT_EQ(st.checkins, ds.checkin_count());
}

TEST(Bundle, MissingAndCorrupt) {
  EXPECT_THROW(load_bundle("/nonexistent/bundle"), IoError);
  TempDir dir("bundle_bad");
  const auto ds = model::random_dataset(4, 2, 12, 12, 5);
  write_bundle(dir.path(), ds, materialize(ds, 2), 2);
  {
    std::ofstream out(dir / "samples.txt", std::ios::app);
    out << "0 train 9 1 1 1 1\n";
  }
  EXPECT_THROW(load_bundle(dir.path()), DataError);
}
