#include "strel/data.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "strel/error.hpp"
#include "support/fixtures.hpp"

using namespace strel;

namespace {

const char* kHeader = "pair_id,sentence_1,sentence_2,score\n";

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(ParseDataset, DirectFieldMapping) {
  const auto ds = parse_dataset(std::string(kHeader) +
                                    "ENG-1,\"A man is cooking.\",\"Someone prepares food.\",0.75\n",
                                "eng", Split::train);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].pair_id, "ENG-1");
  EXPECT_EQ(ds[0].sentence_1, "A man is cooking.");
  EXPECT_EQ(ds[0].sentence_2, "Someone prepares food.");
  EXPECT_EQ(ds[0].score, 0.75);
  EXPECT_TRUE(ds.labeled());
}

TEST(ParseDataset, HeaderOnlyIsEmpty) {
  EXPECT_EQ(parse_dataset(kHeader, "eng", Split::test).size(), 0u);
}

TEST(ParseDataset, ScoreOutOfRangeNamesThePair) {
  const auto msg = message_of([] {
    parse_dataset(std::string(kHeader) + "ENG-9,a,b,1.3\n", "eng", Split::train);
  });
  EXPECT_NE(msg.find("ENG-9"), std::string::npos) << msg;
  EXPECT_THROW(parse_dataset(std::string(kHeader) + "ENG-9,a,b,1.3\n", "eng", Split::train),
               ValidationError);
}

TEST(ParseDataset, DuplicateIdsAndEmptySentencesRejected) {
  EXPECT_THROW(parse_dataset(std::string(kHeader) + "X,a,b,0.1\nX,c,d,0.2\n", "eng", Split::train),
               ValidationError);
  EXPECT_THROW(parse_dataset(std::string(kHeader) + "X,\"  \",b,0.1\n", "eng", Split::train),
               ValidationError);
}

TEST(ParseDataset, MalformedCsvReportsLine) {
  try {
    parse_dataset(std::string(kHeader) + "A,a,b,0.1\nB,\"unterminated,b,0.2\n", "eng",
                  Split::train);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_dataset(std::string(kHeader) + "A,a,b\n", "eng", Split::train), ParseError);
  EXPECT_THROW(parse_dataset("id,s1,s2,score\n", "eng", Split::train), ParseError);
}

TEST(ParseDataset, StrictDecimalScores) {
  for (const char* bad : {"1e-1", ".5", "0.", "+0.5", "0x1", "nan", "0,5"}) {
    EXPECT_ANY_THROW(parse_dataset(std::string(kHeader) + "A,a,b,\"" + bad + "\"\n", "eng",
                                   Split::train))
        << bad;
  }
}

TEST(ParseDataset, UnlabeledRowsAndMixing) {
  const auto ds = parse_dataset(std::string(kHeader) + "A,a,b,\nB,c,d,\n", "eng", Split::test);
  EXPECT_FALSE(ds.labeled());
  EXPECT_THROW(ds.scores(), ValidationError);
  EXPECT_THROW(parse_dataset(std::string(kHeader) + "A,a,b,0.3\nB,c,d,\n", "eng", Split::test),
               ValidationError);
}

TEST(ParseDataset, RejectsInvalidUtf8) {
  EXPECT_THROW(parse_dataset(std::string(kHeader) + "A,\"\xC3\x28\",b,0.1\n", "eng", Split::train),
               ParseError);
}

TEST(SerializeDataset, RoundTripIsExact) {
  std::vector<LabeledPair> pairs{{"a", "He said \"hi\", twice.", "multi\nline", 0.1},
                                 {"b", "ünïcödé", "x", 1.0},
                                 {"c", "y", "z", 0.30000000000000004}};
  const PairDataset ds("eng", Split::dev, pairs);
  const auto text = serialize_dataset(ds);
  const auto back = parse_dataset(text, "eng", Split::dev);
  EXPECT_EQ(back, ds);
  EXPECT_EQ(serialize_dataset(back), text);
}

TEST(ImportSemrel, SplitsTextOnFirstNewline) {
  const auto ds = import_semrel(
      "PairID,Text,Score\nENG-train-0001,\"It was sunny.\nThe sun shone.\",0.8\n", "eng",
      Split::train);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].sentence_1, "It was sunny.");
  EXPECT_EQ(ds[0].sentence_2, "The sun shone.");
  EXPECT_EQ(ds[0].score, 0.8);
}

TEST(ImportSemrel, AcceptsEscapedNewlineAndCrLf) {
  const auto a = import_semrel("PairID,Text,Score\nP1,\"One.\\nTwo.\",0.5\n", "eng", Split::train);
  EXPECT_EQ(a[0].sentence_1, "One.");
  EXPECT_EQ(a[0].sentence_2, "Two.");
  const auto b = import_semrel("PairID,Text,Score\r\nP1,\"One.\r\nTwo.\",0.5\r\n", "eng",
                               Split::train);
  EXPECT_EQ(b[0].sentence_1, "One.");
  EXPECT_EQ(b[0].sentence_2, "Two.");
}

TEST(ImportSemrel, MissingSeparatorNamesPair) {
  try {
    import_semrel("PairID,Text,Score\nP77,\"no separator\",0.5\n", "eng", Split::train);
    FAIL();
  } catch (const ImportError& e) {
    EXPECT_NE(std::string(e.what()).find("P77"), std::string::npos);
  }
}

TEST(ImportSemrel, NoScoreColumnMeansUnlabeled) {
  const auto ds = import_semrel("PairID,Text\nP1,\"a\nb\"\n", "eng", Split::test);
  EXPECT_FALSE(ds.labeled());
  EXPECT_THROW(compute_stats(ds), ValidationError);
}

TEST(ImportSemrel, BundledSampleMatchesCanonicalTrainPrefix) {
  const std::filesystem::path dir = STREL_SOURCE_DIR "/data/synthetic";
  const auto sample = import_semrel(read_text_file(dir / "semrel_sample.csv"), "eng", Split::train);
  const auto train = load_dataset(dir / "train.csv", "eng", Split::train);
  ASSERT_EQ(sample.size(), 20u);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    EXPECT_EQ(sample[i].sentence_1, train[i].sentence_1);
    EXPECT_EQ(sample[i].sentence_2, train[i].sentence_2);
    EXPECT_EQ(sample[i].score, train[i].score);
  }
}

TEST(Split, SizesDeterminismAndPartition) {
  const auto ds = fixtures::synthetic_pairs(10);
  const auto a = split_dataset(ds, 0.8, 7);
  const auto b = split_dataset(ds, 0.8, 7);
  EXPECT_EQ(a.train.size(), 8u);
  EXPECT_EQ(a.held_out.size(), 2u);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.held_out, b.held_out);

  std::set<std::string> ids;
  for (const auto& p : a.train) ids.insert(p.pair_id);
  for (const auto& p : a.held_out) EXPECT_TRUE(ids.insert(p.pair_id).second);
  EXPECT_EQ(ids.size(), ds.size());

  // Source order survives on both sides.
  auto index = [&](const std::string& id) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds[i].pair_id == id) return i;
    }
    return ds.size();
  };
  for (const auto* side : {&a.train, &a.held_out}) {
    for (std::size_t i = 1; i < side->size(); ++i) {
      EXPECT_LT(index((*side)[i - 1].pair_id), index((*side)[i].pair_id));
    }
  }
}

TEST(Split, TableOneAllocation) {
  const auto ds = fixtures::synthetic_pairs(5752);
  const auto s = split_dataset(ds, 0.765, 1);
  EXPECT_EQ(s.train.size(), 4400u);
  EXPECT_EQ(s.held_out.size(), 1352u);
}

TEST(Split, Errors) {
  EXPECT_THROW(split_dataset(fixtures::synthetic_pairs(1), 0.5, 1), ValidationError);
  EXPECT_THROW(split_dataset(fixtures::synthetic_pairs(3), 0.1, 1), ValidationError);
  EXPECT_THROW(split_dataset(fixtures::synthetic_pairs(3), 1.0, 1), ValidationError);
}

TEST(Stats, ConstantData) {
  std::vector<LabeledPair> pairs;
  for (int i = 0; i < 5; ++i) pairs.push_back({std::to_string(i), "a", "b", 0.5});
  const auto s = compute_stats(PairDataset("eng", Split::train, pairs));
  EXPECT_EQ(s.count, 5u);
  EXPECT_EQ(s.mean_score, 0.5);
  EXPECT_EQ(s.std_score, 0.0);
  EXPECT_EQ(s.histogram[5], 5u);
}

TEST(Stats, HistogramEdges) {
  EXPECT_EQ(histogram_bin(0.0), 0u);
  EXPECT_EQ(histogram_bin(0.1), 1u);
  EXPECT_EQ(histogram_bin(0.3), 3u);
  EXPECT_EQ(histogram_bin(0.7), 7u);
  EXPECT_EQ(histogram_bin(0.99), 9u);
  EXPECT_EQ(histogram_bin(1.0), 9u);
  EXPECT_THROW(histogram_bin(1.5), ValidationError);
}

TEST(Stats, RandomDatasetsInvariants) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng() % 300;
    std::vector<LabeledPair> pairs;
    for (std::size_t i = 0; i < n; ++i) {
      pairs.push_back({std::to_string(i), "a", "b", std::round(u(rng) * 100) / 100});
    }
    const auto s = compute_stats(PairDataset("eng", Split::train, pairs));
    std::size_t total = 0;
    for (auto c : s.histogram) total += c;
    EXPECT_EQ(total, n);
    EXPECT_LE(s.min_score, s.mean_score);
    EXPECT_LE(s.mean_score, s.max_score);
  }
  EXPECT_THROW(compute_stats(PairDataset("eng", Split::train, {})), ValidationError);
}

TEST(SplitName, ParsesAndRejects) {
  EXPECT_EQ(parse_split("dev"), Split::dev);
  EXPECT_EQ(split_name(Split::unsplit), "unsplit");
  EXPECT_ANY_THROW(parse_split("validation"));
}
