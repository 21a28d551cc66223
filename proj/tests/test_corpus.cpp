#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "w2vt/corpus.hpp"

using namespace w2vt;
using namespace w2vt::testing;

using Seqs = std::vector<std::vector<std::string>>;

TEST_SUITE("corpus") {
  TEST_CASE("ingest counts tokens and sequences") {
    TempDir dir("ingest");
    write_file(dir / "seqs.txt", "a b c\na b\n");
    const Corpus c = ingest(dir / "seqs.txt", CorpusFormat::kPlain, 1);
    CHECK(c.vocab().size() == 3);
    CHECK(c.num_sequences() == 2);
    CHECK(c.num_tokens() == 5);
  }

  TEST_CASE("ingest drops tokens below min_count") {
    TempDir dir("ingest2");
    write_file(dir / "seqs.txt", "a b c\na b\n");
    const Corpus c = ingest(dir / "seqs.txt", CorpusFormat::kPlain, 2);
    CHECK(c.vocab().size() == 2);
    CHECK(c.vocab().find("a"));
    CHECK(c.vocab().find("b"));
    CHECK_FALSE(c.vocab().find("c"));
    REQUIRE(c.num_sequences() == 2);
    CHECK(tokens_of(c, 0) == std::vector<std::string>{"a", "b"});
    CHECK(tokens_of(c, 1) == std::vector<std::string>{"a", "b"});
    CHECK(c.num_tokens() == 4);
  }

  TEST_CASE("sequences emptied by min_count are dropped") {
    const Corpus c = corpus_of({{"a", "a"}, {"z"}, {"a"}}, 2);
    CHECK(c.num_sequences() == 2);
  }

  TEST_CASE("vocabulary invariants") {
    std::mt19937_64 rng(3);
    Seqs seqs(200);
    for (auto& s : seqs) {
      const int len = 1 + static_cast<int>(rng() % 12);
      for (int i = 0; i < len; ++i) s.push_back("t" + std::to_string(rng() % 60));
    }
    for (std::uint64_t mc : {1u, 2u, 5u, 9u}) {
      const Corpus c = corpus_of(seqs, mc);
      const auto& v = c.vocab();
      std::uint64_t sum = 0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(v.count(static_cast<TokenId>(i)) >= mc);
        CHECK(*v.find(v.token(static_cast<TokenId>(i))) == static_cast<TokenId>(i));
        sum += v.count(static_cast<TokenId>(i));
      }
      CHECK(sum == v.total_tokens());
      for (const auto& s : c.sequences()) {
        CHECK_FALSE(s.empty());
        for (auto id : s) CHECK(static_cast<std::size_t>(id) < v.size());
      }
    }
  }

  TEST_CASE("malformed input reports the line number") {
    TempDir dir("bad");
    write_file(dir / "bad.txt", std::string("a b\nc \0 d\n", 10));
    try {
      ingest(dir / "bad.txt", CorpusFormat::kPlain);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
    CHECK_THROWS_AS(ingest(dir / "missing.txt", CorpusFormat::kPlain), ValidationError);
  }

  TEST_CASE("timestamped input is grouped by user and sorted") {
    TempDir dir("tsv");
    write_file(dir / "ev.tsv", "u1\tx\t30\nu2\ty\t5\nu1\tw\t10\nu1\tz\t20\n");
    const Corpus c = ingest(dir / "ev.tsv", CorpusFormat::kTimestamped);
    REQUIRE(c.num_sequences() == 2);
    REQUIRE(c.has_timestamps());
    CHECK(tokens_of(c, 0) == std::vector<std::string>{"w", "z", "x"});
    CHECK(c.timestamps()[0] == std::vector<std::int64_t>{10, 20, 30});

    write_file(dir / "bad_ts.tsv", "u1\tx\t30\nu1\ty\tsoon\n");
    CHECK_THROWS_WITH_AS(ingest(dir / "bad_ts.tsv", CorpusFormat::kTimestamped),
                         doctest::Contains(":2:"), ValidationError);
    write_file(dir / "bad_fields.tsv", "u1\tx\n");
    CHECK_THROWS_WITH_AS(ingest(dir / "bad_fields.tsv", CorpusFormat::kTimestamped),
                         doctest::Contains(":1:"), ValidationError);
  }

  TEST_CASE("keep probability") {
    CHECK(keep_probability(10.0, 10.0) == doctest::Approx(2.0));
    CHECK(keep_probability(40.0, 10.0) == doctest::Approx(0.75));
    CHECK(keep_probability(3.0, 10.0) > 1.0);
    CHECK(keep_probability(1e9, 0.0) == 1.0);
    // (sqrt(f/t)+1) t/f >= 1 exactly when f <= t (phi^2 t)
    for (double r : {0.01, 0.5, 0.99, 1.0}) CHECK(keep_probability(r * 7.0, 7.0) >= 1.0);
  }

  TEST_CASE("t_ratio = 0 leaves the corpus unchanged") {
    const Corpus c = corpus_of({{"a", "a", "a", "b"}, {"a", "c"}});
    CHECK(downsample(c, {0.0, 5}, 0) == c.sequences());
  }

  TEST_CASE("keep rate of a frequent token converges to the formula") {
    // One token "hot" with f = 4t among 400k singleton tokens.
    // total = F + 400000 and t = r * total with F = 4 t -> r = F / (4 (F + 400000)).
    const std::uint64_t hot = 100000;
    Seqs seqs;
    seqs.emplace_back(hot, "hot");
    for (int i = 0; i < 400000; ++i) seqs.push_back({"r" + std::to_string(i)});
    const Corpus c = corpus_of(seqs);
    const double ratio = static_cast<double>(hot) / (4.0 * static_cast<double>(c.num_tokens()));
    const Downsampler ds(c.vocab(), ratio);
    const TokenId h = *c.vocab().find("hot");
    CHECK(ds.keep_rate(h) == doctest::Approx(0.75));
    const auto kept = downsample(c, {ratio, 11}, 0);
    std::size_t n = 0;
    for (const auto& s : kept) n += static_cast<std::size_t>(std::count(s.begin(), s.end(), h));
    CHECK(static_cast<double>(n) / static_cast<double>(hot) == doctest::Approx(0.75).epsilon(0.02 / 0.75));
  }

  TEST_CASE("downsampling differs between epochs and repeats per epoch") {
    Seqs seqs(50, std::vector<std::string>(40, "x"));
    seqs.push_back({"y"});
    const Corpus c = corpus_of(seqs);
    const DownsampleConfig cfg{0.001, 9};
    CHECK(downsample(c, cfg, 1) == downsample(c, cfg, 1));
    CHECK(downsample(c, cfg, 1) != downsample(c, cfg, 2));
  }

  TEST_CASE("last-token split") {
    {
      const auto s = split_last_token(corpus_of({{"a", "b", "c"}}));
      REQUIRE(s.train.num_sequences() == 1);
      CHECK(tokens_of(s.train, 0) == std::vector<std::string>{"a", "b"});
      REQUIRE(s.test_pairs.size() == 1);
      CHECK(s.train.vocab().token(s.test_pairs[0].query) == "b");
      CHECK(s.test_pairs[0].target == kUnknownToken);  // c never occurs in training
    }
    {
      const auto s = split_last_token(corpus_of({{"a", "b"}, {"c", "d", "e"}, {"b"}}));
      REQUIRE(s.train.num_sequences() == 3);
      CHECK(tokens_of(s.train, 0) == std::vector<std::string>{"a"});
      CHECK(tokens_of(s.train, 1) == std::vector<std::string>{"c", "d"});
      CHECK(tokens_of(s.train, 2) == std::vector<std::string>{"b"});
      REQUIRE(s.test_pairs.size() == 2);
      const auto& v = s.train.vocab();
      CHECK(v.token(s.test_pairs[0].query) == "a");
      CHECK(v.token(s.test_pairs[0].target) == "b");
      CHECK(v.token(s.test_pairs[1].query) == "d");
      CHECK(s.test_pairs[1].target == kUnknownToken);
    }
    CHECK_THROWS_WITH_AS(split_last_token(corpus_of({{"a"}})), doctest::Contains("empty test set"),
                         ValidationError);
  }

  TEST_CASE("every last-token query has a training vector") {
    std::mt19937_64 rng(5);
    Seqs seqs(300);
    for (auto& s : seqs) {
      const int len = 1 + static_cast<int>(rng() % 6);
      for (int i = 0; i < len; ++i) s.push_back(std::to_string(rng() % 40));
    }
    const auto split = split_last_token(corpus_of(seqs));
    for (const auto& p : split.test_pairs) {
      CHECK(p.query >= 0);
      CHECK(static_cast<std::size_t>(p.query) < split.train.vocab().size());
    }
  }

  TEST_CASE("temporal split") {
    using Stamps = Corpus::Stamps;
    {
      const Corpus c = Corpus::from_tokens({{"e1", "e2", "e3", "e4"}}, {Stamps{1, 2, 3, 4}}, 1);
      const auto s = split_temporal(c, 3);
      REQUIRE(s.train.num_sequences() == 1);
      CHECK(tokens_of(s.train, 0) == std::vector<std::string>{"e1", "e2"});
      // e3 is not in the training vocabulary -> pair excluded
      CHECK(s.test_pairs.empty());
    }
    {
      const Corpus c = Corpus::from_tokens({{"e1", "e2", "e1", "e4"}}, {Stamps{1, 2, 3, 4}}, 1);
      const auto s = split_temporal(c, 3);
      REQUIRE(s.test_pairs.size() == 1);
      CHECK(s.train.vocab().token(s.test_pairs[0].query) == "e1");
      CHECK(s.test_pairs[0].target == kUnknownToken);
    }
    {
      const Corpus c = Corpus::from_tokens({{"a", "b"}, {"c"}}, {Stamps{1, 2}, Stamps{5}}, 1);
      const auto s = split_temporal(c, 100);
      CHECK(s.test_pairs.empty());
      CHECK(s.train.num_sequences() == 2);
      CHECK(s.train.num_tokens() == 3);
    }
    CHECK_THROWS_AS(split_temporal(corpus_of({{"a", "b"}}), 1), ValidationError);
  }

  TEST_CASE("sequence sampling") {
    Seqs seqs(100000);
    for (std::size_t i = 0; i < seqs.size(); ++i) seqs[i] = {"s" + std::to_string(i % 977), "x"};
    const Corpus c = corpus_of(seqs);
    const Corpus a = sample_sequences(c, 0.1, 4);
    const Corpus b = sample_sequences(c, 0.1, 4);
    CHECK(a.num_sequences() == 10000);
    CHECK(a.sequences() == b.sequences());
    CHECK(sample_sequences(c, 0.1, 5).sequences() != a.sequences());

    const Corpus small = corpus_of({{"a", "b"}, {"c"}, {"a", "d", "e"}});
    const Corpus all = sample_sequences(small, 1.0, 1);
    CHECK(all.num_sequences() == 3);
    CHECK(all.num_tokens() == small.num_tokens());
    CHECK(all.vocab().size() == small.vocab().size());

    CHECK_THROWS_AS(sample_sequences(small, 0.2, 1), ValidationError);
    CHECK_THROWS_AS(sample_sequences(small, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(sample_sequences(small, 1.5, 1), ValidationError);
  }

  TEST_CASE("holdout moves a share of the test pairs") {
    Seqs seqs;
    for (int i = 0; i < 100; ++i) seqs.push_back({"a" + std::to_string(i % 7), "b" + std::to_string(i % 5)});
    auto split = split_last_token(corpus_of(seqs));
    const auto before = split.test_pairs.size();
    hold_out_pairs(split, 0.25, 3);
    CHECK(split.holdout_pairs.size() == 25);
    CHECK(split.test_pairs.size() + split.holdout_pairs.size() == before);
    CHECK_THROWS_AS(hold_out_pairs(split, 1.0, 3), ValidationError);
  }
}
