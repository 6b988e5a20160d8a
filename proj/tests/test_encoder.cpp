#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "textrisk/common/digest.hpp"
#include "textrisk/common/error.hpp"
#include "textrisk/encoder/encoder.hpp"

using namespace textrisk;
using namespace textrisk::encoder;

namespace {

std::string fixture(const std::string& name) { return std::string(TEXTRISK_FIXTURE_DIR) + "/" + name; }

Errc load_error(const std::string& name) {
  try {
    load_embeddings(std::filesystem::path(fixture(name)));
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << name << " loaded without error";
  return Errc::validation;
}

}  // namespace

TEST(Fnv, ReferenceVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Hashed, EmptyIsZero) {
  const auto v = hashed_encode("", 768);
  for (double x : v) EXPECT_EQ(x, 0.0);
}

TEST(Hashed, UnitNorm) {
  for (const char* t : {"a", "need a loan to pay bills", "Hello, World!  hello world", "\xc3\xa9t\xc3\xa9"}) {
    double n = 0;
    for (double x : hashed_encode(t, 768)) n += x * x;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-9) << t;
  }
}

TEST(Hashed, SingleTokenHandComputed) {
  // one unigram, no bigram: one coordinate at +-1
  const auto v = hashed_encode("Loan", 16);
  const auto h = fnv1a64("loan");
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(v[i], i == h % 16 ? ((h >> 63) ? -1.0 : 1.0) : 0.0);
}

TEST(Hashed, PureAcrossThreads) {
  const std::string text = "pay off credit cards and consolidate my debt";
  const auto ref = hashed_encode(text);
  std::vector<std::vector<double>> out(8);
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) threads.emplace_back([&, t] { out[static_cast<std::size_t>(t)] = hashed_encode(text); });
  for (auto& th : threads) th.join();
  for (const auto& v : out) EXPECT_EQ(v, ref);
}

TEST(Hashed, StoreSerialEqualsParallel) {
  std::vector<std::string> ids, texts;
  for (int i = 0; i < 200; ++i) {
    ids.push_back("r" + std::to_string(i));
    texts.push_back("loan text " + std::to_string(i * 7) + " with words");
  }
  const auto a = hashed_store(ids, texts, 64, Exec::serial);
  const auto b = hashed_store(ids, texts, 64, Exec::parallel);
  std::ostringstream sa, sb;
  write_embeddings(sa, a);
  write_embeddings(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Emb1, LoadsThreeRows) {
  const auto store = load_embeddings(std::filesystem::path(fixture("emb_valid_3.emb")));
  EXPECT_EQ(store.size(), 3u);
  EXPECT_EQ(store.dim(), 768u);
  EXPECT_EQ(store.ids()[2], "id2");
  // row sums from the generator, to float precision
  std::ifstream sums(fixture("emb_valid_3_sum.txt"));
  for (std::size_t r = 0; r < 3; ++r) {
    double expected = 0;
    sums >> expected;
    double got = 0;
    for (float x : store.row(r)) got += x;
    EXPECT_NEAR(got, expected, 1e-5);
  }
}

TEST(Emb1, ErrorCodesAreDistinct) {
  EXPECT_EQ(load_error("emb_nan.emb"), Errc::non_finite);
  EXPECT_EQ(load_error("emb_duplicate.emb"), Errc::duplicate_id);
  EXPECT_EQ(load_error("emb_truncated.emb"), Errc::truncated);
  EXPECT_EQ(load_error("emb_no_final_newline.emb"), Errc::truncated);
  EXPECT_EQ(load_error("emb_dim_mismatch.emb"), Errc::dim_mismatch);
}

TEST(Emb1, MalformedHeader) {
  std::istringstream in("EMB2 4 1\na,1,2,3,4\n");
  EXPECT_THROW(load_embeddings(in), Error);
  std::istringstream zero("EMB1 0 0\n");
  EXPECT_THROW(load_embeddings(zero), Error);
}

TEST(Emb1, CanonicalRoundTripByteIdentical) {
  const auto store = load_embeddings(std::filesystem::path(fixture("emb_valid_3.emb")));
  std::ostringstream once;
  write_embeddings(once, store);
  std::istringstream back(once.str());
  std::ostringstream twice;
  write_embeddings(twice, load_embeddings(back));
  EXPECT_EQ(once.str(), twice.str());
}

TEST(Emb1, ExporterFixtureLoadsClean) {
  const auto path = fixture("emb_exporter_100.emb");
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "EMB1 768 100");
  const auto store = load_embeddings(std::filesystem::path(path));
  EXPECT_EQ(store.size(), 100u);
  for (std::size_t r = 0; r < store.size(); ++r) {
    double n = 0;
    for (float x : store.row(r)) {
      ASSERT_TRUE(std::isfinite(x));
      n += static_cast<double>(x) * x;
    }
    EXPECT_GT(n, 0.0);
  }
}

TEST(Store, UnknownId) {
  const auto store = load_embeddings(std::filesystem::path(fixture("emb_valid_3.emb")));
  try {
    store.row_of("nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unknown_id);
  }
}

TEST(Meta, JsonRoundTrip) {
  EncoderMeta m{EncoderKind::precomputed, 768, "bert-base-uncased cls", 12, 768, 12};
  const auto back = EncoderMeta::from_json(m.to_json());
  EXPECT_EQ(back.kind, m.kind);
  EXPECT_EQ(back.dim, 768u);
  EXPECT_EQ(back.provenance, m.provenance);
  EXPECT_EQ(back.layer_count, 12);
  EXPECT_EQ(kind_name(parse_kind("hashed")), "hashed");
}
