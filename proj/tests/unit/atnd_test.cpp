#include <gtest/gtest.h>

#include "headlens/atnd.hpp"
#include "test_util.hpp"

using namespace headlens;

namespace {

atnd::Dump random_dump(Xoshiro256& rng, atnd::ContentKind kind, std::uint32_t h, std::uint32_t t,
                       std::uint32_t s, bool labels) {
  atnd::Dump d;
  d.kind = kind;
  d.timesteps = kind == atnd::ContentKind::kConceptKeys ? 1 : t;
  d.token_count = s;
  d.d_k = kind == atnd::ContentKind::kMaps ? 0 : 1 + static_cast<std::uint32_t>(rng.below(8));
  const std::uint32_t res[] = {2, 4, 8};
  for (std::uint32_t i = 0; i < h; ++i) {
    atnd::Head head;
    head.resolution = kind == atnd::ContentKind::kConceptKeys ? 1 : res[rng.below(3)];
    d.heads.push_back(head);
    atnd::Head& ref = d.heads.back();
    ref.keys.resize(d.key_floats());
    ref.data.resize(d.block_floats(i) * d.timesteps);
    for (float& f : ref.keys) f = static_cast<float>(rng.normal());
    for (float& f : ref.data) f = static_cast<float>(rng.uniform());
  }
  if (labels) {
    for (std::uint32_t i = 0; i < s; ++i) d.labels.push_back("tok" + std::to_string(i));
  }
  return d;
}

atnd::Errc decode_error(const std::vector<std::uint8_t>& bytes) {
  try {
    atnd::decode(bytes);
  } catch (const atnd::AtndError& e) {
    return e.code();
  }
  ADD_FAILURE() << "decode succeeded";
  return atnd::Errc::kIo;
}

void put_u32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

}  // namespace

TEST(Atnd, RoundTripAllKinds) {
  Xoshiro256 rng(1);
  for (auto kind : {atnd::ContentKind::kMaps, atnd::ContentKind::kQueryKey, atnd::ContentKind::kConceptKeys}) {
    for (bool labels : {false, true}) {
      const atnd::Dump d = random_dump(rng, kind, 4, 2, 7, labels);
      const auto bytes = atnd::encode(d);
      const atnd::Dump back = atnd::decode(bytes);
      EXPECT_EQ(atnd::encode(back), bytes);
      EXPECT_EQ(back.labels, d.labels);
      ASSERT_EQ(back.heads.size(), d.heads.size());
      for (std::size_t h = 0; h < d.heads.size(); ++h) {
        EXPECT_EQ(back.heads[h].resolution, d.heads[h].resolution);
        EXPECT_EQ(back.heads[h].keys, d.heads[h].keys);
        EXPECT_EQ(back.heads[h].data, d.heads[h].data);
      }
    }
  }
}

TEST(Atnd, HeaderLayout) {
  Xoshiro256 rng(2);
  const atnd::Dump d = random_dump(rng, atnd::ContentKind::kQueryKey, 2, 3, 5, false);
  const auto b = atnd::encode(d);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "ATND");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[8], 2);
  EXPECT_EQ(b[12], 3);
  EXPECT_EQ(b[16], 5);
  EXPECT_EQ(b[24], 1);
  EXPECT_EQ(b[29], 25 + 24);  // first payload offset, low byte
}

TEST(Atnd, FileRoundTrip) {
  Xoshiro256 rng(3);
  const atnd::Dump d = random_dump(rng, atnd::ContentKind::kMaps, 3, 2, 4, true);
  const auto dir = testutil::temp_dir("atnd_file");
  atnd::write(d, dir / "d.atnd");
  EXPECT_FALSE(std::filesystem::exists(dir / "d.atnd.tmp"));
  EXPECT_EQ(atnd::encode(atnd::read(dir / "d.atnd")), atnd::encode(d));
  try {
    atnd::read(dir / "missing.atnd");
    FAIL() << "expected an error";
  } catch (const atnd::AtndError& e) {
    EXPECT_EQ(e.code(), atnd::Errc::kIo);
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

TEST(Atnd, StructuralErrors) {
  Xoshiro256 rng(4);
  const auto good = atnd::encode(random_dump(rng, atnd::ContentKind::kMaps, 2, 2, 3, true));

  auto b = good;
  b[0] = 'X';
  EXPECT_EQ(decode_error(b), atnd::Errc::kBadMagic);

  b = good;
  b[4] = 2;
  EXPECT_EQ(decode_error(b), atnd::Errc::kBadVersion);

  b = good;
  b.pop_back();
  EXPECT_EQ(decode_error(b), atnd::Errc::kTruncated);

  b = good;
  b.push_back(0);
  EXPECT_EQ(decode_error(b), atnd::Errc::kTrailingBytes);

  b = good;
  put_u32(b, 25, 0);  // r_h of head 0
  EXPECT_EQ(decode_error(b), atnd::Errc::kBadHeader);

  b = good;
  b[25 + 12 + 4] -= 4;  // head 1 offset moved back into head 0
  EXPECT_EQ(decode_error(b), atnd::Errc::kOffsetOverlap);

  b = good;
  b[25 + 12 + 4] += 4;
  EXPECT_EQ(decode_error(b), atnd::Errc::kOffsetGap);

  b = good;
  b[24] = 7;
  EXPECT_EQ(decode_error(b), atnd::Errc::kBadHeader);

  b = good;
  put_u32(b, 20, 3);  // d_k != 0 for maps
  EXPECT_EQ(decode_error(b), atnd::Errc::kBadHeader);

  EXPECT_EQ(decode_error({'A', 'T'}), atnd::Errc::kTruncated);
}

TEST(Atnd, NonFinitePayload) {
  Xoshiro256 rng(5);
  atnd::Dump d = random_dump(rng, atnd::ContentKind::kQueryKey, 1, 1, 2, false);
  auto b = atnd::encode(d);
  put_u32(b, 25 + 12, 0x7fc00000u);  // NaN as the first key float
  try {
    atnd::decode(b);
    FAIL();
  } catch (const atnd::AtndError& e) {
    EXPECT_EQ(e.code(), atnd::Errc::kNonFinite);
    EXPECT_EQ(e.kind(), ErrorKind::kValidation);
  }
  d.heads[0].data[0] = INFINITY;
  EXPECT_THROW(atnd::encode(d), atnd::AtndError);
}

TEST(Atnd, LabelCountMustMatch) {
  Xoshiro256 rng(6);
  atnd::Dump d = random_dump(rng, atnd::ContentKind::kMaps, 1, 1, 3, true);
  d.labels.pop_back();
  EXPECT_THROW(atnd::encode(d), atnd::AtndError);
}

TEST(Atnd, HugeDeclaredSizesFailWithoutAllocating) {
  Xoshiro256 rng(7);
  auto b = atnd::encode(random_dump(rng, atnd::ContentKind::kQueryKey, 1, 1, 2, false));
  put_u32(b, 8, 0xFFFFFFFFu);  // H
  EXPECT_EQ(decode_error(b), atnd::Errc::kTruncated);
  b = atnd::encode(random_dump(rng, atnd::ContentKind::kQueryKey, 1, 1, 2, false));
  put_u32(b, 25, 0xFFFFFFFFu);  // r_h
  EXPECT_EQ(decode_error(b), atnd::Errc::kTruncated);
}

TEST(Atnd, TypedViews) {
  Xoshiro256 rng(8);
  atnd::Dump maps;
  maps.kind = atnd::ContentKind::kMaps;
  maps.timesteps = 1;
  maps.token_count = 2;
  maps.heads.push_back({2, {}, {0.25f, 0.75f, 0.5f, 0.5f, 1.0f, 0.0f, 0.0f, 1.0f}});
  const AttentionMap m = atnd::stored_map(maps, 0, 0);
  EXPECT_EQ(m.values()(0, 1), 0.75);
  EXPECT_THROW(atnd::query_matrix(maps, 0, 0), FormatError);

  const atnd::Dump ck = random_dump(rng, atnd::ContentKind::kConceptKeys, 2, 1, 3, false);
  EXPECT_EQ(atnd::concept_names(ck), (std::vector<std::string>{"concept_0", "concept_1", "concept_2"}));
  EXPECT_EQ(atnd::concept_keys(ck, 1).head_id(), 1u);
}
