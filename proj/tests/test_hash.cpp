#include <gtest/gtest.h>

#include "dlb/hash.hpp"

using namespace dlb;

TEST(Hash, Bkdr) {
  EXPECT_EQ(bkdr_hash("", 131), 0u);
  EXPECT_EQ(bkdr_hash("abc", 131), 1677554u);
  EXPECT_EQ(bkdr_hash("abc", 131), (97u * 131u + 98u) * 131u + 99u);
  EXPECT_NE(bkdr_hash("abc"), bkdr_hash("acb"));
}

TEST(Hash, Murmur3ReferenceVectors) {
  EXPECT_EQ(murmur3_32("", 0), 0u);
  EXPECT_EQ(murmur3_32("hello", 0), 0x248bfa47u);
  // published vectors for the x86_32 variant
  EXPECT_EQ(murmur3_32("", 1), 0x514e28b7u);
  EXPECT_EQ(murmur3_32("", 0xffffffffu), 0x81f16f39u);
  EXPECT_EQ(murmur3_32("test", 0), 0xba6bd213u);
  EXPECT_EQ(murmur3_32("Hello, world!", 0), 0xc0363e43u);
  EXPECT_EQ(murmur3_32("The quick brown fox jumps over the lazy dog", 0), 0x2e4ff723u);
  EXPECT_NE(murmur3_32("hello", 0), murmur3_32("hello", 1));
}

TEST(Hash, Fnv1aReferenceVectors) {
  EXPECT_EQ(fnv1a_32(""), 2166136261u);
  EXPECT_EQ(fnv1a_32("a"), 0xe40c292cu);
  EXPECT_EQ(fnv1a_32("foobar"), 0xbf9cf968u);
}

TEST(Hash, FromName) {
  EXPECT_EQ(HashFn::from_name("bkdr").name(), "bkdr");
  EXPECT_EQ(HashFn::from_name("murmur3").name(), "murmur3");
  EXPECT_EQ(HashFn::from_name("fnv1a").name(), "fnv1a");
  EXPECT_THROW(HashFn::from_name("md5"), UnknownHash);
  EXPECT_EQ(HashFn::bkdr()("abc"), 1677554u);
}

TEST(Hash, ToRing) {
  EXPECT_EQ(hash_to_ring("abc", HashFn::bkdr(), 1024).value, 1677554u % 1024u);
  EXPECT_EQ(hash_to_ring("abc", HashFn::bkdr(), 1024).value, 242u);
  for (const char* k : {"", "x", "hello", "12345.5"}) {
    const auto p = hash_to_ring(k, HashFn::murmur3(), 2);
    EXPECT_LT(p.value, 2u);
    EXPECT_EQ(p, hash_to_ring(k, HashFn::murmur3(), 2));
  }
  EXPECT_THROW(hash_to_ring("a", HashFn::fnv1a(), 1), ValidationError);
}

TEST(Hash, KeyToStringRoundTrips) {
  for (double k : {0.0, 1.0, 0.1, 123456.789, 1e-300, 2.5e17, -7.25}) {
    const auto s = key_to_string(k);
    EXPECT_EQ(std::stod(s), k) << s;
  }
  EXPECT_EQ(key_to_string(0.5), "0.5");
  EXPECT_EQ(key_to_string(3.0), "3");
}
