#include <gtest/gtest.h>

#include <regex>
#include <sstream>

#include "brandlens/detection_pipeline.hpp"
#include "brandlens/public_suffix.hpp"
#include "test_support.hpp"

using namespace brandlens;

TEST(Punycode, EncodesLabels) {
  EXPECT_EQ(to_a_label("example"), "example");
  EXPECT_EQ(to_a_label("b\xc3\xbc" "cher"), "xn--bcher-kva");
  EXPECT_EQ(to_a_label("\xe9\xa3\x9f\xe7\x8b\xae"), "xn--85x722f");  // 食狮
  EXPECT_EQ(to_a_label("\xe5\x85\xac\xe5\x8f\xb8"), "xn--55qx5d");   // 公司
  EXPECT_EQ(to_a_label("\xe4\xb8\xad\xe5\x9b\xbd"), "xn--fiqs8s");   // 中国
}

TEST(PublicSuffix, BundledSnapshotHasVersion) {
  const auto& psl = PublicSuffixList::bundled();
  EXPECT_FALSE(psl.version().empty());
  EXPECT_GT(psl.rule_count(), 5000u);
}

// Official test vectors shipped with the list.
TEST(PublicSuffix, OfficialVectors) {
  const auto& psl = PublicSuffixList::bundled();
  std::istringstream in(brandlens::testing::read_text(brandlens::testing::fixtures_dir() / "psl_test_vectors.txt"));
  std::regex re(R"(^checkPublicSuffix\((null|'[^']*'), (null|'[^']*')\);)");
  std::string line;
  int checked = 0;
  while (std::getline(in, line)) {
    std::smatch m;
    if (!std::regex_search(line, m, re)) continue;
    if (m[1] == "null") continue;
    std::string input = m[1].str().substr(1, m[1].length() - 2);
    std::optional<std::string> expected;
    if (m[2] != "null") expected = m[2].str().substr(1, m[2].length() - 2);
    EXPECT_EQ(psl.registrable_domain(input), expected) << input;
    ++checked;
  }
  EXPECT_GT(checked, 60);
}

TEST(PublicSuffix, WildcardAndException) {
  auto psl = PublicSuffixList::parse("// VERSION: test\nck\n*.ck\n!www.ck\ncom\n");
  EXPECT_EQ(psl.version(), "test");
  EXPECT_EQ(psl.registrable_domain("a.b.test.ck"), "b.test.ck");
  EXPECT_EQ(psl.registrable_domain("www.www.ck"), "www.ck");
  EXPECT_EQ(psl.registrable_domain("test.ck"), std::nullopt);
  EXPECT_EQ(psl.public_suffix("x.y.com"), "com");
}

TEST(RegistrableDomain, Examples) {
  EXPECT_EQ(registrable_domain("https://polert.xyz/52Lp/whatsapp.html"), "polert.xyz");
  EXPECT_EQ(registrable_domain("https://www.whatsapp.com"), "whatsapp.com");
  // Frozen from an independent implementation (python publicsuffixlist) on the
  // same snapshot.
  EXPECT_EQ(registrable_domain("https://a.b.example.co.uk/x"), "example.co.uk");
  EXPECT_EQ(registrable_domain("http://10.0.0.7:8080/admin"), "10.0.0.7");
  EXPECT_EQ(registrable_domain("http://[::1]/"), "[::1]");
  EXPECT_EQ(registrable_domain("https://co.uk/"), "co.uk");
  EXPECT_THROW(registrable_domain("not a url"), InvalidUrl);
  EXPECT_THROW(registrable_domain("/path/only"), InvalidUrl);
}
