#include <gtest/gtest.h>

#include "brandlens/html_extractor.hpp"
#include "brandlens/text_util.hpp"

using namespace brandlens;

TEST(Extract, TitleAndMetaOnly) {
  auto info = extract_key_info(
      "<html><head><title>WhatsApp</title><meta name=\"description\" content=\"WhatsApp\"></head></html>");
  EXPECT_EQ(info.title, "WhatsApp");
  EXPECT_EQ(info.meta_description, "WhatsApp");
  HtmlKeyInfo expected;
  expected.title = "WhatsApp";
  expected.meta_description = "WhatsApp";
  EXPECT_EQ(info, expected);
}

TEST(Extract, EmptyDocument) {
  auto info = extract_key_info("");
  EXPECT_TRUE(info.all_empty());
  EXPECT_EQ(info, HtmlKeyInfo{});
}

TEST(Extract, LogoAndFooter) {
  auto info = extract_key_info(
      "<body><img class=\"logo\" alt=\"Alibaba\" src=\"a.png\"><footer>\xc2\xa9 Alibaba.com</footer></body>");
  EXPECT_EQ(info.logo_alt_texts, std::vector<std::string>{"Alibaba"});
  EXPECT_EQ(info.footer_text, "\xc2\xa9 Alibaba.com");
}

TEST(Extract, AllFields) {
  const char* html = R"(<!DOCTYPE html>
<html><head>
<title>  Sign in &amp; Continue </title>
<meta name="Description" content="Secure &quot;login&quot;">
<link rel="shortcut icon" href="/static/fav.ico">
<script>var title = "<title>nope</title>";</script>
<style>.x{}</style>
</head><body>
<div id="header"><img id="site-logo" alt="Contoso" src="c.png"> Contoso Bank</div>
<nav><ul><li>Home<li>Accounts</ul></nav>
<p>First paragraph
<p>Second <b>bold</b> paragraph</p>
<span>Forgot password?</span>
<div class="page-footer footer">Contoso Ltd</div>
<!-- <footer>commented</footer> -->
</body></html>)";
  auto info = extract_key_info(html);
  EXPECT_EQ(info.title, "Sign in & Continue");
  EXPECT_EQ(info.meta_description, "Secure \"login\"");
  EXPECT_EQ(info.favicon_path, "/static/fav.ico");
  EXPECT_EQ(info.logo_alt_texts, std::vector<std::string>{"Contoso"});
  EXPECT_EQ(info.header_text, "Contoso Bank");
  EXPECT_EQ(info.nav_bar_content, "Home Accounts");
  ASSERT_EQ(info.paragraph_texts.size(), 2u);
  EXPECT_EQ(info.paragraph_texts[0], "First paragraph");
  EXPECT_EQ(info.paragraph_texts[1], "Second bold paragraph");
  EXPECT_EQ(info.span_texts, std::vector<std::string>{"Forgot password?"});
  EXPECT_EQ(info.footer_text, "Contoso Ltd");
}

TEST(Extract, MalformedMarkupIsTotal) {
  for (const char* html : {"<", "<<<>>>", "<p", "<title>unterminated", "</div></div><p>x",
                           "<a href='x>broken", "<!--", "<script>", "&#xZZZ; &#99999999;"}) {
    EXPECT_NO_THROW(extract_key_info(html)) << html;
  }
  auto deep = std::string(10000, '<') + "div>";
  std::string nested;
  for (int i = 0; i < 5000; ++i) nested += "<div>";
  EXPECT_NO_THROW(extract_key_info(nested + "x"));
  EXPECT_NO_THROW(extract_key_info(deep));
}

TEST(Extract, SequencesAreCapped) {
  std::string html;
  for (int i = 0; i < 200; ++i) html += "<p>para " + std::to_string(i) + "</p>";
  auto info = extract_key_info(html);
  EXPECT_EQ(info.paragraph_texts.size(), kMaxSequenceEntries);
  EXPECT_EQ(info.paragraph_texts.front(), "para 0");
}

TEST(VisibleText, SkipsScripts) {
  EXPECT_EQ(visible_text("<title>T</title><script>x()</script><p>a <i>b</i></p>"), "T a b");
  EXPECT_EQ(visible_text("<html><body>   </body></html>"), "");
}

TEST(Truncate, UnderBudgetIsIdentity) {
  auto info = extract_key_info("<title>PayPal</title><p>Log in</p><span>Help</span>");
  EXPECT_EQ(truncate_for_budget(info, 4096), info);
}

TEST(Truncate, SpansGoFirst) {
  HtmlKeyInfo info;
  info.title = "Bank";
  info.meta_description = "Online banking";
  info.footer_text = "Bank plc";
  info.paragraph_texts = {"Welcome back", "Sign in to view your accounts and recent payments"};
  for (int i = 0; i < 10; ++i) info.span_texts.push_back(std::string(100, 'a' + i));
  std::size_t budget = total_chars(info) - 1000;
  ASSERT_GE(budget, kMinHtmlBudgetChars);
  auto out = truncate_for_budget(info, budget);
  EXPECT_TRUE(out.span_texts.empty());
  EXPECT_EQ(out.title, info.title);
  EXPECT_EQ(out.meta_description, info.meta_description);
  EXPECT_EQ(out.footer_text, info.footer_text);
  EXPECT_EQ(out.paragraph_texts, info.paragraph_texts);
}

TEST(Truncate, HugeParagraph) {
  std::string html = "<title>Contoso</title><p>" + std::string(10 * 1024 * 1024, 'x') + "</p>";
  auto out = truncate_for_budget(extract_key_info(html), 4096);
  EXPECT_LE(total_chars(out), 4096u);
  EXPECT_EQ(out.title, "Contoso");
}

TEST(Truncate, CountsCodePoints) {
  HtmlKeyInfo info;
  info.title = "T";
  info.paragraph_texts = {std::string(300, 'x')};
  for (int i = 0; i < 100; ++i) info.paragraph_texts[0] += "\xc3\xa9";
  auto out = truncate_for_budget(info, 100);
  EXPECT_LE(total_chars(out), 100u);
  EXPECT_TRUE(is_valid_utf8(out.paragraph_texts.empty() ? "" : out.paragraph_texts[0]));
  EXPECT_THROW(truncate_for_budget(info, 10), std::invalid_argument);
}

TEST(KeyInfoJson, RoundTripAndOrder) {
  auto info = extract_key_info("<title>A</title><nav>N</nav><p>P</p>");
  auto j = to_json(info);
  EXPECT_EQ(j.begin().key(), "title");
  EXPECT_EQ(key_info_from_json(j), info);
}
