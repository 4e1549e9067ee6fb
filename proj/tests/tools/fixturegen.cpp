// Regenerates the committed fixtures under tests/fixtures.
//
//   fixturegen <output root>
//
// Scripted model replies are pushed through the real pipeline and recorded
// with RecordingTransport, so the transcripts hash exactly what detect() sends.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <nlohmann/json.hpp>

#include "brandlens/detection_pipeline.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace brandlens;
using namespace brandlens::testing;

namespace {

const std::string kGpt = "openai/gpt-4-turbo";
const std::string kClaude = "anthropic/claude-3-opus";

// The worked example: phase-1 and phase-2 text as the model returned it.
const std::string kWhatsAppPhase1 =
    "Brand: WhatsApp\n"
    "Has Credentials: Yes\n"
    "Has Call-To-Actions: Yes\n"
    "List of Credentials fields: Phone number\n"
    "List of Call-To-Actions: INSTALL UPDATE\n"
    "Confidence Score: 9.50\n"
    "Supporting Evidence: The screenshot prominently displays the WhatsApp logo along with a "
    "characteristic green color scheme, which is strongly associated with the brand.\n"
    "The title in the HTML information, \xe2\x80\x9cWhatsApp,\xe2\x80\x9d the meta description, "
    "and headers text also merely state \xe2\x80\x9cWhatsApp,\xe2\x80\x9d reaffirming the identity "
    "of the webpage as belonging to WhatsApp.";

const std::string kWhatsAppPhase1Html =
    "Brand: WhatsApp\n"
    "Confidence Score: 9.50\n"
    "Supporting Evidence: The title in the HTML information, \xe2\x80\x9cWhatsApp,\xe2\x80\x9d the "
    "meta description, and headers text also merely state \xe2\x80\x9cWhatsApp,\xe2\x80\x9d "
    "reaffirming the identity of the webpage as belonging to WhatsApp.";

const std::string kWhatsAppPhase2 =
    "- Genuine/Phishing: Phishing\n"
    "- Evidence: The URL uses the domain \xe2\x80\x9cpolert.xyz\xe2\x80\x9d instead of the official "
    "domain \xe2\x80\x9cwhatsapp.com\xe2\x80\x9d, which suggests it is not associated with the "
    "official WhatsApp brand and may be suspicious or malicious.\n"
    "- Genuine URL: https://www.whatsapp.com";

std::string whatsapp_html() {
  return "<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\">\n"
         "<title>WhatsApp</title>\n<meta name=\"description\" content=\"WhatsApp\">\n"
         "<link rel=\"shortcut icon\" href=\"favicon.png\">\n"
         "<style>body{background:#25d366;font-family:sans-serif}</style></head>\n<body>\n"
         "<header class=\"header\"><img class=\"logo\" src=\"wa.png\" alt=\"WhatsApp\"> WhatsApp</header>\n"
         "<main><p>Your WhatsApp version has expired. Install the update to keep your chats.</p>\n"
         "<form action=\"send.php\" method=\"post\"><span>Phone number</span>\n"
         "<input type=\"tel\" name=\"phone\" placeholder=\"Phone number\">\n"
         "<button type=\"submit\">INSTALL UPDATE</button></form></main>\n"
         "<footer>WhatsApp LLC</footer>\n</body></html>\n";
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << j.dump(2) << '\n';
}

std::string phase1_text(const std::string& style, const std::optional<std::string>& brand,
                        InputMode mode, const std::string& evidence) {
  std::string b = brand ? *brand : "NA";
  std::string out;
  if (style == "numbered") {
    out += "1. Brand: " + b + "\n";
    if (mode != InputMode::HtmlOnly) {
      out += std::string("2. Has Credentials: ") + (brand ? "Yes" : "No") + "\n";
      out += std::string("3. Has Call_To_Action: ") + (brand ? "Yes" : "No") + "\n";
      out += std::string("4. List of credentials: ") + (brand ? "email, password" : "NA") + "\n";
      out += std::string("5. List of call_to_action: ") + (brand ? "Log in" : "NA") + "\n";
      out += std::string("6. Confidence Score: ") + (brand ? "8.75" : "1.00") + "\n";
      out += "7. Supporting Evidence: " + evidence + "\n";
    } else {
      out += std::string("2. Confidence Score: ") + (brand ? "8.25" : "1.00") + "\n";
      out += "3. Supporting Evidence: " + evidence + "\n";
    }
  } else {
    out += "Here is my analysis.\n\n";
    out += "**Brand:** " + b + "\n";
    if (mode != InputMode::HtmlOnly) {
      out += "**Has Credentials:** Yes\n**Has Call_To_Action:** Yes\n";
      out += "**List of credentials:** Email address, Password\n";
      out += "**List of call_to_action:** Sign In\n";
    }
    out += std::string("**Confidence Score:** ") + (brand ? "9.10" : "2.00") + "\n";
    out += "**Supporting Evidence:** " + evidence + "\n";
  }
  return out;
}

std::string phase2_text(bool genuine, const std::string& brand, const std::string& domain,
                        const std::string& official) {
  std::string out = std::string("- Genuine/Phishing: ") + (genuine ? "Genuine" : "Phishing") + "\n";
  if (genuine) {
    out += "- Evidence: The domain " + domain + " is an official domain of " + brand + ".\n";
  } else {
    out += "- Evidence: The domain " + domain + " is not associated with " + brand +
           "; the page imitates the brand on an unrelated domain.\n";
  }
  out += "- Genuine URL: " + official;
  return out;
}

struct Reply {
  std::optional<std::string> brand;  // nullopt answers NA
  bool safety_block = false;
  std::optional<bool> phase2_genuine;  // default: from the label
};

struct CorpusSample {
  std::string id;
  std::string url;
  GroundTruth truth;
  std::string brand;
  std::string official;
  // replies[model][mode]
  std::map<std::string, std::array<Reply, 3>> replies;
  bool blank = false;
};

// Runs detect() for every (sample, mode, model) with scripted replies and
// records the exchanges.
void record(const std::vector<WebpageSnapshot>& samples, const std::vector<InputMode>& modes,
            const std::vector<std::string>& models, const fs::path& fixture_path,
            const std::function<ScriptedTransport::Responder(const WebpageSnapshot&, InputMode,
                                                             const std::string&)>& script) {
  fs::remove(fixture_path);
  ScriptedTransport scripted(two_phase_responder("", ""));
  RecordingTransport recorder(scripted, fixture_path);
  Gateway gateway(recorder);
  PipelineConfig config;
  for (const auto& s : samples) {
    for (auto mode : modes) {
      for (const auto& model : models) {
        scripted.set_responder(script(s, mode, model));
        detect(s, mode, model, gateway, config);
      }
    }
  }
}

void generate_whatsapp(const fs::path& root) {
  fs::path dir = root / "whatsapp";
  fs::remove_all(dir);
  auto snap = make_snapshot("polert_whatsapp", "https://polert.xyz/52Lp/whatsapp.html",
                            whatsapp_html(), content_page_image(480, 320, 7, 37, 211, 102),
                            SampleLabel{GroundTruth::Phishing, "WhatsApp"});
  write_snapshot(dir / "dataset" / snap.sample_id, snap);
  auto loaded = load_snapshot(dir / "dataset" / snap.sample_id);
  record({loaded}, {kAllInputModes[0], kAllInputModes[1], kAllInputModes[2]}, {kGpt},
         dir / "transcripts.jsonl", [](const WebpageSnapshot&, InputMode mode, const std::string&) {
           return two_phase_responder(mode == InputMode::HtmlOnly ? kWhatsAppPhase1Html : kWhatsAppPhase1,
                                      kWhatsAppPhase2);
         });
}

std::vector<CorpusSample> corpus_plan() {
  auto ok = [](std::string b) { return Reply{std::move(b)}; };
  const Reply na{std::nullopt};
  const Reply blocked{std::nullopt, true};
  std::vector<CorpusSample> plan;
  plan.push_back({"c01_paypal_genuine", "https://www.paypal.com/signin", GroundTruth::Benign, "PayPal",
                  "https://www.paypal.com",
                  {{kGpt, {ok("PayPal"), ok("PayPal"), ok("PayPal")}},
                   {kClaude, {ok("PayPal"), ok("PayPal Credit"), ok("PayPal")}}}});
  plan.push_back({"c02_paypal_phish", "http://secure-account-update.com/paypal/login.php",
                  GroundTruth::Phishing, "PayPal", "https://www.paypal.com",
                  {{kGpt, {ok("PayPal"), ok("PayPal"), ok("PayPal")}},
                   {kClaude, {ok("PayPal"), ok("PayPal"), ok("PayPal")}}}});
  plan.push_back({"c03_paypal_phish_copy", "http://secure-account-update.com/paypal/login.php",
                  GroundTruth::Phishing, "PayPal", "https://www.paypal.com", {}});
  plan.push_back({"c04_whatsapp_phish", "https://polert.xyz/52Lp/whatsapp.html", GroundTruth::Phishing,
                  "WhatsApp", "https://www.whatsapp.com",
                  {{kGpt, {ok("Signal"), ok("WhatsApp"), ok("WhatsApp")}},
                   {kClaude, {ok("WhatsApp"), ok("WhatsApp"), ok("WhatsApp")}}}});
  plan.push_back({"c05_microsoft_genuine", "https://login.microsoftonline.com/common/oauth2",
                  GroundTruth::Benign, "Microsoft", "https://www.microsoft.com",
                  {{kGpt, {ok("Microsoft"), ok("Microsoft"), ok("Microsoft")}},
                   {kClaude,
                    {ok("Microsoft"), Reply{"Outlook", false, false}, Reply{"Outlook", false, false}}}}});
  plan.push_back({"c06_dhl_phish", "https://dhl-parcel-redelivery.top/track", GroundTruth::Phishing,
                  "DHL", "https://www.dhl.com",
                  {{kGpt, {ok("DHL"), ok("DHL"), ok("DHL Express Parcel")}},
                   {kClaude, {ok("Deutsche Post"), ok("Parcel Service"), ok("DHL")}}}});
  plan.push_back({"c07_blank_page", "https://example-empty.net/", GroundTruth::Benign, "Example",
                  "https://example-empty.net", {}, true});
  plan.push_back({"c08_netflix_phish", "https://account-hold-billing.site/nf/", GroundTruth::Phishing,
                  "Netflix", "https://www.netflix.com",
                  {{kGpt, {na, na, na}}, {kClaude, {ok("Netflix"), ok("Netflix"), ok("Netflix")}}}});
  plan.push_back({"c09_chase_phish", "https://chase-secure.verify-id.online/logon", GroundTruth::Phishing,
                  "Chase", "https://www.chase.com",
                  {{kGpt, {ok("Chase"), ok("Chase"), ok("Chase")}}, {kClaude, {blocked, blocked, blocked}}}});
  return plan;
}

void generate_corpus(const fs::path& root) {
  fs::path dir = root / "corpus";
  fs::remove_all(dir);
  auto plan = corpus_plan();
  std::uint32_t seed = 100;
  for (const auto& p : plan) {
    std::optional<SampleLabel> label = SampleLabel{p.truth, p.brand};
    WebpageSnapshot s;
    if (p.blank) {
      s = make_snapshot(p.id, p.url, "<html><head></head><body></body></html>\n",
                        uniform_image(320, 240, 255, 255, 255), label);
    } else if (p.id == "c03_paypal_phish_copy") {
      // Byte-identical capture of c02 under another id.
      s = load_snapshot(dir / "dataset" / "c02_paypal_phish");
      s.sample_id = p.id;
    } else {
      s = make_snapshot(p.id, p.url, login_page_html(p.brand, "<p>Case reference " + p.id + "</p>\n"),
                        content_page_image(400, 300, seed++), label);
    }
    write_snapshot(dir / "dataset" / p.id, s);
  }

  std::vector<WebpageSnapshot> samples = scan_dataset(dir / "dataset").snapshots;
  std::map<std::string, const CorpusSample*> by_id;
  for (const auto& p : plan) by_id[p.id] = &p;

  record(samples, {kAllInputModes[0], kAllInputModes[1], kAllInputModes[2]}, {kGpt, kClaude},
         dir / "transcripts.jsonl",
         [&](const WebpageSnapshot& s, InputMode mode, const std::string& model) -> ScriptedTransport::Responder {
           const CorpusSample& p = *by_id.at(s.sample_id);
           if (p.replies.empty()) return two_phase_responder("", "");
           const Reply& r = p.replies.at(model)[static_cast<std::size_t>(mode)];
           if (r.safety_block) {
             return [](const LlmRequest&) -> Completion {
               throw GatewayError(GatewayErrorKind::SafetyFilter,
                                  "http 400: {\"error\":{\"type\":\"invalid_request_error\","
                                  "\"message\":\"Output blocked by content filtering policy\"}}");
             };
           }
           std::string evidence = "In the " + std::string(to_string(mode)) + " input, the " +
                                  (r.brand ? *r.brand + " name and logo are visible" : "page shows no brand") +
                                  " next to a sign-in form.";
           std::string style = model == kGpt ? "numbered" : "markdown";
           bool genuine = r.phase2_genuine.value_or(p.truth == GroundTruth::Benign);
           std::string domain = registrable_domain(p.url);
           return two_phase_responder(phase1_text(style, r.brand, mode, evidence),
                                      phase2_text(genuine, r.brand.value_or(p.brand), domain, p.official));
         });

  nlohmann::ordered_json aliases = nlohmann::ordered_json::array();
  aliases.push_back({"Microsoft", "Outlook"});
  write_json(dir / "aliases.json", aliases);
}

struct AliasSample {
  std::string id;
  std::string url;
  GroundTruth truth;
  std::string brand;         // label
  std::string phase1_brand;  // what phase 1 answers
  std::string official;
};

void generate_alias_set(const fs::path& root) {
  fs::path dir = root / "alias_set";
  fs::remove_all(dir);
  const std::vector<AliasSample> plan = {
      {"a01_facebook_meta", "https://www.meta.com/login/", GroundTruth::Benign, "Facebook", "Facebook",
       "https://www.meta.com"},
      {"a02_x_twitter", "https://twitter.com/i/flow/login", GroundTruth::Benign, "X", "X",
       "https://twitter.com"},
      {"a03_google", "https://accounts.google.com/signin", GroundTruth::Benign, "Google", "Google",
       "https://accounts.google.com"},
      {"a04_amazon_uk", "https://www.amazon.co.uk/ap/signin", GroundTruth::Benign, "Amazon", "Amazon",
       "https://www.amazon.co.uk"},
      {"a05_microsoft_live", "https://login.live.com/login.srf", GroundTruth::Benign, "Microsoft",
       "Microsoft", "https://login.live.com"},
      {"a06_apple_icloud", "https://www.icloud.com/", GroundTruth::Benign, "Apple", "Apple",
       "https://www.icloud.com"},
      {"a07_paypal_phish", "https://paypal.com-secure-login.xyz/webapps/", GroundTruth::Phishing, "PayPal",
       "PayPal", "https://www.paypal.com"},
      {"a08_whatsapp_phish", "https://polert.xyz/52Lp/whatsapp.html", GroundTruth::Phishing, "WhatsApp",
       "WhatsApp", "https://www.whatsapp.com"},
      {"a09_netflix_phish", "https://netflix-billing-update.com/account", GroundTruth::Phishing, "Netflix",
       "Netflix", "https://www.netflix.com"},
      {"a10_dhl_phish", "https://dhl-tracking.info/parcel/redeliver", GroundTruth::Phishing, "DHL", "DHL",
       "https://www.dhl.com"},
      {"a11_chase_phish", "https://secure-verify.online/chase/logon", GroundTruth::Phishing, "Chase",
       "Chase", "https://www.chase.com"},
      {"a12_credit_agricole_phish", "https://ca-particuliers-secure.net/acces", GroundTruth::Phishing,
       "Credit Agricole", "Credit Agricoole", "https://www.credit-agricole.fr"},
  };
  std::uint32_t seed = 500;
  for (const auto& p : plan) {
    write_snapshot(dir / "dataset" / p.id,
                   make_snapshot(p.id, p.url, login_page_html(p.brand, "<p>Case reference " + p.id + "</p>\n"),
                                 content_page_image(400, 300, seed++),
                                 SampleLabel{p.truth, p.brand}));
  }
  std::map<std::string, const AliasSample*> by_id;
  for (const auto& p : plan) by_id[p.id] = &p;
  auto samples = scan_dataset(dir / "dataset").snapshots;
  record(samples, {InputMode::Both}, {kGpt}, dir / "transcripts.jsonl",
         [&](const WebpageSnapshot& s, InputMode mode, const std::string&) {
           const AliasSample& p = *by_id.at(s.sample_id);
           std::string evidence = "The " + p.phase1_brand + " logo and name appear above the sign-in form.";
           std::string p2 = phase2_text(p.truth == GroundTruth::Benign, p.brand, registrable_domain(p.url),
                                        p.official);
           if (p.phase1_brand != p.brand) {
             p2 = "- Genuine/Phishing: Phishing\n- Evidence: The identified brand \"" + p.phase1_brand +
                  "\" is a misspelling of " + p.brand + ". The domain " + registrable_domain(p.url) +
                  " does not belong to " + p.brand + ".\n- Genuine URL: " + p.official;
           }
           return two_phase_responder(phase1_text("numbered", p.phase1_brand, mode, evidence), p2);
         });
}

}  // namespace

// Labeled blank / content pages for threshold calibration, in the format the
// filter command's --calibrate flag reads.
void generate_calibration(const fs::path& root) {
  fs::path dir = root / "calibration";
  fs::remove_all(dir);
  fs::create_directories(dir / "dataset");
  auto blank_page = [](const std::string& id, Image img) {
    return make_snapshot(id, "https://loading.example/" + id, "<html><body><div id=\"app\"></div></body></html>",
                         std::move(img));
  };
  Image spinner(480, 320, 250, 250, 250);
  spinner.fill_rect(232, 152, 248, 168, 200, 200, 200);
  std::vector<WebpageSnapshot> samples = {
      blank_page("b1_white", Image(480, 320, 255, 255, 255)),
      blank_page("b2_offwhite", Image(480, 320, 246, 244, 240)),
      blank_page("b3_spinner", spinner),
      make_snapshot("k1_bank", "https://bank.example/login", login_page_html("Example Bank"),
                    content_page_image(480, 320, 101)),
      make_snapshot("k2_shop", "https://shop.example/", login_page_html("Example Shop"),
                    content_page_image(480, 320, 102, 200, 60, 20)),
      make_snapshot("k3_mail", "https://mail.example/", login_page_html("Example Mail"),
                    content_page_image(480, 320, 103, 90, 90, 90))};
  for (const auto& s : samples) write_snapshot(dir / "dataset" / s.sample_id, s);
  write_json(dir / "labels.json", {{"blank", {"b1_white", "b2_offwhite", "b3_spinner"}},
                                   {"content", {"k1_bank", "k2_shop", "k3_mail"}}});
}

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: fixturegen <output root>\n";
    return 64;
  }
  fs::path root = argv[1];
  fs::create_directories(root);
  try {
    generate_whatsapp(root);
    generate_corpus(root);
    generate_alias_set(root);
    generate_calibration(root);
  } catch (const std::exception& e) {
    std::cerr << "fixturegen: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
