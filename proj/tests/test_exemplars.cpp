#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "error.hpp"
#include "exemplars.hpp"
#include "support.hpp"

using namespace thumbtruth;
using tt_test::TempDir;

namespace {

EmbeddingVector vec(std::vector<double> v) { return EmbeddingVector{std::move(v)}; }

ExemplarEntry entry(const std::string& id, Label label, EmbeddingVector v, const std::string& country = "US") {
  ExemplarEntry e;
  e.video_id = id;
  e.label = label;
  e.vector = std::move(v);
  e.country = country;
  e.language = "English";
  e.thumbnail_description = "thumb " + id;
  e.explanation = "because " + id;
  return e;
}

double oracle_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += (long double)a[i] * b[i];
    na += (long double)a[i] * a[i];
    nb += (long double)b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return static_cast<double>(dot / std::sqrt(na * nb));
}

SendOptions quiet() {
  SendOptions o;
  o.sleeper = no_sleep();
  o.retry.max_attempts = 2;
  return o;
}

}  // namespace

TEST_CASE("cosine similarity") {
  CHECK(cosine_similarity(vec({1, 2, 2}), vec({2, 1, 2})) == doctest::Approx(8.0 / 9.0));
  CHECK(cosine_similarity(vec({1, 0}), vec({0, 1})) == 0.0);
  CHECK(cosine_similarity(vec({1, 0}), vec({-3, 0})) == doctest::Approx(-1.0));
  CHECK(cosine_similarity(vec({0, 0}), vec({1, 1})) == 0.0);
  CHECK_THROWS_AS(cosine_similarity(vec({1, 0}), vec({1, 0, 0})), Error);
}

TEST_CASE("cosine matches oracle, symmetric and bounded") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 2000; ++trial) {
    std::size_t d = 1 + rng() % 32;
    std::vector<double> a(d), b(d);
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = g(rng);
    double c = cosine_similarity(vec(a), vec(b));
    REQUIRE(c == doctest::Approx(oracle_cosine(a, b)).epsilon(1e-9));
    REQUIRE(c == cosine_similarity(vec(b), vec(a)));
    REQUIRE(c >= -1.0);
    REQUIRE(c <= 1.0);
    auto scaled = a;
    double k = 0.001 + (rng() % 1000);
    for (auto& x : scaled) x *= k;
    REQUIRE(cosine_similarity(vec(scaled), vec(b)) == doctest::Approx(c).epsilon(1e-9));
  }
}

TEST_CASE("hash embedder") {
  HashEmbedder e(128);
  CHECK(e.dimension() == 128);
  CHECK(e.id() == "hash3-128");
  auto a = embed("A man jumps from a cliff into the sea", e);
  CHECK(a == embed("A man jumps from a cliff into the sea", e));
  CHECK(a == embed("a MAN jumps from a cliff into the SEA", e));  // lowercased
  double norm = 0;
  for (double x : a.values) norm += x * x;
  CHECK(norm == doctest::Approx(1.0));
  auto empty = embed("", e);
  CHECK(std::all_of(empty.values.begin(), empty.values.end(), [](double x) { return x == 0.0; }));
  CHECK(cosine_similarity(empty, a) == 0.0);
  CHECK(cosine_similarity(embed("x", e), embed("x", e)) == doctest::Approx(1.0));

  HashEmbedder wide(256);
  auto u = embed("Recipe for a chocolate cake with three layers of frosting", wide);
  auto v = embed("Quarterly earnings report of a semiconductor company", wide);
  CHECK(cosine_similarity(u, v) < 0.9);
  auto near = embed("Recipe for a chocolate cake with two layers of frosting", wide);
  CHECK(cosine_similarity(u, near) > cosine_similarity(u, v));
}

TEST_CASE("nearest_per_class examples") {
  ExemplarIndex index("t", 2);
  index.add(entry("m1", Label::Misleading, vec({1, 0})));
  index.add(entry("m2", Label::Misleading, vec({0.6, 0.8})));
  index.add(entry("n1", Label::NotMisleading, vec({0, 1})));
  index.add(entry("n2", Label::NotMisleading, vec({-1, 0})));

  auto r = nearest_per_class("q", vec({1, 0.1}), index);
  CHECK(r.misleading.video_id == "m1");
  CHECK(r.not_misleading.video_id == "n1");

  // the query itself never comes back
  auto self = nearest_per_class("m1", vec({1, 0}), index);
  CHECK(self.misleading.video_id == "m2");

  // ties go to the smallest id
  ExemplarIndex ties("t", 2);
  ties.add(entry("mb", Label::Misleading, vec({1, 0})));
  ties.add(entry("ma", Label::Misleading, vec({2, 0})));
  ties.add(entry("n", Label::NotMisleading, vec({0, 1})));
  CHECK(nearest_per_class("q", vec({1, 0}), ties).misleading.video_id == "ma");

  ExemplarIndex one_class("t", 2);
  one_class.add(entry("m", Label::Misleading, vec({1, 0})));
  try {
    nearest_per_class("q", vec({1, 0}), one_class);
    FAIL("expected ClassExhausted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ClassExhausted);
  }
  CHECK_THROWS_AS(nearest_per_class("q", vec({1, 0, 0}), index), Error);
  CHECK_THROWS_AS(index.add(entry("m1", Label::Misleading, vec({1, 0}))), Error);
  CHECK_THROWS_AS(index.add(entry("x", Label::Misleading, vec({1, 0, 0}))), Error);
}

TEST_CASE("pool filter") {
  ExemplarIndex index("t", 2);
  index.add(entry("m_us", Label::Misleading, vec({1, 0}), "US"));
  index.add(entry("m_uk", Label::Misleading, vec({0.9, 0.1}), "UK"));
  index.add(entry("n_us", Label::NotMisleading, vec({0, 1}), "US"));
  index.add(entry("n_uk", Label::NotMisleading, vec({0.1, 0.9}), "UK"));
  auto r = nearest_per_class("q", vec({1, 0}), index, PoolFilter{"UK", ""});
  CHECK(r.misleading.video_id == "m_uk");
  CHECK(r.not_misleading.video_id == "n_uk");
  CHECK_THROWS_AS(nearest_per_class("q", vec({1, 0}), index, PoolFilter{"Brazil", ""}), Error);
}

TEST_CASE("nearest_per_class matches brute force") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t d = 2 + rng() % 8;
    ExemplarIndex index("t", d);
    std::size_t n = 2 + rng() % 40;
    std::vector<ExemplarEntry> all;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v(d);
      for (auto& x : v) x = g(rng);
      Label l = i == 0 ? Label::Misleading : i == 1 ? Label::NotMisleading
                                                    : (rng() % 2 ? Label::Misleading : Label::NotMisleading);
      all.push_back(entry(fmt::format("e{:03d}", i), l, vec(v)));
      index.add(all.back());
    }
    std::vector<double> q(d);
    for (auto& x : q) x = g(rng);
    auto r = nearest_per_class("none", vec(q), index);
    for (Label l : {Label::Misleading, Label::NotMisleading}) {
      double best = -2;
      std::string best_id;
      for (const auto& e : all) {
        if (e.label != l) continue;
        double s = oracle_cosine(q, e.vector.values);
        if (s > best + 1e-12 || (std::abs(s - best) <= 1e-12 && e.video_id < best_id)) {
          best = s;
          best_id = e.video_id;
        }
      }
      const auto& got = l == Label::Misleading ? r.misleading : r.not_misleading;
      REQUIRE(got.video_id == best_id);
      REQUIRE(got.label == l);
    }
    // positive rescaling of the query changes nothing
    auto scaled = q;
    for (auto& x : scaled) x *= 3.5;
    auto r2 = nearest_per_class("none", vec(scaled), index);
    REQUIRE(r2.misleading.video_id == r.misleading.video_id);
    REQUIRE(r2.not_misleading.video_id == r.not_misleading.video_id);
  }
}

TEST_CASE("index round trip is bit exact") {
  TempDir dir;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1, 1);
  ExemplarIndex index("hash3-16", 16);
  for (int i = 0; i < 30; ++i) {
    std::vector<double> v(16);
    for (auto& x : v) x = u(rng) / 3.0;
    auto e = entry("v" + std::to_string(i), i % 2 ? Label::Misleading : Label::NotMisleading, vec(v));
    e.description_text = "desc \"quoted\"\nline " + std::to_string(i);
    e.subtitles_text = "subs";
    index.add(e);
  }
  index.save(dir / "store.jsonl");
  auto loaded = ExemplarIndex::load(dir / "store.jsonl");
  CHECK(loaded.embedder_id() == "hash3-16");
  REQUIRE(loaded.entries().size() == 30);
  for (std::size_t i = 0; i < 30; ++i) {
    const auto& a = index.entries()[i];
    const auto& b = loaded.entries()[i];
    CHECK(a.video_id == b.video_id);
    CHECK(a.label == b.label);
    CHECK(a.description_text == b.description_text);
    for (std::size_t k = 0; k < 16; ++k) REQUIRE(std::memcmp(&a.vector.values[k], &b.vector.values[k], sizeof(double)) == 0);
  }
  CHECK(loaded.find("v3") != nullptr);
  CHECK(loaded.find("nope") == nullptr);
  CHECK_THROWS_AS(ExemplarIndex::load(dir / "missing.jsonl"), Error);
}

TEST_CASE("first_sentence") {
  CHECK(first_sentence("A red car. It is fast.") == "A red car.");
  CHECK(first_sentence("  Wow! Look") == "Wow!");
  CHECK(first_sentence("Version 1.5 is out. Yes") == "Version 1.5 is out.");
  CHECK(first_sentence("no terminator") == "no terminator");
  CHECK(first_sentence("").empty());
}

TEST_CASE("thumbnail description generation") {
  TempDir dir;
  TextCache cache(dir.path());
  auto gen = script_mock({{ScriptMatcher::substring("hqdefault"),
                           {ChatOutcome::ok("A man points at a giant fish. Extra detail here.")}}});
  auto uri = thumbnail_url("abc");
  TokenUsage usage;
  CHECK(generate_thumbnail_description(uri, *gen, &cache, quiet(), &usage) == "A man points at a giant fish.");
  CHECK(generate_thumbnail_description(uri, *gen, &cache, quiet()) == "A man points at a giant fish.");
  CHECK(gen->call_count() == 1);
  auto req = gen->requests().front();
  REQUIRE(req.parts.size() == 2);
  CHECK(std::get<ImageAttachment>(req.parts[1]).uri == uri);

  auto empty = script_mock({{ScriptMatcher::any(), {ChatOutcome::ok("")}}});
  try {
    generate_thumbnail_description(uri, *empty, nullptr, quiet());
    FAIL("expected ProviderBlocked");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ProviderBlocked);
  }
  auto down = script_mock({{ScriptMatcher::any(), {ChatOutcome::transport_error("503")}}});
  try {
    generate_thumbnail_description(uri, *down, nullptr, quiet());
    FAIL("expected ProviderUnavailable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ProviderUnavailable);
  }
  CHECK(down->call_count() == 2);
}

TEST_CASE("explanation generation") {
  auto long_desc = tt_test::lorem(500, "d");
  auto prompt = explanation_prompt("thumb", Label::Misleading, long_desc, "");
  CHECK(prompt.find("Misleading") != std::string::npos);
  CHECK(prompt.find("d199") != std::string::npos);
  CHECK(prompt.find("d200") == std::string::npos);

  auto gen = script_mock({{ScriptMatcher::substring("Not Misleading"), {ChatOutcome::ok("  It shows the real thing.  ")}},
                          {ScriptMatcher::any(), {ChatOutcome::ok("It exaggerates.")}}});
  CHECK(generate_explanation("thumb", Label::NotMisleading, "d", "s", *gen, nullptr, quiet()) ==
        "It shows the real thing.");
  CHECK(generate_explanation("thumb", Label::Misleading, "d", "s", *gen, nullptr, quiet()) == "It exaggerates.");
}

TEST_CASE("build_card") {
  auto e = entry("v1", Label::Misleading, vec({1, 0}));
  e.description_text = tt_test::lorem(300, "w");
  auto card = build_card(e);
  CHECK(card.categorization == Label::Misleading);
  CHECK(count_words(card.description_excerpt) == 200);
  CHECK(card.subtitles_excerpt.empty());
  e.explanation.clear();
  try {
    build_card(e);
    FAIL("expected IncompleteEntry");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::IncompleteEntry);
  }
}
