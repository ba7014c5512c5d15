#include <doctest.h>

#include <algorithm>

#include "qm/gateway.hpp"
#include "support/fixtures.hpp"
#include "support/stub_server.hpp"

using namespace qm;
using qm::testing::stub_server;
using qm::testing::temp_dir;

namespace {

token_distribution dist_of(std::vector<std::pair<std::string, double>> pairs) {
    token_distribution d;
    for (auto& [t, p] : pairs) d.entries.push_back({t, p});
    return d;
}


http_backend_config stub_config(const std::string& base_url, bool chat,
                                const char* template_id = nullptr, bool forced = false) {
    http_backend_config cfg;
    cfg.id = "stub";
    cfg.base_url = base_url;
    cfg.model = "test";
    cfg.chat = chat;
    if (template_id) cfg.template_id = template_id;
    cfg.forced_pair = forced;
    cfg.retry_backoff_ms = 1;
    return cfg;
}

rendered_prompt sample_prompt(const char* target_id = "t.1") {
    answer_matrix m = qm::testing::toy_matrix({1, 0}, 2);
    return build_qm(m, m.respondents()[0], *m.find_question(target_id), default_context(m));
}

}  // namespace

TEST_SUITE("gateway") {

TEST_CASE("extract_yes_no sums case and whitespace variants, exact match only") {
    auto m = extract_yes_no(dist_of({{"Yes", 0.41}, {"yes", 0.20}, {"no", 0.10}, {"No", 0.05}, {"I", 0.10}}));
    CHECK(m.p_yes_raw == doctest::Approx(0.61).epsilon(1e-12));
    CHECK(m.p_no_raw == doctest::Approx(0.15).epsilon(1e-12));

    auto none = extract_yes_no(dist_of({{" I", 0.5}, {"The", 0.3}}));
    CHECK(none.p_yes_raw == 0.0);
    CHECK(none.p_no_raw == 0.0);

    auto folded = extract_yes_no(dist_of({{"YES", 0.2}, {" no", 0.2}}));
    CHECK(folded.p_yes_raw == doctest::Approx(0.2));
    CHECK(folded.p_no_raw == doctest::Approx(0.2));

    // punctuation never matches
    auto punct = extract_yes_no(dist_of({{"yes.", 0.5}, {"no!", 0.3}}));
    CHECK(punct.p_yes_raw == 0.0);
    CHECK(punct.p_no_raw == 0.0);
}

TEST_CASE("extract_yes_no is idempotent and order-insensitive among equal ranks") {
    auto base = dist_of({{"Yes", 0.2}, {"no", 0.2}, {"yes", 0.2}, {"I", 0.2}});
    auto m1 = extract_yes_no(base);
    std::vector<std::vector<std::pair<std::string, double>>> orders = {
        {{"no", 0.2}, {"Yes", 0.2}, {"I", 0.2}, {"yes", 0.2}},
        {{"I", 0.2}, {"yes", 0.2}, {"no", 0.2}, {"Yes", 0.2}},
    };
    for (auto& o : orders) {
        auto m2 = extract_yes_no(dist_of(o));
        CHECK(m2.p_yes_raw == doctest::Approx(m1.p_yes_raw).epsilon(1e-12));
        CHECK(m2.p_no_raw == doctest::Approx(m1.p_no_raw).epsilon(1e-12));
    }
}

TEST_CASE("distribution validation enforces the truncation-rank invariants") {
    token_distribution d;
    for (int i = 0; i < 11; ++i) d.entries.push_back({"t" + std::to_string(i), 0.05});
    CHECK_THROWS_WITH(d.validate(), doctest::Contains("rank overflow"));

    CHECK_THROWS_AS(dist_of({{"a", 0.0}}).validate(), std::runtime_error);
    CHECK_THROWS_AS(dist_of({{"a", 0.7}, {"b", 0.8}}).validate(), std::runtime_error);  // unsorted
    CHECK_THROWS_AS(dist_of({{"a", 0.7}, {"b", 0.6}}).validate(), std::runtime_error);  // sum > 1
    CHECK_NOTHROW(dist_of({{"a", 0.6}, {"b", 0.39999}}).validate());
}

TEST_CASE("query records round-trip through JSON byte-identically") {
    query_record rec;
    rec.hash = std::string(64, 'a');
    rec.backend_id = "stub";
    rec.distribution = dist_of({{"yes", 0.5}, {"no", 0.25}});
    rec.distribution->k = 10;
    rec.timestamp = "2025-01-01T00:00:00Z";
    rec.retries = 1;
    rec.logprobs_converted = true;

    auto j = rec.to_json();
    auto back = query_record::from_json(j);
    CHECK(back.to_json().dump() == j.dump());
    CHECK(back.mass().p_yes_raw == doctest::Approx(0.5));

    query_record pair_rec;
    pair_rec.hash = std::string(64, 'b');
    pair_rec.backend_id = "stub";
    pair_rec.pair = yes_no_mass{0.55, 0.30};
    auto j2 = pair_rec.to_json();
    CHECK(query_record::from_json(j2).to_json().dump() == j2.dump());
}

TEST_CASE("cache round-trip returns byte-identical records") {
    temp_dir dir("cache");
    query_cache cache(dir.path());
    CHECK_FALSE(cache.get(std::string(64, 'c'), "b").has_value());

    query_record rec;
    rec.hash = std::string(64, 'c');
    rec.backend_id = "b";
    rec.pair = yes_no_mass{0.1, 0.2};
    rec.timestamp = "2025-06-01T10:00:00Z";
    cache.put(rec);

    auto got = cache.get(rec.hash, "b");
    REQUIRE(got.has_value());
    CHECK(got->to_json().dump() == rec.to_json().dump());
    // a different backend scope misses the same prompt hash
    CHECK_FALSE(cache.get(rec.hash, "other-backend").has_value());
}

TEST_CASE("synthetic backend emits a two-token distribution from the gold answer") {
    answer_matrix m = qm::testing::toy_matrix({1, 0}, 2);
    synthetic_backend be("oracle", {1.0, 0.0, 0.0, 0}, &m);
    rendered_prompt p = build_qm(m, m.respondents()[0], *m.find_question("t.1"), default_context(m));

    query_record rec = be.query(p, {"p1", "t.1"});
    auto mass = rec.mass();
    CHECK(mass.p_yes_raw == 1.0);
    CHECK(mass.p_no_raw == 0.0);

    rec = be.query(p, {"p2", "t.1"});
    CHECK(rec.mass().p_yes_raw == 0.0);
    CHECK(rec.mass().p_no_raw == 1.0);

    // respondent-independent prompts collapse to the base rate
    synthetic_backend soft("oracle2", {0.5, 0.5, 0.0, 0}, &m);
    CHECK(soft.query(p, {"", "t.1"}).mass().p_yes_raw == doctest::Approx(0.5));
}

TEST_CASE("chat backend parses stub top-logprobs verbatim") {
    stub_server stub;
    stub.set_fixed_distribution({{"Yes", 0.6}, {"no", 0.3}});

    http_backend be(stub_config(stub.base_url(), true));
    rendered_prompt p = sample_prompt();
    query_record rec = be.query(p, {});
    REQUIRE(rec.distribution.has_value());
    REQUIRE(rec.distribution->entries.size() == 2);
    CHECK(rec.distribution->entries[0].token == "Yes");
    CHECK(rec.distribution->entries[0].prob == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(rec.distribution->entries[1].token == "no");
    CHECK(rec.distribution->entries[1].prob == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(rec.logprobs_converted);
    auto mass = rec.mass();
    CHECK(mass.p_yes_raw == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(mass.p_no_raw == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("completions backend renders the raw template") {
    stub_server stub;
    stub.set_fixed_distribution({{"yes", 0.7}, {"No", 0.2}});
    http_backend be(stub_config(stub.base_url(), false, "llama3"));
    answer_matrix m = qm::testing::toy_matrix({1}, 1);
    rendered_prompt p = build_qm(m, m.respondents()[0], *m.find_question("t.1"),
                                 default_context(m), be.render_opts());
    auto mass = be.query(p, {}).mass();
    CHECK(mass.p_yes_raw == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(mass.p_no_raw == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("forced-pair mode issues two scoring calls") {
    stub_server stub;
    http_backend be(stub_config(stub.base_url(), false, "llama3", true));
    answer_matrix m = qm::testing::toy_matrix({1}, 1);
    rendered_prompt p = build_qm(m, m.respondents()[0], *m.find_question("t.1"),
                                 default_context(m), be.render_opts());
    query_record rec = be.query(p, {});
    REQUIRE(rec.pair.has_value());
    CHECK(stub.requests() == 2);
    CHECK(rec.pair->p_yes_raw > 0.0);
    CHECK(rec.pair->p_no_raw > 0.0);
    CHECK(rec.pair->p_yes_raw + rec.pair->p_no_raw < 1.0 + 1e-9);

    // deterministic across calls
    query_record rec2 = be.query(p, {});
    CHECK(rec2.pair->p_yes_raw == rec.pair->p_yes_raw);
    CHECK(rec2.pair->p_no_raw == rec.pair->p_no_raw);

    // one transient failure inside the pair leaves a single record with retry count 1
    stub.fail_next(1);
    query_record rec3 = be.query(p, {});
    CHECK(rec3.retries == 1);
    CHECK(rec3.pair->p_yes_raw == rec.pair->p_yes_raw);
}

TEST_CASE("transient failures are retried and counted") {
    stub_server stub;
    stub.set_fixed_distribution({{"yes", 0.5}});
    http_backend be(stub_config(stub.base_url(), true));
    stub.fail_next(1);
    query_record rec = be.query(sample_prompt(), {});
    CHECK(rec.retries == 1);
    CHECK(rec.mass().p_yes_raw == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("exhausted retries raise an error carrying the prompt hash") {
    stub_server stub;
    http_backend be(stub_config(stub.base_url(), true));
    stub.fail_next(100);
    rendered_prompt p = sample_prompt();
    try {
        be.query(p, {});
        FAIL("expected backend_error");
    } catch (const backend_error& e) {
        CHECK(e.hash == p.canonical_hash);
        CHECK(std::string(e.what()).find("3 attempts") != std::string::npos);
    }
    CHECK(stub.requests() == 3);
}

TEST_CASE("gateway caches network results and dedupes repeats") {
    stub_server stub;
    temp_dir dir("gwcache");
    auto be = std::make_shared<http_backend>(stub_config(stub.base_url(), true));
    gateway gw(be, dir.path());
    rendered_prompt p = sample_prompt();

    auto m1 = gw.resolve(p, {});
    CHECK(stub.requests() == 1);
    auto m2 = gw.resolve(p, {});
    CHECK(stub.requests() == 1);  // served from cache
    CHECK(m1.p_yes_raw == m2.p_yes_raw);
    CHECK(gw.cache_hits() == 1);
    CHECK(gw.backend_queries() == 1);

    // a second gateway over the same cache dir never touches the network
    auto be2 = std::make_shared<http_backend>(stub_config(stub.base_url(), true));
    gateway gw2(be2, dir.path());
    auto m3 = gw2.resolve(p, {});
    CHECK(stub.requests() == 1);
    CHECK(m3.p_yes_raw == m1.p_yes_raw);
}

TEST_CASE("replay backend serves the warm cache and fails loudly on misses") {
    temp_dir dir("replay");
    rendered_prompt p = sample_prompt();
    {
        query_cache cache(dir.path());
        query_record rec;
        rec.hash = p.canonical_hash;
        rec.backend_id = "recorded";
        rec.distribution = dist_of({{"yes", 0.8}, {"no", 0.1}});
        cache.put(rec);
    }
    replay_backend be("recorded", dir.path(), {});
    auto mass = be.query(p, {}).mass();
    CHECK(mass.p_yes_raw == doctest::Approx(0.8));
    CHECK(mass.p_no_raw == doctest::Approx(0.1));

    rendered_prompt other = sample_prompt("t.1");
    rendered_prompt miss = apply_paraphrase(other, "A different wording.");
    CHECK_THROWS_WITH(be.query(miss, {}), doctest::Contains(miss.canonical_hash.c_str()));
}

}  // TEST_SUITE
