#include <doctest.h>

#include <fstream>
#include <sstream>

#include "qm/orchestrator.hpp"
#include "support/fixtures.hpp"
#include "support/stub_server.hpp"

using namespace qm;
using qm::testing::demo_config;
using qm::testing::stub_server;
using qm::testing::temp_dir;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string manifest_lines(const run_manifest& m) {
    std::string all;
    for (size_t i = 0; i < m.entries.size(); ++i) {
        all += m.entry_line(i);
        all += '\n';
    }
    return all;
}

}  // namespace

TEST_SUITE("orchestrator") {

TEST_CASE("config loading: full file and error paths") {
    temp_dir dir("config");
    auto path = dir.path() / "run.toml";
    {
        std::ofstream out(path);
        out << R"(
run_id = "demo"
output_dir = ")" << (dir.path() / "out").string() << R"("

[corpus]
matrix = "data/demo/matrix.csv"
questions = "data/demo/questions.json"

[backend]
kind = "synthetic"
id = "oracle"
fidelity = 0.5
base_rate = 0.25
oracle_seed = 9

[run]
conditions = ["qm", "random_context", "zero_shot"]
parallelism = 4

[seeds]
random_context = 7
)";
    }
    run_config cfg = load_run_config(path);
    CHECK(cfg.run_id == "demo");
    CHECK(cfg.backend == backend_kind::synthetic);
    CHECK(cfg.oracle.fidelity == doctest::Approx(0.5));
    CHECK(cfg.oracle.base_rate == doctest::Approx(0.25));
    CHECK(cfg.parallelism == 4);
    CHECK(cfg.conditions == std::vector<condition_kind>{condition_kind::qm, condition_kind::zero_shot,
                                                        condition_kind::random_context});
    CHECK(cfg.seed_for(condition_kind::random_context) == 7);
    CHECK(cfg.cache_dir == cfg.output_dir / "cache");

    {
        std::ofstream out(path);
        out << "run_id = \"x\"\n";
    }
    CHECK_THROWS_AS(load_run_config(path), config_error);

    {
        std::ofstream out(path);
        out << "run_id = \"x\"\noutput_dir = \"o\"\n[corpus]\nmatrix = \"m\"\nquestions = \"q\"\n"
            << "[run]\nconditions = [\"random_context\"]\n";
    }
    CHECK_THROWS_WITH(load_run_config(path), doctest::Contains("has no seed"));

    {
        std::ofstream out(path);
        out << "run_id = \"x\"\noutput_dir = \"o\"\n[corpus]\nmatrix = \"m\"\nquestions = \"q\"\n"
            << "[backend]\nkind = \"warp-drive\"\n[run]\nconditions = [\"qm\"]\n";
    }
    CHECK_THROWS_WITH(load_run_config(path), doctest::Contains("unknown backend kind"));
}

TEST_CASE("plan shapes on the demo corpus") {
    answer_matrix matrix = qm::testing::load_demo_matrix();
    temp_dir dir("plan");

    run_config cfg = demo_config(dir.path() / "out");
    run_manifest m = plan(cfg, matrix);
    CHECK(m.entries.size() == 1222);  // respondents with gold answers, summed over targets

    std::map<std::string, size_t> per_target;
    for (const auto& e : m.entries) ++per_target[e.target_id];
    CHECK(per_target["13.1"] == 185);
    CHECK(per_target["13.4"] == 164);
    CHECK(per_target["13.5"] == 171);

    cfg.conditions = {condition_kind::zero_shot};
    CHECK(plan(cfg, matrix).entries.size() == 7);

    cfg.conditions = {condition_kind::random_context};
    run_manifest rnd = plan(cfg, matrix);
    CHECK(rnd.entries.size() == 1222);
    CHECK(rnd.entries[0].spec_digest != m.entries[0].spec_digest);
}

TEST_CASE("a corpus without neutral answers plans the full grid") {
    answer_matrix matrix = qm::testing::full_matrix_no_neutrals(192);
    temp_dir dir("plan-full");
    run_config cfg = demo_config(dir.path() / "out");
    run_manifest m = plan(cfg, matrix);
    CHECK(m.entries.size() == 192 * 7);  // 1344
}

TEST_CASE("paraphrase study plans paraphrases x subsample x targets") {
    answer_matrix matrix = qm::testing::load_demo_matrix();
    temp_dir dir("plan-para");
    run_config cfg = demo_config(dir.path() / "out", {condition_kind::paraphrase_study});
    cfg.paraphrase_dir = dir.path() / "para";
    qm::testing::write_paraphrase_files(cfg.paraphrase_dir,
                                        {"13.1", "13.2", "13.3", "13.4", "13.5", "13.6", "13.7"}, 50);

    run_manifest m = plan(cfg, matrix);
    CHECK(m.paraphrase_subsample.size() == 19);  // floor(192 / 10)
    CHECK(m.entries.size() == 50 * 7 * 19);      // 6650

    // fixed subsample across targets and paraphrases
    std::set<std::string> respondents;
    for (const auto& e : m.entries) respondents.insert(e.respondent_id);
    CHECK(respondents.size() == 19);

    // missing paraphrase file fails the plan
    std::filesystem::remove(cfg.paraphrase_dir / "13.4.txt");
    CHECK_THROWS_WITH(plan(cfg, matrix), doctest::Contains("13.4.txt"));
}

TEST_CASE("ablation plans expand over derived context specs") {
    answer_matrix matrix = qm::testing::load_demo_matrix();
    temp_dir dir("plan-abl");
    run_config cfg = demo_config(dir.path() / "out", {condition_kind::permutation_ablation});
    cfg.targets = {"13.4"};
    run_manifest m = plan(cfg, matrix);
    CHECK(m.entries.size() == 6 * 164);
    CHECK(m.variant_specs.at(condition_kind::permutation_ablation).size() == 6);

    cfg.conditions = {condition_kind::length_ablation};
    run_manifest t = plan(cfg, matrix);
    CHECK(t.entries.size() == 6 * 164);
    std::vector<size_t> sizes;
    for (const auto& s : t.variant_specs.at(condition_kind::length_ablation)) {
        sizes.push_back(s.included.size());
    }
    CHECK(sizes == std::vector<size_t>{45, 45, 30, 30, 15, 15});
}

TEST_CASE("plan is a pure function of config and corpus") {
    answer_matrix matrix = qm::testing::load_demo_matrix();
    temp_dir dir("plan-pure");
    run_config cfg = demo_config(dir.path() / "out",
                                 {condition_kind::qm, condition_kind::random_context,
                                  condition_kind::length_ablation});
    run_manifest a = plan(cfg, matrix);
    run_manifest b = plan(cfg, matrix);
    CHECK(manifest_lines(a) == manifest_lines(b));
    CHECK(manifest_digest(a) == manifest_digest(b));
}

TEST_CASE("execution with the synthetic backend resolves everything") {
    answer_matrix matrix = qm::testing::load_demo_matrix();
    temp_dir dir("exec");
    run_config cfg = demo_config(dir.path() / "out");
    cfg.targets = {"13.4", "13.5"};
    run_manifest m = plan(cfg, matrix);

    gateway gw(make_backend(cfg, matrix), std::nullopt);
    result_set rs = execute(m, gw, cfg.output_dir, {1, std::nullopt});
    CHECK(rs.complete());
    CHECK(std::filesystem::exists(cfg.output_dir / "results.jsonl"));

    // parallelism does not change the canonical results bytes
    run_config cfg4 = cfg;
    cfg4.output_dir = dir.path() / "out4";
    gateway gw4(make_backend(cfg4, matrix), std::nullopt);
    result_set rs4 = execute(m, gw4, cfg4.output_dir, {4, std::nullopt});
    CHECK(rs4.complete());
    CHECK(slurp(cfg.output_dir / "results.jsonl") == slurp(cfg4.output_dir / "results.jsonl"));
}

TEST_CASE("interrupted runs resume to the identical result set") {
    answer_matrix matrix = qm::testing::load_demo_matrix();
    temp_dir dir("resume");
    run_config cfg = demo_config(dir.path() / "uninterrupted");
    cfg.targets = {"13.1"};
    run_manifest m = plan(cfg, matrix);

    gateway gw(make_backend(cfg, matrix), std::nullopt);
    result_set full = execute(m, gw, cfg.output_dir, {2, std::nullopt});
    CHECK(full.complete());

    auto killed_dir = dir.path() / "killed";
    gateway gw2(make_backend(cfg, matrix), std::nullopt);
    result_set half = execute(m, gw2, killed_dir, {2, m.entries.size() / 2});
    CHECK_FALSE(half.complete());
    CHECK(std::filesystem::exists(killed_dir / "remainder.json"));
    CHECK_FALSE(std::filesystem::exists(killed_dir / "results.jsonl"));

    gateway gw3(make_backend(cfg, matrix), std::nullopt);
    result_set resumed = execute(m, gw3, killed_dir, {2, std::nullopt});
    CHECK(resumed.complete());
    CHECK_FALSE(std::filesystem::exists(killed_dir / "remainder.json"));
    CHECK(slurp(cfg.output_dir / "results.jsonl") == slurp(killed_dir / "results.jsonl"));
}

TEST_CASE("a checkpoint from a different manifest is rejected") {
    answer_matrix matrix = qm::testing::load_demo_matrix();
    temp_dir dir("stale");
    run_config cfg = demo_config(dir.path() / "out");
    cfg.targets = {"13.1"};
    run_manifest m = plan(cfg, matrix);
    gateway gw(make_backend(cfg, matrix), std::nullopt);
    execute(m, gw, cfg.output_dir, {1, m.entries.size() / 2});

    cfg.targets = {"13.2"};
    run_manifest other = plan(cfg, matrix);
    gateway gw2(make_backend(cfg, matrix), std::nullopt);
    CHECK_THROWS_WITH(execute(other, gw2, cfg.output_dir, {1, std::nullopt}),
                      doctest::Contains("different manifest"));
}

TEST_CASE("results load back against the manifest") {
    answer_matrix matrix = qm::testing::load_demo_matrix();
    temp_dir dir("load");
    run_config cfg = demo_config(dir.path() / "out");
    cfg.targets = {"13.7"};
    run_manifest m = plan(cfg, matrix);
    gateway gw(make_backend(cfg, matrix), std::nullopt);
    execute(m, gw, cfg.output_dir, {1, std::nullopt});

    result_set rs = load_results(m, cfg.output_dir);
    CHECK(rs.complete());
    CHECK(rs.masses.size() == m.entries.size());

    result_set missing = load_results(m, dir.path() / "nowhere");
    CHECK_FALSE(missing.complete());
}

TEST_CASE("paraphrase files load with trimming and blank-line drops") {
    temp_dir dir("parafile");
    auto p = dir.path() / "t.txt";
    {
        std::ofstream out(p);
        out << "First wording.   \n\n  Second wording.\r\n\t\nThird wording.\n";
    }
    auto lines = load_paraphrase_file(p);
    CHECK(lines == std::vector<std::string>{"First wording.", "Second wording.", "Third wording."});

    CHECK_THROWS_AS(load_paraphrase_file(dir.path() / "absent.txt"), config_error);
    {
        std::ofstream out(p);
        out << "\n\n";
    }
    CHECK_THROWS_WITH(load_paraphrase_file(p), doctest::Contains("empty"));
}

TEST_CASE("paraphrase generation: dedupe, sample, replay") {
    stub_server stub;
    temp_dir dir("paragen");
    query_cache cache(dir.path() / "cache");
    http_backend_config becfg;
    becfg.id = "stub-chat";
    becfg.base_url = stub.base_url();
    becfg.model = "test";
    becfg.retry_backoff_ms = 1;
    http_backend be(becfg);

    paraphrase_generation_config pcfg;
    pcfg.count = 50;
    pcfg.seed = 3;
    auto first = generate_paraphrases("The toy statement.", &be, cache, pcfg);
    CHECK(first.size() == 50);
    CHECK(std::set<std::string>(first.begin(), first.end()).size() == 50);
    size_t network_calls = stub.requests();
    CHECK(network_calls == 5);

    // warm cache: identical output with zero new requests, even without a backend
    auto replayed = generate_paraphrases("The toy statement.", nullptr, cache, pcfg);
    CHECK(replayed == first);
    CHECK(stub.requests() == network_calls);

    // a different seed queries again and samples differently
    pcfg.seed = 4;
    auto other = generate_paraphrases("The toy statement.", &be, cache, pcfg);
    CHECK(other != first);

    // degenerate responses starve the deduplicated pool
    stub.set_degenerate_paraphrases(true);
    pcfg.seed = 5;
    CHECK_THROWS_WITH(generate_paraphrases("The toy statement.", &be, cache, pcfg),
                      doctest::Contains("30 short"));
}

}  // TEST_SUITE
