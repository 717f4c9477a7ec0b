#include "doctest.h"

#include <filesystem>

#include "factory/factory.hpp"
#include "harness/harness.hpp"

using namespace dtwin;
using harness::GeneratorConfig;
using harness::RequestGenerator;
using harness::RunConfig;
using harness::RunPlan;

namespace {

std::shared_ptr<const model::DeviceSchema> shared_schema() {
  static auto schema =
      std::make_shared<const model::DeviceSchema>(model::builtin_dispenser_schema());
  return schema;
}

// fraction of constrainable property draws that violate their constraint
std::pair<std::int64_t, std::int64_t> count_invalid_draws(
    const std::vector<gateway::RequestRecord>& corpus) {
  const auto& schema = *shared_schema();
  const auto mapping = gateway::generate_routes(schema, "100");
  std::int64_t invalid = 0, constrainable = 0;
  for (const auto& req : corpus) {
    const auto target = gateway::resolve_route(mapping, schema, req.method, req.route);
    const auto& cls = schema.require_class(target.entry->class_name);
    for (const auto& [key, value] : req.body.items()) {
      const auto* prop = cls.find_property(key);
      REQUIRE(prop != nullptr);
      bool is_constrainable = prop->kind == model::ValueKind::enumeration;
      if (prop->kind == model::ValueKind::integer) {
        is_constrainable = !schema.constraints_involving(cls.name, key).empty();
      }
      if (!is_constrainable) continue;
      ++constrainable;
      if (!model::validate_value(schema, cls.name, key, value).ok()) ++invalid;
    }
  }
  return {invalid, constrainable};
}

std::vector<gateway::RequestRecord> generate_corpus(double invalid_rate, int n,
                                                    std::uint64_t seed = 9) {
  GeneratorConfig cfg;
  cfg.seed = seed;
  cfg.invalid_rate = invalid_rate;
  RequestGenerator gen(*shared_schema(), "100", cfg);
  std::vector<gateway::RequestRecord> corpus;
  corpus.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) corpus.push_back(gen.next(i, i * 2000));
  return corpus;
}

}  // namespace

TEST_CASE("invalid_rate 0 generates only valid bodies") {
  const auto corpus = generate_corpus(0.0, 500);
  const auto [invalid, total] = count_invalid_draws(corpus);
  CHECK(total > 0);
  CHECK(invalid == 0);
}

TEST_CASE("invalid_rate 1 puts at least one violation in every body") {
  const auto corpus = generate_corpus(1.0, 500);
  const auto& schema = *shared_schema();
  const auto mapping = gateway::generate_routes(schema, "100");
  for (const auto& req : corpus) {
    const auto target = gateway::resolve_route(mapping, schema, req.method, req.route);
    const auto& cls = schema.require_class(target.entry->class_name);
    bool any_violation = false;
    for (const auto& [key, value] : req.body.items()) {
      if (!model::validate_value(schema, cls.name, key, value).ok()) any_violation = true;
    }
    REQUIRE(any_violation);
  }
}

TEST_CASE("invalid_rate 0.3 lands within two points over 10k bodies") {
  const auto corpus = generate_corpus(0.3, 10'000);
  const auto [invalid, total] = count_invalid_draws(corpus);
  const double fraction = static_cast<double>(invalid) / static_cast<double>(total);
  CHECK(fraction == doctest::Approx(0.30).epsilon(0.02 / 0.30));
}

TEST_CASE("generated requests stay inside the configured route scope") {
  const auto corpus = generate_corpus(0.2, 300);
  std::set<std::string> seen;
  for (const auto& req : corpus) {
    CHECK(req.method == "POST");
    seen.insert(req.route);
  }
  CHECK(seen ==
        std::set<std::string>{"/devices/100", "/devices/100/settings",
                              "/devices/100/settings/alarm", "/devices/100/settings/display"});
}

TEST_CASE("generator validates its configuration") {
  GeneratorConfig bad;
  bad.invalid_rate = 1.5;
  CHECK_THROWS_AS(RequestGenerator(*shared_schema(), "100", bad), DtError);
  GeneratorConfig unknown;
  unknown.routes = {"/nope"};
  CHECK_THROWS_AS(RequestGenerator(*shared_schema(), "100", unknown), DtError);
}

TEST_CASE("run plans enforce the duration/rate pairing") {
  CHECK_NOTHROW((RunPlan{1, 30}.validate()));
  CHECK_NOTHROW((RunPlan{4, 30}.validate()));
  CHECK_NOTHROW((RunPlan{10, 20}.validate()));
  CHECK_THROWS_AS((RunPlan{1, 20}.validate()), DtError);   // short runs go at 30/min
  CHECK_THROWS_AS((RunPlan{10, 30}.validate()), DtError);  // long runs go at 20/min
  CHECK_THROWS_AS((RunPlan{3, 30}.validate()), DtError);   // not a listed duration
  CHECK_THROWS_AS((RunPlan{1, 25, true}.validate()), DtError);  // rate stays 20 or 30
  CHECK_NOTHROW((RunPlan{0.05, 30, true}.validate()));

  CHECK((RunPlan{1, 30}.total_requests()) == 1'800);
  CHECK((RunPlan{10, 20}.total_requests()) == 12'000);
}

TEST_CASE("a mini run produces paired traces with the rate-limited spacing") {
  RunConfig cfg;
  cfg.plan = {0.05, 30, true};  // 3 virtual minutes, 90 requests
  cfg.acceleration = 0;         // unpaced
  cfg.seed = 77;
  const auto result =
      harness::run(*shared_schema(), harness::experiment_input(*shared_schema()), cfg);

  REQUIRE(result.corpus.size() == 90);
  REQUIRE(result.twin_trace.size() == 90);
  REQUIRE(result.device_trace.size() == 90);

  for (std::size_t i = 0; i < result.corpus.size(); ++i) {
    CHECK(result.twin_trace[i].id == result.corpus[i].id);
    CHECK(result.device_trace[i].id == result.corpus[i].id);
    if (i > 0) {
      const auto gap = result.corpus[i].sent_at_ms - result.corpus[i - 1].sent_at_ms;
      CHECK(gap >= 60'000 / 30);
    }
  }
}

TEST_CASE("identical seeds replay identical corpora and traces") {
  RunConfig cfg;
  cfg.plan = {0.05, 30, true};
  cfg.acceleration = 0;
  cfg.seed = 123;
  const Json filled = harness::experiment_input(*shared_schema());
  const auto a = harness::run(*shared_schema(), filled, cfg);
  const auto b = harness::run(*shared_schema(), filled, cfg);

  REQUIRE(a.corpus.size() == b.corpus.size());
  for (std::size_t i = 0; i < a.corpus.size(); ++i) {
    CHECK(a.corpus[i].to_json() == b.corpus[i].to_json());
    CHECK(a.twin_trace[i].response_time_ms == b.twin_trace[i].response_time_ms);
    CHECK(a.twin_trace[i].status_code == b.twin_trace[i].status_code);
    CHECK(a.device_trace[i].response_time_ms == b.device_trace[i].response_time_ms);
    CHECK(a.device_trace[i].status_code == b.device_trace[i].status_code);
  }

  RunConfig other = cfg;
  other.seed = 124;
  const auto c = harness::run(*shared_schema(), filled, other);
  bool identical = true;
  for (std::size_t i = 0; i < a.corpus.size(); ++i) {
    if (a.corpus[i].to_json() != c.corpus[i].to_json()) identical = false;
  }
  CHECK_FALSE(identical);
}

TEST_CASE("pacing only throttles emission; traces are identical") {
  RunConfig cfg;
  cfg.plan = {1.0 / 60.0, 30, true};  // one virtual minute, 30 requests
  cfg.seed = 2024;
  cfg.acceleration = 0;
  const Json filled = harness::experiment_input(*shared_schema());
  const auto unpaced = harness::run(*shared_schema(), filled, cfg);

  cfg.acceleration = 600.0;  // 60 virtual seconds -> 100 ms of wall pacing
  const auto paced = harness::run(*shared_schema(), filled, cfg);

  REQUIRE(unpaced.corpus.size() == paced.corpus.size());
  for (std::size_t i = 0; i < unpaced.corpus.size(); ++i) {
    CHECK(unpaced.corpus[i].to_json() == paced.corpus[i].to_json());
    CHECK(unpaced.twin_trace[i].to_json() == paced.twin_trace[i].to_json());
    CHECK(unpaced.device_trace[i].to_json() == paced.device_trace[i].to_json());
  }
}

TEST_CASE("batch mode replays the corpus against every twin in the fleet") {
  RunConfig run_cfg;
  run_cfg.plan = {0.05, 30, true};
  run_cfg.acceleration = 0;
  run_cfg.seed = 31;
  const Json filled = harness::experiment_input(*shared_schema());
  const auto run_result = harness::run(*shared_schema(), filled, run_cfg);

  harness::BatchConfig batch_cfg;
  batch_cfg.sizes = {2, 3};
  batch_cfg.seed = 31;
  const auto batches =
      harness::run_batches(*shared_schema(), filled, run_result.corpus, batch_cfg);

  CHECK(batches.device_trace.size() == run_result.corpus.size());
  REQUIRE(batches.sizes.size() == 2);
  CHECK(batches.sizes[0].size == 2);
  CHECK(batches.sizes[0].twin_traces.size() == 2);
  CHECK(batches.sizes[1].twin_traces.size() == 3);
  for (const auto& trace : batches.sizes[1].twin_traces) {
    REQUIRE(trace.size() == run_result.corpus.size());
  }

  // twin "1" appears in both batches with the same derived seed: identical traces
  for (std::size_t i = 0; i < batches.sizes[0].twin_traces[0].size(); ++i) {
    CHECK(batches.sizes[0].twin_traces[0][i].to_json() ==
          batches.sizes[1].twin_traces[0][i].to_json());
  }

  // the emulator replay is seeded like the run's: its trace matches
  for (std::size_t i = 0; i < batches.device_trace.size(); ++i) {
    CHECK(batches.device_trace[i].to_json() == run_result.device_trace[i].to_json());
  }
}

TEST_CASE("run and batch artifacts survive a save/load round trip") {
  RunConfig cfg;
  cfg.plan = {0.05, 30, true};
  cfg.acceleration = 0;
  cfg.seed = 8;
  const Json filled = harness::experiment_input(*shared_schema());
  const auto result = harness::run(*shared_schema(), filled, cfg);

  const std::string dir = "harness_test_artifacts";
  harness::write_run_dir(dir, result);
  const auto corpus = harness::load_requests_jsonl(dir + "/requests.jsonl");
  const auto twin = harness::load_trace_jsonl(dir + "/twin.jsonl");
  const auto device = harness::load_trace_jsonl(dir + "/emulator.jsonl");
  REQUIRE(corpus.size() == result.corpus.size());
  REQUIRE(twin.size() == result.twin_trace.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(corpus[i].to_json() == result.corpus[i].to_json());
    CHECK(twin[i].to_json() == result.twin_trace[i].to_json());
    CHECK(device[i].to_json() == result.device_trace[i].to_json());
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("the experiment input carries a dense one-day schedule") {
  const Json input = harness::experiment_input(*shared_schema(), 4);
  const auto& plan = input.at("device").at("medication_plans").at(0);
  CHECK(plan.at("period_days") == 1);
  CHECK(plan.at("intake_times").size() == 360);  // every 4 minutes
  CHECK(plan.at("intake_times")[0].at("time") == "00:02");

  // it instantiates cleanly
  CHECK_NOTHROW(factory::instantiate(*shared_schema(), input, "100"));
  CHECK_THROWS_AS(harness::experiment_input(*shared_schema(), 0), DtError);
}
