#include "doctest.h"

#include <algorithm>

#include "behavior/behavior.hpp"
#include "factory/factory.hpp"

using namespace dtwin;
using behavior::BehaviorSpec;
using behavior::DelayProfile;
using behavior::State;
using behavior::TwinConfig;
using behavior::TwinRuntime;

namespace {

constexpr std::int64_t kHour = 3'600'000;

std::shared_ptr<const model::DeviceSchema> shared_schema() {
  static auto schema =
      std::make_shared<const model::DeviceSchema>(model::builtin_dispenser_schema());
  return schema;
}

Json default_filled() { return factory::generate_template(*shared_schema()); }

TwinRuntime make_twin(const Json& filled, std::uint64_t seed = 11,
                      DelayProfile profile = DelayProfile::dispenser_default()) {
  TwinConfig cfg;
  cfg.seed = seed;
  return TwinRuntime(shared_schema(), factory::instantiate(*shared_schema(), filled, "100"),
                     BehaviorSpec::dispenser(), std::move(profile), cfg);
}

int count_events(const TwinRuntime& rt, const std::string& name) {
  int n = 0;
  for (const auto& e : rt.event_log()) {
    if (e.event == name) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("delay profile from execution logs takes min/max/mean per operation") {
  const std::string log =
      R"({"operation":"dispense","start_ms":0,"end_ms":60000})" "\n"
      R"({"operation":"dispense","start_ms":100000,"end_ms":170000})" "\n"
      R"({"operation":"dispense","start_ms":200000,"end_ms":280000})" "\n";
  const auto profile = behavior::synchronize_from_logs(log);
  const auto* r = profile.find("dispense");
  REQUIRE(r != nullptr);
  CHECK(r->lower_ms == 60'000);
  CHECK(r->upper_ms == 80'000);
  CHECK(r->mean_ms == doctest::Approx(70'000.0));
}

TEST_CASE("a singleton log record pins all three values") {
  const auto profile = behavior::synchronize_from_logs(
      R"({"operation":"settings-update","start_ms":500,"end_ms":3000})" "\n");
  const auto* r = profile.find("settings-update");
  REQUIRE(r != nullptr);
  CHECK(r->lower_ms == 2'500);
  CHECK(r->upper_ms == 2'500);
  CHECK(r->mean_ms == doctest::Approx(2'500.0));
}

TEST_CASE("empty and malformed execution logs are rejected") {
  CHECK_THROWS_AS(behavior::synchronize_from_logs(""), DtError);
  CHECK_THROWS_AS(behavior::synchronize_from_logs("not json\n"), DtError);
  CHECK_THROWS_AS(
      behavior::synchronize_from_logs(R"({"operation":"x","start_ms":5,"end_ms":1})" "\n"),
      DtError);
  CHECK_THROWS_AS(behavior::synchronize_from_logs(R"({"operation":"x"})" "\n"), DtError);
}

TEST_CASE("shipped default profile covers the dispenser operations") {
  const auto profile = DelayProfile::dispenser_default();
  const auto* update = profile.find("settings_update");
  REQUIRE(update != nullptr);
  CHECK(update->lower_ms == 2'400);
  CHECK(update->upper_ms == 3'000);
  CHECK(update->mean_ms == doctest::Approx(2'750.0));
  const auto* dispense = profile.find("dispense");
  REQUIRE(dispense != nullptr);
  CHECK(dispense->lower_ms >= 60'000);
  profile.validate();
}

TEST_CASE("delay profile bounds are validated") {
  DelayProfile p;
  p.set("x", {10, 5, 7});
  CHECK_THROWS_AS(p.validate(), DtError);
  DelayProfile q;
  q.set("x", {0, 10, 20});
  CHECK_THROWS_AS(q.validate(), DtError);
}

TEST_CASE("the machine walks Setup -> Load -> Check and dispenses at the intake time") {
  auto rt = make_twin(default_filled());
  CHECK(rt.state() == State::setup);

  rt.run_until(30'000);
  CHECK(rt.state() == State::check_medication_plan);
  CHECK(count_events(rt, "setup_complete") == 1);
  CHECK(count_events(rt, "plan_loaded") == 1);

  // template default plan: one intake at 09:00, one virtual hour after epoch
  const auto due = rt.next_intake_at();
  REQUIRE(due.has_value());
  CHECK(*due == kHour);

  rt.run_until(kHour);
  CHECK(rt.state() == State::dispense);
  CHECK(rt.busy_until_ms() - kHour >= 60'000);  // dispensing takes over a minute

  const auto result = rt.dispense();
  CHECK(rt.state() == State::check_medication_plan);
  CHECK_FALSE(result.empty_cartridge);
  REQUIRE(result.dispensed.size() == 1);
  CHECK(result.dispensed[0].second == 2);
  const auto* line = rt.instance().resolve(
      {{"medication_plans", 0}, {"intake_times", 0}, {"medicine_lines", 0}});
  CHECK(line->slot("current_roll") == 7);  // 9 - 2
  CHECK(count_events(rt, "dispense_completed") == 1);
}

TEST_CASE("without a plan the machine stays in LoadMedicationPlan") {
  Json filled = default_filled();
  filled["device"]["medication_plans"] = Json::array();
  auto rt = make_twin(filled);

  rt.run_until(kHour);
  CHECK(rt.state() == State::load_medication_plan);

  const auto outcome = rt.step();
  CHECK(outcome.from == State::load_medication_plan);
  CHECK(outcome.to == State::load_medication_plan);
  CHECK(outcome.trigger == "awaiting_plan");
}

TEST_CASE("dispense decrements rolls by the configured doses") {
  Json filled = default_filled();
  auto& line = filled["device"]["medication_plans"][0]["intake_times"][0]["medicine_lines"][0];
  line["doses"] = 2;
  line["current_roll"] = 5;
  auto rt = make_twin(filled);

  rt.run_until(kHour);
  REQUIRE(rt.state() == State::dispense);
  const auto result = rt.dispense();
  REQUIRE(result.dispensed.size() == 1);
  CHECK(result.dispensed[0].second == 2);
  const auto* node = rt.instance().resolve(
      {{"medication_plans", 0}, {"intake_times", 0}, {"medicine_lines", 0}});
  CHECK(node->slot("current_roll") == 3);
}

TEST_CASE("an empty cartridge produces a notice and no mutation") {
  Json filled = default_filled();
  filled["device"]["cartridge"]["is_empty"] = true;
  auto rt = make_twin(filled);

  const std::string before = rt.instance().dump();
  rt.run_until(kHour - 1);
  REQUIRE(rt.state() == State::check_medication_plan);

  const auto outcome = rt.step();  // intake due: enter Dispense, notice the empty cartridge
  CHECK(outcome.to == State::dispense);
  const auto result = rt.dispense();
  CHECK(result.empty_cartridge);
  CHECK(result.dispensed.empty());
  CHECK(result.window_ms == 0);  // nothing to do, the twin is never busy
  CHECK(rt.instance().dump() == before);
  CHECK(count_events(rt, "empty_cartridge") == 1);
  CHECK(count_events(rt, "dispense_completed") == 0);
  CHECK(rt.state() == State::check_medication_plan);
}

TEST_CASE("requests during the dispense window observe busy") {
  auto rt = make_twin(default_filled());
  rt.run_until(kHour);
  REQUIRE(rt.state() == State::dispense);
  const auto end = rt.busy_until_ms();
  CHECK(rt.busy_at(kHour));
  CHECK(rt.busy_at(end - 1));
  CHECK_FALSE(rt.busy_at(end));
}

TEST_CASE("shutdown works from any state and is idempotent") {
  auto rt = make_twin(default_filled());
  CHECK(rt.state() == State::setup);
  rt.shutdown();
  CHECK(rt.state() == State::shutdown);
  rt.shutdown();
  CHECK(rt.state() == State::shutdown);
  CHECK(count_events(rt, "shutdown") == 1);
  CHECK_THROWS_AS(rt.step(), DtError);
}

TEST_CASE("shutdown mid-dispense aborts without touching the rolls") {
  auto rt = make_twin(default_filled());
  rt.run_until(kHour + 10'000);  // inside the busy window
  REQUIRE(rt.state() == State::dispense);

  rt.shutdown();
  CHECK(rt.state() == State::shutdown);
  CHECK(count_events(rt, "dispense_aborted") == 1);
  const auto* line = rt.instance().resolve(
      {{"medication_plans", 0}, {"intake_times", 0}, {"medicine_lines", 0}});
  CHECK(line->slot("current_roll") == 9);  // untouched
}

TEST_CASE("after the last intake of the last day the machine returns to Load in one step") {
  Json filled = default_filled();
  filled["device"]["medication_plans"][0]["period_days"] = 1;
  auto rt = make_twin(filled);

  rt.run_until(kHour);
  REQUIRE(rt.state() == State::dispense);

  const auto commit = rt.step();  // window elapses, back to CheckMedicationPlan
  CHECK(commit.trigger == "dispense_complete");
  REQUIRE(rt.state() == State::check_medication_plan);

  const auto outcome = rt.step();  // the one step
  CHECK(outcome.trigger == "plan_completed");
  CHECK(rt.state() == State::load_medication_plan);
}

TEST_CASE("intakes that fall inside a busy window are missed, not dispensed") {
  Json filled = default_filled();
  auto& plan = filled["device"]["medication_plans"][0];
  plan["intake_times"] = Json::array(
      {Json{{"time", "09:00"},
            {"medicine_lines",
             Json::array({Json{{"doses", 1}, {"current_roll", 9}, {"next_roll", 0}}})}},
       Json{{"time", "09:01"},
            {"medicine_lines",
             Json::array({Json{{"doses", 1}, {"current_roll", 9}, {"next_roll", 0}}})}}});

  auto profile = behavior::DelayProfile::dispenser_default();
  profile.set("dispense", {90'000, 90'000, 90'000});  // window covers the 09:01 intake
  auto rt = make_twin(filled, 3, profile);

  rt.run_until(kHour + 90'000);
  CHECK(count_events(rt, "dispense_completed") == 1);
  CHECK(count_events(rt, "missed_intake") == 1);
  // only the 09:00 line was served
  const auto* second_line = rt.instance().resolve(
      {{"medication_plans", 0}, {"intake_times", 1}, {"medicine_lines", 0}});
  CHECK(second_line->slot("current_roll") == 9);
}

TEST_CASE("doses are conserved over randomized schedules") {
  Rng rng(99);
  for (int round = 0; round < 20; ++round) {
    Json filled = default_filled();
    auto& plan = filled["device"]["medication_plans"][0];
    plan["period_days"] = 1 + rng.uniform_int(0, 2);
    plan["intake_times"] = Json::array();
    const int intakes = 1 + static_cast<int>(rng.uniform_int(0, 5));
    for (int i = 0; i < intakes; ++i) {
      char hhmm[8];
      std::snprintf(hhmm, sizeof(hhmm), "%02d:%02d", (int)rng.uniform_int(8, 20),
                    (int)rng.uniform_int(0, 59));
      Json lines = Json::array();
      const int n_lines = 1 + static_cast<int>(rng.uniform_int(0, 2));
      for (int l = 0; l < n_lines; ++l) {
        lines.push_back(Json{{"doses", rng.uniform_int(0, 9)},
                             {"current_roll", rng.uniform_int(0, 30)},
                             {"next_roll", 0}});
      }
      plan["intake_times"].push_back(Json{{"time", hhmm}, {"medicine_lines", lines}});
    }

    auto rt = make_twin(filled, 1000 + static_cast<std::uint64_t>(round));
    std::int64_t initial_total = 0;
    {
      const auto* plan_node = rt.instance().resolve({{"medication_plans", 0}});
      for (const auto& intake : plan_node->children.at("intake_times")) {
        for (const auto& line : intake->children.at("medicine_lines")) {
          initial_total += line->slot("current_roll").get<std::int64_t>();
        }
      }
    }

    rt.run_until(rng.uniform_int(0, 3) * kHour * 24 + rng.uniform_int(0, 24) * kHour);

    std::int64_t remaining = 0;
    {
      const auto* plan_node = rt.instance().resolve({{"medication_plans", 0}});
      for (const auto& intake : plan_node->children.at("intake_times")) {
        for (const auto& line : intake->children.at("medicine_lines")) {
          remaining += line->slot("current_roll").get<std::int64_t>();
        }
      }
    }
    std::int64_t dispensed = 0;
    for (const auto& e : rt.event_log()) {
      if (e.event == "dispense_completed") {
        for (const auto& l : e.detail.at("lines")) {
          dispensed += l.at("doses").get<std::int64_t>();
        }
      }
    }
    REQUIRE(initial_total == remaining + dispensed);
  }
}

TEST_CASE("identical seed, profile, instance and schedule give identical event logs") {
  Json filled = default_filled();
  auto a = make_twin(filled, 42);
  auto b = make_twin(filled, 42);
  a.run_until(26 * kHour);
  b.run_until(26 * kHour);
  CHECK(a.event_log_jsonl() == b.event_log_jsonl());
  CHECK(a.instance().dump() == b.instance().dump());

  auto c = make_twin(filled, 43);
  c.run_until(26 * kHour);
  CHECK(a.event_log_jsonl() != c.event_log_jsonl());  // dispense windows differ

  // event times never decrease
  std::int64_t last = -1;
  for (const auto& e : a.event_log()) {
    CHECK(e.at_ms >= last);
    last = e.at_ms;
  }
}

TEST_CASE("behavior spec invariants reject broken machines") {
  auto spec = BehaviorSpec::dispenser();
  spec.validate();

  // drop every edge into Shutdown
  auto no_shutdown = spec;
  no_shutdown.transitions.erase(
      std::remove_if(no_shutdown.transitions.begin(), no_shutdown.transitions.end(),
                     [](const behavior::TransitionDef& t) { return t.to == State::shutdown; }),
      no_shutdown.transitions.end());
  CHECK_THROWS_AS(no_shutdown.validate(), DtError);

  // a non-final state without outgoing transitions
  auto dead_end = spec;
  dead_end.transitions.erase(
      std::remove_if(dead_end.transitions.begin(), dead_end.transitions.end(),
                     [](const behavior::TransitionDef& t) { return t.from == State::dispense; }),
      dead_end.transitions.end());
  CHECK_THROWS_AS(dead_end.validate(), DtError);
}

TEST_CASE("entry action failures keep the twin in the source state") {
  auto spec = BehaviorSpec::dispenser();
  spec.entry_actions[State::load_medication_plan] = [](TwinRuntime&) {
    throw DtError(Errc::action_failure, "injected failure");
  };
  TwinConfig cfg;
  cfg.seed = 5;
  TwinRuntime rt(shared_schema(),
                 factory::instantiate(*shared_schema(), default_filled(), "100"), spec,
                 DelayProfile::dispenser_default(), cfg);

  const auto outcome = rt.step();  // setup -> load fails in the entry action
  CHECK(outcome.trigger == "action_failure");
  CHECK(rt.state() == State::setup);
  bool logged = false;
  for (const auto& e : rt.event_log()) {
    if (e.event == "action_failure") logged = true;
  }
  CHECK(logged);
}

TEST_CASE("dispense outside the Dispense state is an error") {
  auto rt = make_twin(default_filled());
  CHECK_THROWS_AS(rt.dispense(), DtError);
}

TEST_CASE("run_until never moves the clock backwards") {
  auto rt = make_twin(default_filled());
  rt.run_until(50'000);
  const auto now = rt.now_ms();
  rt.run_until(10'000);
  CHECK(rt.now_ms() == now);
}
