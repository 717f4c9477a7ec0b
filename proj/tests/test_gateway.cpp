#include "doctest.h"

#include "factory/factory.hpp"
#include "gateway/gateway.hpp"

using namespace dtwin;
using behavior::State;
using gateway::ApiMapping;
using gateway::generate_routes;
using gateway::RequestRecord;

namespace {

constexpr std::int64_t kHour = 3'600'000;

std::shared_ptr<const model::DeviceSchema> shared_schema() {
  static auto schema =
      std::make_shared<const model::DeviceSchema>(model::builtin_dispenser_schema());
  return schema;
}

struct Fixture {
  std::shared_ptr<const model::DeviceSchema> schema = shared_schema();
  ApiMapping mapping = generate_routes(*schema, "100");
  behavior::TwinRuntime twin;

  explicit Fixture(Json filled = factory::generate_template(
                       model::builtin_dispenser_schema()),
                   std::uint64_t seed = 17)
      : twin(schema, factory::instantiate(*schema, filled, "100"),
             behavior::BehaviorSpec::dispenser(),
             behavior::DelayProfile::dispenser_default(), [&] {
               behavior::TwinConfig cfg;
               cfg.seed = seed;
               return cfg;
             }()) {}

  gateway::ResponseRecord call(std::int64_t id, const std::string& method,
                               const std::string& route, Json body = {},
                               std::int64_t at = 0) {
    RequestRecord req{id, "100", method, route, std::move(body), at};
    return gateway::handle(mapping, twin, req);
  }
};

bool has_route(const ApiMapping& mapping, const std::string& dt_route) {
  for (const auto& e : mapping.entries()) {
    if (e.dt_route == dt_route) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("route generation covers every containment path plus root and status") {
  const auto mapping = generate_routes(*shared_schema(), "100");

  CHECK(has_route(mapping, "/devices/100"));
  CHECK(has_route(mapping, "/devices/100/status"));
  CHECK(has_route(mapping, "/devices/100/settings/alarm"));
  CHECK(has_route(mapping, "/devices/100/medication-plans"));
  CHECK(has_route(mapping, "/devices/100/medication-plans/intake-times/medicine-lines"));

  // the alarm entry links the DT route to the vendor device route
  for (const auto& e : mapping.entries()) {
    if (e.dt_route == "/devices/100/settings/alarm") {
      CHECK(e.device_route == "/karie/100/settings/alarm");
      CHECK(e.class_name == "Alarm");
    }
  }

  // bijection: one association-path entry per containment association
  std::size_t assoc_paths = 0;
  for (const auto& cls : shared_schema()->classes()) {
    assoc_paths += cls.associations.size();
  }
  CHECK(mapping.entries().size() == assoc_paths + 2);  // + root + status

  std::set<std::string> routes;
  for (const auto& e : mapping.entries()) routes.insert(e.dt_route);
  CHECK(routes.size() == mapping.entries().size());  // no duplicates
}

TEST_CASE("a root-only schema exposes just the object and status routes") {
  model::DeviceSchema schema;
  model::ClassDef root;
  root.name = "Device";
  root.properties = {{"status", model::ValueKind::text, "", "ok"}};
  schema.add_class(root);
  schema.set_root_class("Device");

  const auto mapping = generate_routes(schema, "7");
  REQUIRE(mapping.entries().size() == 2);
  CHECK(mapping.entries()[0].dt_route == "/devices/7");
  CHECK(mapping.entries()[1].dt_route == "/devices/7/status");
}

TEST_CASE("PUT then GET round-trips the alarm settings") {
  Fixture fx;
  const Json body{{"silent_mode", false}, {"melody", "M1"}, {"repetitions", 2}};
  const auto put = fx.call(1, "PUT", "/devices/100/settings/alarm", body, 1000);
  CHECK(put.status_code == 200);
  CHECK(put.response_time_ms >= 2400);
  CHECK(put.response_time_ms <= 3000);

  const auto get = fx.call(2, "GET", "/devices/100/settings/alarm", {}, 2000);
  CHECK(get.status_code == 200);
  const Json& data = get.body.at("data");
  CHECK(data.at("silent_mode") == false);
  CHECK(data.at("melody") == "M1");
  CHECK(data.at("repetitions") == 2);
}

TEST_CASE("an out-of-range brightness is rejected without mutation") {
  Fixture fx;
  const std::string before = fx.twin.instance().dump();
  const auto res = fx.call(1, "POST", "/devices/100/settings/display",
                           Json{{"brightness", 6}}, 1000);
  CHECK(res.status_code == 503);
  CHECK(res.body.at("error").at("code") == "validation");
  CHECK(fx.twin.instance().dump() == before);

  bool c4 = false;
  for (const auto& v : res.body.at("error").at("violations")) {
    if (v.at("id") == "C4") c4 = true;
  }
  CHECK(c4);
}

TEST_CASE("mixed bodies are all-or-nothing on the twin") {
  Fixture fx;
  const std::string before = fx.twin.instance().dump();
  const auto res = fx.call(1, "POST", "/devices/100/settings/display",
                           Json{{"brightness", 3}, {"volume", 99}}, 1000);
  CHECK(res.status_code == 503);
  CHECK(fx.twin.instance().dump() == before);  // brightness NOT applied
}

TEST_CASE("unknown body keys count as invalid fields") {
  Fixture fx;
  const auto res =
      fx.call(1, "POST", "/devices/100/settings/alarm", Json{{"warp_drive", 1}}, 1000);
  CHECK(res.status_code == 503);
}

TEST_CASE("DELETE removes existing plans and errors on missing ones") {
  Fixture fx;
  const auto del = fx.call(1, "DELETE", "/devices/100/medication-plans/0", {}, 1000);
  CHECK(del.status_code == 200);
  CHECK(fx.twin.instance().root()->children.at("medication_plans").empty());

  const auto missing = fx.call(2, "DELETE", "/devices/100/medication-plans/0", {}, 2000);
  CHECK(missing.status_code == 503);
  CHECK(missing.body.at("error").at("code") == "not_found");
}

TEST_CASE("POST on the plans collection appends a validated plan") {
  Fixture fx;
  const Json plan{{"first_dose_date", "2023-01-02"},
                  {"period_days", 7},
                  {"intake_times",
                   Json::array({Json{{"time", "10:00"},
                                     {"medicine_lines",
                                      Json::array({Json{{"doses", 3},
                                                        {"current_roll", 9},
                                                        {"next_roll", 0}}})}}})}};
  const auto res = fx.call(1, "POST", "/devices/100/medication-plans", plan, 1000);
  CHECK(res.status_code == 200);
  CHECK(res.body.at("data").at("index") == 1);
  CHECK(fx.twin.instance().root()->children.at("medication_plans").size() == 2);

  // invalid nested dose: the plan must not be appended
  Json bad = plan;
  bad["intake_times"][0]["medicine_lines"][0]["doses"] = 10;
  const auto rejected = fx.call(2, "POST", "/devices/100/medication-plans", bad, 2000);
  CHECK(rejected.status_code == 503);
  CHECK(fx.twin.instance().root()->children.at("medication_plans").size() == 2);
}

TEST_CASE("GET on a collection returns the element array") {
  Fixture fx;
  const auto res = fx.call(1, "GET", "/devices/100/medication-plans", {}, 500);
  CHECK(res.status_code == 200);
  REQUIRE(res.body.at("data").is_array());
  CHECK(res.body.at("data").size() == 1);
  CHECK(res.body.at("data")[0].at("period_days") == 14);

  const auto el = fx.call(2, "GET", "/devices/100/medication-plans/0/intake-times/0", {}, 600);
  CHECK(el.status_code == 200);
  CHECK(el.body.at("data").at("time") == "09:00");

  const auto oob = fx.call(3, "GET", "/devices/100/medication-plans/4", {}, 700);
  CHECK(oob.status_code == 503);
}

TEST_CASE("the status route reports state and virtual time") {
  Fixture fx;
  const auto res = fx.call(1, "GET", "/devices/100/status", {}, 40'000);
  CHECK(res.status_code == 200);
  CHECK(res.body.at("data").at("serial") == "100");
  CHECK(res.body.at("data").at("state") == "CheckMedicationPlan");
}

TEST_CASE("unmapped routes and methods are transport-level errors") {
  Fixture fx;
  CHECK_THROWS_AS(fx.call(1, "GET", "/devices/100/warp", {}, 0), DtError);
  CHECK_THROWS_AS(fx.call(2, "PATCH", "/devices/100", {}, 0), DtError);
  CHECK_THROWS_AS(fx.call(3, "DELETE", "/devices/100/settings/alarm", {}, 0), DtError);
  CHECK_THROWS_AS(fx.call(4, "POST", "/devices/999/settings", {}, 0), DtError);
  try {
    fx.call(5, "GET", "/devices/100/warp", {}, 0);
  } catch (const DtError& e) {
    CHECK(e.code() == Errc::route_not_found);
  }
}

TEST_CASE("every request during a dispense window gets 503 and leaves no trace") {
  Fixture fx;
  fx.twin.run_until(kHour);
  REQUIRE(fx.twin.state() == State::dispense);
  const auto busy_end = fx.twin.busy_until_ms();
  const std::string before = fx.twin.instance().dump();

  int id = 0;
  for (const char* method : {"GET", "POST", "PUT"}) {
    const auto res = fx.call(++id, method, "/devices/100/settings/display",
                             Json{{"brightness", 2}}, kHour + 5'000);
    CHECK(res.status_code == 503);
    CHECK(res.body.at("error").at("code") == "busy");
    CHECK(res.response_time_ms <= 150);  // busy rejections come back fast
  }
  const auto status = fx.call(++id, "GET", "/devices/100/status", {}, kHour + 6'000);
  CHECK(status.status_code == 503);
  CHECK(fx.twin.instance().dump() == before);

  // after the window the same update succeeds
  const auto after = fx.call(++id, "POST", "/devices/100/settings/display",
                             Json{{"brightness", 2}}, busy_end + 1);
  CHECK(after.status_code == 200);
}

TEST_CASE("a shut-down twin answers 503 to everything") {
  Fixture fx;
  fx.twin.shutdown();
  const auto res = fx.call(1, "GET", "/devices/100/status", {}, 1000);
  CHECK(res.status_code == 503);
  CHECK(res.body.at("error").at("code") == "shutdown");
}

TEST_CASE("validation gate: 200 iff the body validates and the twin is free") {
  Fixture fx;
  Rng rng(31);
  std::int64_t t = 1000;
  for (int round = 0; round < 300; ++round) {
    t += 1000;
    const bool valid = rng.uniform_int(0, 1) == 1;
    const Json body{{"brightness", valid ? rng.uniform_int(1, 5) : 6 + rng.uniform_int(0, 9)}};
    const std::string before = fx.twin.instance().dump();
    const auto res = fx.call(round + 10, "POST", "/devices/100/settings/display", body, t);
    const bool busy = fx.twin.busy_at(t);
    if (res.status_code == 200) {
      CHECK(valid);
      CHECK_FALSE(busy);
    } else {
      CHECK((!valid || busy));
      CHECK(fx.twin.instance().dump() == before);  // no mutation on any 503
    }
  }
}
