// Copyright 2024 The dtwin Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "emulator/emulator.hpp"

namespace dtwin::emulator {

void EmulatorConfig::validate() const {
  latency.validate();
  if (quirk_rate < 0.0 || quirk_rate > 1.0) {
    throw DtError(Errc::invalid_argument, "quirk_rate must lie in [0, 1]");
  }
  if (dispense_busy_ms < 0) {
    throw DtError(Errc::invalid_argument, "dispense_busy_ms must not be negative");
  }
}

Json EmulatorConfig::to_json() const {
  return Json{{"latency", latency.to_json()},
              {"quirk_rate", quirk_rate},
              {"dispense_busy_ms", dispense_busy_ms},
              {"seed", seed},
              {"epoch", format_civil_datetime(epoch_civil_ms)},
              {"poll_interval_ms", poll_interval_ms},
              {"vendor_prefix", vendor_prefix}};
}

EmulatorConfig EmulatorConfig::from_json(const Json& j) {
  EmulatorConfig cfg;
  if (j.contains("latency")) cfg.latency = behavior::DelayProfile::from_json(j.at("latency"));
  cfg.quirk_rate = j.value("quirk_rate", cfg.quirk_rate);
  cfg.dispense_busy_ms = j.value("dispense_busy_ms", cfg.dispense_busy_ms);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("epoch")) {
    const auto epoch = parse_civil_datetime(j.at("epoch").get<std::string>());
    if (!epoch) throw DtError(Errc::parse, "bad epoch datetime in emulator config");
    cfg.epoch_civil_ms = *epoch;
  }
  cfg.poll_interval_ms = j.value("poll_interval_ms", cfg.poll_interval_ms);
  cfg.vendor_prefix = j.value("vendor_prefix", cfg.vendor_prefix);
  cfg.validate();
  return cfg;
}

EmulatorRuntime::EmulatorRuntime(std::shared_ptr<const model::DeviceSchema> schema,
                                 model::DeviceInstance instance, EmulatorConfig config)
    : config_(std::move(config)) {
  config_.validate();
  mapping_ = gateway::generate_routes(*schema, instance.serial(), config_.vendor_prefix);

  behavior::DelayProfile profile = config_.latency;
  profile.set("dispense", {config_.dispense_busy_ms, config_.dispense_busy_ms,
                           static_cast<double>(config_.dispense_busy_ms)});

  behavior::TwinConfig twin_cfg;
  twin_cfg.epoch_civil_ms = config_.epoch_civil_ms;
  twin_cfg.poll_interval_ms = config_.poll_interval_ms;
  twin_cfg.seed = config_.seed;

  runtime_ = std::make_unique<behavior::TwinRuntime>(std::move(schema), std::move(instance),
                                                     behavior::BehaviorSpec::dispenser(),
                                                     std::move(profile), twin_cfg);
}

gateway::ResponseRecord EmulatorRuntime::emulate(const gateway::RequestRecord& request) {
  gateway::HandlePolicy policy;
  policy.partial_accept_rate = config_.quirk_rate;
  return gateway::handle(mapping_, *runtime_, request, policy);
}

}  // namespace dtwin::emulator
