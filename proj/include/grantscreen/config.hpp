// Copyright 2026 the grantscreen authors
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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grantscreen/graph.hpp"
#include "grantscreen/ingest.hpp"
#include "grantscreen/labels.hpp"
#include "grantscreen/models.hpp"
#include "grantscreen/synth.hpp"
#include "grantscreen/train.hpp"

namespace grantscreen {

// Whole-pipeline configuration. Every field carries the default the rest of
// the system was tuned against, so an empty JSON object is a valid config and
// a file needs to spell out only what it overrides.
struct RunConfig {
  std::string input_csv;
  std::string out_dir = "out";

  ingest::IngestConfig ingest;
  int dataset_min_year = 2005;  // recency-feature floor
  CoTopicCaps caps;
  std::uint64_t graph_seed = 7;

  labels::HorizonConfig horizon;
  models::ModelConfig model;
  train::TrainConfig train;
  synth::SynthConfig synth;

  std::vector<int> ks = {100};
  std::vector<std::string> model_list = {"hgt", "rgcn", "mlp"};

  // Throws Error("bad_config") on any out-of-range or inconsistent field.
  void validate() const;
};

// Defaults only; equivalent to loading "{}".
RunConfig default_config();

// Parses a JSON config file, overlaying present keys onto the defaults.
// Unknown keys are rejected ("config_parse") so typos fail loudly. The
// result has been validated.
RunConfig load_config(const std::string& path);

// Canonical JSON rendering of the full effective config, keys sorted.
std::string config_canonical_json(const RunConfig& cfg);

// Hex digest of the canonical rendering; embedded in artifacts so any output
// can be traced to the exact settings that produced it.
std::string config_hash(const RunConfig& cfg);

void write_config_json(const std::string& path, const RunConfig& cfg);

}  // namespace grantscreen
