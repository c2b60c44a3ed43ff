// Copyright 2026 The grantscreen Authors.
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

#ifndef GRANTSCREEN_PARAMS_HPP_
#define GRANTSCREEN_PARAMS_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "grantscreen/rng.hpp"

namespace grantscreen {

enum class Init { kFanInUniform, kZeros, kOnes };

// Named dense parameters in registration order. Registration order is the
// canonical order for initialization, optimizer state, and serialization.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Eigen::MatrixXd value;
    bool trainable = false;
  };

  // Weight matrices draw from uniform(-1/sqrt(rows), +1/sqrt(rows)); rows is
  // the input dimension under the row-vector convention used throughout.
  Eigen::MatrixXd& add(const std::string& name, Eigen::Index rows,
                       Eigen::Index cols, Init init, bool trainable, Rng& rng);

  Eigen::MatrixXd& at(const std::string& name);
  const Eigen::MatrixXd& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // Trainable scalar count, reported in training logs.
  std::size_t num_trainable() const;

  // Deep copy / restore of all values (trainable and running statistics).
  std::vector<Eigen::MatrixXd> snapshot_values() const;
  void restore_values(const std::vector<Eigen::MatrixXd>& values);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Single-file binary checkpoint: magic, version, JSON entry table, then the
// concatenated little-endian doubles of every entry in order.
void save_checkpoint(const std::filesystem::path& path, const ParamStore& store,
                     const std::string& model_kind, std::uint64_t seed,
                     const std::string& config_hash);

struct Checkpoint {
  ParamStore store;
  std::string model_kind;
  std::uint64_t seed = 0;
  std::string config_hash;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace grantscreen

#endif  // GRANTSCREEN_PARAMS_HPP_
