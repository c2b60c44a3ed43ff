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

#include "grantscreen/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "grantscreen/errors.hpp"

namespace grantscreen {

namespace {
using json = nlohmann::json;
constexpr char kMagic[4] = {'G', 'S', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

Eigen::MatrixXd& ParamStore::add(const std::string& name, Eigen::Index rows,
                                 Eigen::Index cols, Init init, bool trainable,
                                 Rng& rng) {
  if (index_.count(name) != 0) {
    throw Error("duplicate_param", "parameter already registered: " + name);
  }
  Entry e;
  e.name = name;
  e.trainable = trainable;
  switch (init) {
    case Init::kZeros:
      e.value = Eigen::MatrixXd::Zero(rows, cols);
      break;
    case Init::kOnes:
      e.value = Eigen::MatrixXd::Ones(rows, cols);
      break;
    case Init::kFanInUniform: {
      const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
      e.value.resize(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          e.value(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
        }
      }
      break;
    }
  }
  index_[name] = entries_.size();
  entries_.push_back(std::move(e));
  return entries_.back().value;
}

Eigen::MatrixXd& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw Error("missing_param", "no such parameter: " + name);
  }
  return entries_[it->second].value;
}

const Eigen::MatrixXd& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw Error("missing_param", "no such parameter: " + name);
  }
  return entries_[it->second].value;
}

bool ParamStore::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

std::size_t ParamStore::num_trainable() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) {
    if (e.trainable) n += static_cast<std::size_t>(e.value.size());
  }
  return n;
}

std::vector<Eigen::MatrixXd> ParamStore::snapshot_values() const {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(entries_.size());
  for (const Entry& e : entries_) out.push_back(e.value);
  return out;
}

void ParamStore::restore_values(const std::vector<Eigen::MatrixXd>& values) {
  if (values.size() != entries_.size()) {
    throw Error("checkpoint", "snapshot size does not match store");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    entries_[i].value = values[i];
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store,
                     const std::string& model_kind, std::uint64_t seed,
                     const std::string& config_hash) {
  json table = json::array();
  for (const auto& e : store.entries()) {
    table.push_back({{"name", e.name},
                     {"rows", e.value.rows()},
                     {"cols", e.value.cols()},
                     {"trainable", e.trainable}});
  }
  json meta = {{"model", model_kind},
               {"seed", seed},
               {"config_hash", config_hash},
               {"tensors", table}};
  const std::string meta_str = meta.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write checkpoint: " + path.string());
  out.write(kMagic, 4);
  const std::uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t len = meta_str.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  for (const auto& e : store.entries()) {
    out.write(reinterpret_cast<const char*>(e.value.data()),
              static_cast<std::streamsize>(sizeof(double) * e.value.size()));
  }
  if (!out) throw Error("io", "checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot read checkpoint: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error("checkpoint", "bad magic in " + path.string());
  }
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kVersion) {
    throw Error("checkpoint", "unsupported checkpoint version");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1ull << 30)) {
    throw Error("checkpoint", "corrupt metadata length");
  }
  std::string meta_str(len, '\0');
  in.read(meta_str.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error("checkpoint", "truncated metadata");
  json meta = json::parse(meta_str, nullptr, /*allow_exceptions=*/false);
  if (meta.is_discarded()) throw Error("checkpoint", "metadata is not JSON");

  Checkpoint ck;
  ck.model_kind = meta.at("model").get<std::string>();
  ck.seed = meta.at("seed").get<std::uint64_t>();
  ck.config_hash = meta.at("config_hash").get<std::string>();
  Rng unused(0);
  for (const auto& t : meta.at("tensors")) {
    Eigen::MatrixXd& m = ck.store.add(
        t.at("name").get<std::string>(), t.at("rows").get<Eigen::Index>(),
        t.at("cols").get<Eigen::Index>(), Init::kZeros,
        t.at("trainable").get<bool>(), unused);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!in) throw Error("checkpoint", "truncated tensor data");
  }
  return ck;
}

}  // namespace grantscreen
