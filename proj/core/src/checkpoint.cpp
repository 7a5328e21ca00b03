// Copyright 2026 The cotpcc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <bit>
#include <cstring>
#include <fstream>

#include "cotpcc/errors.hpp"
#include "cotpcc/random.hpp"
#include "cotpcc/training.hpp"

namespace cotpcc {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'C', 'O', 'T', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

// Every tensor of a training state under a stable name.
std::vector<std::pair<std::string, Matrix*>> tensors(TrainState& state) {
  std::vector<std::pair<std::string, Matrix*>> out;
  for (auto* store : state.generator->stores()) {
    for (auto& [name, var] : store->entries()) {
      Var v = var;
      out.emplace_back("generator/" + store->group() + "/" + name, &v.mutable_value());
    }
  }
  for (auto& [name, var] : state.critic->store().entries()) {
    Var v = var;
    out.emplace_back("critic/" + name, &v.mutable_value());
  }
  const auto add_adam = [&out](const std::string& prefix, nn::Adam& adam) {
    for (std::size_t i = 0; i < adam.first_moments().size(); ++i) {
      out.emplace_back(prefix + "/m/" + std::to_string(i), &adam.first_moments()[i]);
      out.emplace_back(prefix + "/v/" + std::to_string(i), &adam.second_moments()[i]);
    }
  };
  add_adam("adam/generator", state.generator_optimizer);
  add_adam("adam/entropy", state.entropy_optimizer);
  add_adam("adam/critic", state.critic_optimizer);
  return out;
}

// Covers every tensor, optimizer moments included.
std::uint64_t payload_digest(const std::vector<std::pair<std::string, Matrix*>>& list) {
  Digest d;
  for (const auto& entry : list) d.update(entry.second->data(), static_cast<std::size_t>(entry.second->size()) * 8);
  return d.value();
}

void write_le_doubles(std::ostream& out, const Matrix& m) {
  std::vector<std::uint64_t> raw(static_cast<std::size_t>(m.size()));
  std::memcpy(raw.data(), m.data(), raw.size() * sizeof(double));
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& r : raw) r = __builtin_bswap64(r);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 8));
}

json adam_json(const nn::Adam& adam) {
  return {{"steps", adam.steps_taken()}, {"buffers", adam.first_moments().size()}};
}

void restore_adam(nn::Adam& adam, const json& j, const std::vector<Var>& params) {
  adam.set_steps_taken(j.at("steps").get<std::int64_t>());
  const auto buffers = j.at("buffers").get<std::size_t>();
  if (buffers != 0 && buffers != params.size()) throw DataError("checkpoint: optimizer state does not match model");
  adam.first_moments().clear();
  adam.second_moments().clear();
  for (std::size_t i = 0; i < buffers; ++i) {
    adam.first_moments().push_back(Matrix::Zero(params[i].rows(), params[i].cols()));
    adam.second_moments().push_back(Matrix::Zero(params[i].rows(), params[i].cols()));
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
  auto& mutable_state = const_cast<TrainState&>(state);
  const auto list = tensors(mutable_state);
  json index = json::array();
  for (const auto& [name, m] : list) index.push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}});
  const json header = {{"format", "cotpcc-checkpoint"},
                       {"config", to_json(state.config)},
                       {"step", state.step},
                       {"consecutive_failures", state.consecutive_failures},
                       {"averages",
                        {{"cost_c", state.averages.cost_c},
                         {"d_wass", state.averages.d_wass},
                         {"l_otr", state.averages.l_otr},
                         {"rate_bpp", state.averages.rate_bpp},
                         {"count", state.averages.count}}},
                       {"generator_digest", state.generator->digest()},
                       {"critic_digest", state.critic->digest()},
                       {"payload_digest", payload_digest(list)},
                       {"optimizers",
                        {{"generator", adam_json(state.generator_optimizer)},
                         {"entropy", adam_json(state.entropy_optimizer)},
                         {"critic", adam_json(state.critic_optimizer)}}},
                       {"tensors", index}};
  const std::string text = header.dump();

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const std::uint32_t version = kVersion;
    const auto length = static_cast<std::uint64_t>(text.size());
    unsigned char buf[12];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(version >> (8 * i));
    for (int i = 0; i < 8; ++i) buf[4 + i] = static_cast<unsigned char>(length >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof(buf));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& entry : list) write_le_doubles(out, *entry.second);
    if (!out) throw Error("write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

std::unique_ptr<TrainState> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  unsigned char buf[12];
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(buf), sizeof(buf));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a cotpcc checkpoint: " + path.string());
  }
  std::uint32_t version = 0;
  std::uint64_t length = 0;
  for (int i = 0; i < 4; ++i) version |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  for (int i = 0; i < 8; ++i) length |= static_cast<std::uint64_t>(buf[4 + i]) << (8 * i);
  if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  if (length > (std::uint64_t{1} << 30)) throw DataError("checkpoint header too large");
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw DataError("truncated checkpoint header at byte offset " + std::to_string(20 + in.gcount()));

  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }
  auto state = std::make_unique<TrainState>(train_config_from_json(header.at("config")));
  try {
    state->step = header.at("step").get<std::int64_t>();
    state->consecutive_failures = header.at("consecutive_failures").get<int>();
    const json& avg = header.at("averages");
    state->averages.cost_c = avg.at("cost_c").get<double>();
    state->averages.d_wass = avg.at("d_wass").get<double>();
    state->averages.l_otr = avg.at("l_otr").get<double>();
    state->averages.rate_bpp = avg.at("rate_bpp").get<double>();
    state->averages.count = avg.at("count").get<std::int64_t>();
    const json& opt = header.at("optimizers");
    restore_adam(state->generator_optimizer, opt.at("generator"), state->network_parameters());
    restore_adam(state->entropy_optimizer, opt.at("entropy"), state->entropy_parameters());
    restore_adam(state->critic_optimizer, opt.at("critic"), state->critic->parameters());

    const auto list = tensors(*state);
    const json& index = header.at("tensors");
    if (index.size() != list.size()) throw DataError("checkpoint tensor list does not match the model");
    std::uint64_t offset = 20 + length;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& [name, target] = list[i];
      const json& entry = index[i];
      if (entry.at("name").get<std::string>() != name || entry.at("rows").get<Index>() != target->rows() ||
          entry.at("cols").get<Index>() != target->cols()) {
        throw DataError("checkpoint tensor '" + entry.at("name").get<std::string>() + "' does not match '" + name +
                        "'");
      }
      std::vector<std::uint64_t> raw(static_cast<std::size_t>(target->size()));
      in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 8));
      if (!in) throw DataError("truncated checkpoint at byte offset " + std::to_string(offset));
      if constexpr (std::endian::native == std::endian::big) {
        for (auto& r : raw) r = __builtin_bswap64(r);
      }
      std::memcpy(target->data(), raw.data(), raw.size() * 8);
      offset += raw.size() * 8;
    }
    if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in checkpoint");
    if (state->generator->digest() != header.at("generator_digest").get<std::uint64_t>() ||
        state->critic->digest() != header.at("critic_digest").get<std::uint64_t>()) {
      throw DigestMismatch("checkpoint parameters do not match their recorded digest");
    }
    if (payload_digest(list) != header.at("payload_digest").get<std::uint64_t>()) {
      throw DigestMismatch("checkpoint optimizer state does not match its recorded digest");
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }
  return state;
}

}  // namespace cotpcc
