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

#include "cotpcc/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace cotpcc::nn {

Var ParamStore::add(const std::string& name, Matrix init) {
  for (const auto& [existing, _] : entries_) {
    if (existing == name) throw std::logic_error("duplicate parameter '" + name + "'");
  }
  Var v(std::move(init), true);
  entries_.emplace_back(name, v);
  return v;
}

std::vector<Var> ParamStore::vars() const {
  std::vector<Var> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.second);
  return out;
}

Var ParamStore::find(const std::string& name) const {
  for (const auto& [n, v] : entries_) {
    if (n == name) return v;
  }
  throw std::out_of_range("no parameter '" + name + "' in group '" + group_ + "'");
}

Index ParamStore::scalar_count() const {
  Index total = 0;
  for (const auto& e : entries_) total += e.second.rows() * e.second.cols();
  return total;
}

std::uint64_t ParamStore::digest() const {
  Digest d;
  for (const auto& [name, v] : entries_) {
    d.update(name.data(), name.size());
    const Index r = v.rows(), c = v.cols();
    d.update_value(r);
    d.update_value(c);
    d.update(v.value().data(), static_cast<std::size_t>(r * c) * sizeof(double));
  }
  return d.value();
}

void ParamStore::assign(const ParamStore& other) {
  if (other.entries_.size() != entries_.size()) throw std::invalid_argument("ParamStore::assign: size mismatch");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& [name, v] = entries_[i];
    const auto& [oname, ov] = other.entries_[i];
    if (name != oname || v.rows() != ov.rows() || v.cols() != ov.cols()) {
      throw std::invalid_argument("ParamStore::assign: layout mismatch at '" + name + "'");
    }
    v.mutable_value() = ov.value();
  }
}

Linear Linear::create(ParamStore& store, const std::string& name, Index in, Index out, Rng& rng, double gain) {
  const double bound = gain / std::sqrt(static_cast<double>(in));
  Matrix w(in, out);
  for (Index i = 0; i < in; ++i) {
    for (Index j = 0; j < out; ++j) w(i, j) = rng.uniform(-bound, bound);
  }
  Linear layer;
  layer.weight = store.add(name + ".weight", std::move(w));
  layer.bias = store.add(name + ".bias", Matrix::Zero(1, out));
  return layer;
}

void Adam::step(const std::vector<Var>& params, const std::vector<Var>& grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("Adam::step: size mismatch");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Matrix::Zero(p.rows(), p.cols()));
      v_.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("Adam::step: parameter set changed");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Var p = params[i];
    const Matrix& g = grads[i].value();
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseAbs2();
    p.mutable_value().array() -=
        lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

std::uint64_t digest_of(const std::vector<Var>& vars) {
  Digest d;
  for (const auto& v : vars) {
    d.update(v.value().data(), static_cast<std::size_t>(v.rows() * v.cols()) * sizeof(double));
  }
  return d.value();
}

}  // namespace cotpcc::nn
