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

#ifndef COTPCC_ERRORS_HPP_
#define COTPCC_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace cotpcc {

// Error taxonomy. The command-line tool maps each class onto an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unreadable input data (files, headers, streams).
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

// Argument violates an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Bitstream or checkpoint was produced by a different model.
class DigestMismatch : public Error {
 public:
  using Error::Error;
};

// Training produced non-finite losses repeatedly.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace cotpcc

#endif  // COTPCC_ERRORS_HPP_
