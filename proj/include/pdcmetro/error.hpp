// Copyright 2026 The pdcmetro Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace pdcm {

enum class Errc {
    domain,              // argument outside an operation's precondition
    unsupported_regime,  // e.g. gain tau >= 1
    fit,                 // rank-deficient or otherwise failed fringe fit
    calibration,         // rates admit no physical solution
    parse,               // malformed input stream or file
    io,
};

/// Exception carried by every failure in the core library. The C API maps
/// `code()` onto its status enum.
class Error : public std::runtime_error {
   public:
    Error(Errc code, const std::string &what) : std::runtime_error(what), code_(code) {}
    Errc code() const noexcept { return code_; }

   private:
    Errc code_;
};

}  // namespace pdcm
