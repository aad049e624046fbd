// Copyright 2026 The subbayes Authors.
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

#ifndef SUBBAYES_CHECKPOINT_HPP_
#define SUBBAYES_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>

#include "subbayes/network.hpp"

namespace subbayes {

// Directory layout: manifest.json (architecture, per-layer kind, ranks,
// scale, seed) plus one SBMX file per named matrix, e.g. layer0_W0.sbmx,
// layer0_R.sbmx, layer4_W.sbmx.
void checkpoint_save(const Network& net, const std::filesystem::path& dir,
                     std::optional<std::uint64_t> seed = std::nullopt);

// Throws FormatError on malformed files or when stored shapes disagree with
// the manifest (e.g. a core whose size does not match the recorded rank).
Network checkpoint_load(const std::filesystem::path& dir);

}  // namespace subbayes

#endif  // SUBBAYES_CHECKPOINT_HPP_
