// Copyright 2026 The LSAN Authors.
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

#ifndef LSAN_CHECKPOINT_H_
#define LSAN_CHECKPOINT_H_

#include <filesystem>
#include <string>
#include <string_view>

#include "lsan/model.h"

namespace lsan {

// Checkpoint container: a UTF-8 text manifest terminated by a line "end",
// followed by the raw little-endian float32 payload.
//
//   LSAN-CHECKPOINT 1
//   config_hash <hex>
//   model <key>=<value>                       (one per model setting)
//   tensor <name> f32 <d0>x<d1> <byte-offset> (one per parameter, in order)
//   payload <bytes>
//   end
//
// Offsets are relative to the first payload byte. Item and context vocab
// files are written next to the checkpoint by the caller.
void SaveCheckpoint(const LsanModel<float>& model,
                    const std::filesystem::path& path,
                    std::string_view config_hash);

struct LoadedCheckpoint {
  LsanModel<float> model;
  std::string config_hash;
};

// Rebuilds the model from its stored configuration and overwrites every
// parameter. Throws IoError on any format or shape mismatch.
LoadedCheckpoint LoadCheckpoint(const std::filesystem::path& path);

// Copies parameter values between models with identical structure.
template <typename To, typename From>
void CopyParameters(const LsanModel<From>& from, LsanModel<To>& to);

}  // namespace lsan

#endif  // LSAN_CHECKPOINT_H_
