// Copyright 2026 The chunkflow Authors
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

#include "chunkflow/chunking.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "chunkflow/errors.h"
#include "chunkflow/random.h"

namespace chunkflow {

ActionChunk BuildInpaintTarget(const ActionChunk& prev, int offset) {
  const int horizon = static_cast<int>(prev.rows());
  if (offset < 0 || offset > horizon) {
    throw StructuralError("inpaint offset " + std::to_string(offset) +
                          " outside [0, " + std::to_string(horizon) + "]");
  }
  ActionChunk target = ActionChunk::Zero(prev.rows(), prev.cols());
  const int overlap = horizon - offset;
  if (overlap > 0) target.topRows(overlap) = prev.bottomRows(overlap);
  return target;
}

Vector BuildSoftMask(int horizon, int delay, int replan_every, double decay) {
  if (horizon < 1) throw StructuralError("horizon must be >= 1");
  if (delay < 0 || delay >= horizon) {
    throw StructuralError("delay " + std::to_string(delay) +
                          " must satisfy 0 <= d < H = " +
                          std::to_string(horizon));
  }
  if (replan_every < 1 || replan_every > horizon) {
    throw StructuralError("replan step must satisfy 1 <= s <= H");
  }
  if (!(decay > 0.0 && decay <= 1.0)) {
    throw StructuralError("mask decay must be in (0, 1]");
  }
  const int overlap = horizon - replan_every;
  const int frozen = std::min(delay, overlap);
  Vector mask = Vector::Zero(horizon);
  for (int i = 0; i < overlap; ++i) {
    mask(i) = i < frozen ? 1.0 : std::pow(decay, i - delay + 1);
  }
  return mask;
}

ChunkExecutor::ChunkExecutor(const VelocityField& field,
                             ExecutorOptions options, int horizon,
                             int action_dim)
    : field_(field), options_(std::move(options)), action_dim_(action_dim) {
  if (horizon < 1 || action_dim < 1) {
    throw StructuralError("executor needs H >= 1 and D >= 1");
  }
  ValidateGuidanceConfig(options_.guidance);
  state_.delay = options_.delay;
  state_.replan_every =
      options_.replan_every.value_or(ReplanEvery(options_.delay));
  state_.horizon = horizon;
  // Rejects d >= H and bad decays before any step runs.
  BuildSoftMask(horizon, state_.delay, state_.replan_every,
                options_.mask_decay);
}

ActionChunk ChunkExecutor::Generate(const Observation& obs,
                                    const std::optional<InpaintSpec>& spec,
                                    uint64_t seed) {
  const ActionChunk noise =
      StandardNormalChunk(state_.horizon, action_dim_, seed);
  GuidanceConfig config = options_.guidance;
  if (!spec) config.method = GuidanceMethod::kNaive;
  return GuidedDenoise(noise, obs, field_, spec, config);
}

StepOutput ChunkExecutor::Step(const Observation& obs) {
  const int t = state_.env_step;
  bool swapped = false;

  if (t == 0) {
    const uint64_t seed = DeriveSeed(options_.noise_seed, {0});
    state_.active_chunk = Generate(obs, std::nullopt, seed);
    state_.active_origin = 0;
    state_.requests_issued = 1;
    if (options_.keep_records) {
      records_.push_back({0, 0, ActionChunk(), Vector(), state_.active_chunk});
    }
  } else if (state_.pending &&
             state_.pending->issued_at_step + state_.delay == t) {
    state_.active_chunk = std::move(state_.pending->chunk);
    state_.active_origin = state_.pending->issued_at_step;
    state_.pending.reset();
    swapped = true;
  }

  const bool cadence = t % state_.replan_every == 0;
  if (cadence && (t > 0 || state_.delay > 0)) {
    const int offset = t - state_.active_origin;
    InpaintSpec spec{
        BuildInpaintTarget(state_.active_chunk, offset),
        BuildSoftMask(state_.horizon, state_.delay, state_.replan_every,
                      options_.mask_decay)};
    const uint64_t seed =
        DeriveSeed(options_.noise_seed,
                   {static_cast<uint64_t>(state_.requests_issued)});
    ++state_.requests_issued;
    ActionChunk chunk = Generate(obs, spec, seed);
    if (options_.keep_records) {
      records_.push_back({t, t + state_.delay, spec.target, spec.mask, chunk});
    }
    if (state_.delay == 0) {
      state_.active_chunk = std::move(chunk);
      state_.active_origin = t;
      swapped = true;
    } else {
      state_.pending = PendingRequest{t, obs, seed, std::move(chunk)};
    }
  }

  state_.exec_index = t - state_.active_origin;
  if (state_.exec_index >= state_.horizon) {
    throw ScheduleOverrun("chunk exhausted at step " + std::to_string(t) +
                          " before the pending chunk arrived");
  }

  StepOutput out;
  out.action = state_.active_chunk.row(state_.exec_index)
                   .transpose()
                   .cwiseMax(-1.0)
                   .cwiseMin(1.0);
  if (swapped && last_action_) {
    out.boundary = BoundaryEvent{t, *last_action_, out.action};
  }
  last_action_ = out.action;
  ++state_.env_step;
  return out;
}

}  // namespace chunkflow
