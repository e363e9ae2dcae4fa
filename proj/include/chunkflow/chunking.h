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

#ifndef CHUNKFLOW_CHUNKING_H_
#define CHUNKFLOW_CHUNKING_H_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "chunkflow/flow.h"
#include "chunkflow/guidance.h"
#include "chunkflow/types.h"

namespace chunkflow {

// Replan cadence s = max(d, 1).
constexpr int ReplanEvery(int delay) { return delay > 1 ? delay : 1; }

// Y_i = prev_{offset + i} for i < H - offset, zero rows afterwards.
// `offset` is the number of ticks between the origin of `prev` and the
// origin of the chunk being requested. Throws StructuralError unless
// 0 <= offset <= H.
ActionChunk BuildInpaintTarget(const ActionChunk& prev, int offset);

// Soft mask over the overlap L = H - s: 1 for i < min(d, L),
// decay^(i - d + 1) for min(d, L) <= i < L, 0 for i >= L.
Vector BuildSoftMask(int horizon, int delay, int replan_every, double decay);

struct BoundaryEvent {
  int env_step = 0;
  Vector last_action_old;
  Vector first_action_new;
};

// A chunk request in flight: generated from the observation frozen at
// `issued_at_step`, swapped in at `issued_at_step + delay`.
struct PendingRequest {
  int issued_at_step = 0;
  Observation frozen_observation;
  uint64_t noise_seed = 0;
  ActionChunk chunk;
};

struct ChunkScheduleState {
  ActionChunk active_chunk;
  int active_origin = 0;  // env step that row 0 of active_chunk belongs to
  int exec_index = 0;     // row executed at the current step
  std::optional<PendingRequest> pending;
  int delay = 0;
  int replan_every = 1;
  int horizon = 0;
  int env_step = 0;  // next step to execute
  int requests_issued = 0;
};

// One generated chunk with the guidance inputs it was conditioned on.
struct ChunkRecord {
  int issued_at_step = 0;
  int arrival_step = 0;
  ActionChunk target;
  Vector mask;
  ActionChunk chunk;
};

class ScheduleOverrun : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExecutorOptions {
  int delay = 0;
  GuidanceConfig guidance;
  // Replan step; max(d, 1) when unset.
  std::optional<int> replan_every;
  double mask_decay = 0.5;
  uint64_t noise_seed = 0;
  bool keep_records = false;
};

struct StepOutput {
  Vector action;  // clipped to [-1, 1]
  std::optional<BoundaryEvent> boundary;
};

// Fixed-cadence chunk executor with simulated inference delay.
//
// Step 0 executes a bootstrap chunk generated without guidance. Requests are
// issued every s steps (starting at step 0 when d > 0, at step 1 when d = 0)
// from the current observation, with Y and W built from the active chunk at
// issue time. A request issued at t is swapped in at t + d and executed from
// row d, so rows [0, d) of the new chunk cover ticks still served by the old
// chunk.
class ChunkExecutor {
 public:
  ChunkExecutor(const VelocityField& field, ExecutorOptions options,
                int horizon, int action_dim);

  // Executes one control tick. Throws ScheduleOverrun if the active chunk is
  // exhausted before its replacement arrives.
  StepOutput Step(const Observation& obs);

  const ChunkScheduleState& state() const { return state_; }
  const std::vector<ChunkRecord>& records() const { return records_; }

 private:
  ActionChunk Generate(const Observation& obs,
                       const std::optional<InpaintSpec>& spec, uint64_t seed);

  const VelocityField& field_;
  ExecutorOptions options_;
  int action_dim_;
  ChunkScheduleState state_;
  std::optional<Vector> last_action_;
  std::vector<ChunkRecord> records_;
};

}  // namespace chunkflow

#endif  // CHUNKFLOW_CHUNKING_H_
