// Copyright 2026 The metasense Authors
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
#pragma once

#include <cstddef>
#include <functional>

namespace metasense {

// Process-wide cap on worker threads. 0 restores the default (hardware
// concurrency). Every kernel that uses parallel_for writes each output
// element from exactly one worker, so results never depend on this value.
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Runs body(i) for i in [begin, end), split into contiguous stripes.
// Falls back to a plain loop when the range is smaller than min_chunk or
// only one worker is configured. Exceptions from workers are rethrown.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& body,
                  std::size_t min_chunk = 16);

}  // namespace metasense
