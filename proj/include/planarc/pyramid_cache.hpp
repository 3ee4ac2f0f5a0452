/******************************************************************************
 * Copyright 2026 The planarc Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/
#pragma once

#include <list>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "planarc/error.hpp"
#include "planarc/image.hpp"

namespace planarc {

/// Frames plus a small LRU of their pyramids. Safe for concurrent `get`.
class PyramidCache {
 public:
  PyramidCache(std::vector<Frame> frames, int levels, std::size_t capacity = 32)
      : frames_(std::move(frames)), levels_(levels), capacity_(std::max<std::size_t>(2, capacity)) {}

  int frame_count() const { return static_cast<int>(frames_.size()); }
  const Frame& frame(int k) const {
    if (k < 0 || k >= frame_count())
      throw Error(ErrorCode::kInvalidArgument, "frame index out of range", std::to_string(k));
    return frames_[static_cast<std::size_t>(k)];
  }
  const std::vector<Frame>& frames() const { return frames_; }

  std::shared_ptr<const Pyramid> get(int k) {
    std::lock_guard lock(mutex_);
    for (auto it = lru_.begin(); it != lru_.end(); ++it) {
      if (it->first == k) {
        lru_.splice(lru_.begin(), lru_, it);
        return lru_.front().second;
      }
    }
    auto p = std::make_shared<const Pyramid>(build_pyramid(frame(k), levels_));
    lru_.emplace_front(k, p);
    if (lru_.size() > capacity_) lru_.pop_back();
    return p;
  }

 private:
  std::vector<Frame> frames_;
  int levels_;
  std::size_t capacity_;
  std::mutex mutex_;
  std::list<std::pair<int, std::shared_ptr<const Pyramid>>> lru_;
};

}  // namespace planarc
