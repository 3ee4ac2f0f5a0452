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

#include <cmath>

#include "planarc/geometry.hpp"
#include "planarc/random.hpp"

namespace planarc::testing_util {

inline Pose random_pose(Rng& rng, double max_angle = M_PI, double max_t = 3.0) {
  Point3 axis(rng.normal(), rng.normal(), rng.normal());
  axis.normalize();
  Pose p;
  p.rotation = so3_exp(axis * rng.uniform(0.0, max_angle));
  p.translation = Point3(rng.uniform(-max_t, max_t), rng.uniform(-max_t, max_t), rng.uniform(-max_t, max_t));
  return p;
}

}  // namespace planarc::testing_util
