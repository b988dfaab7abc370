// Copyright 2026 The jodscale Authors. All Rights Reserved.
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

// Umbrella header.

#ifndef JODSCALE_JODSCALE_HPP_
#define JODSCALE_JODSCALE_HPP_

#include "jodscale/csv.hpp"
#include "jodscale/design.hpp"
#include "jodscale/error.hpp"
#include "jodscale/linkfit.hpp"
#include "jodscale/metricmap.hpp"
#include "jodscale/model.hpp"
#include "jodscale/optimize.hpp"
#include "jodscale/photometry.hpp"
#include "jodscale/rng.hpp"
#include "jodscale/scaling.hpp"
#include "jodscale/simulate.hpp"
#include "jodscale/stats.hpp"

#endif  // JODSCALE_JODSCALE_HPP_
