// Copyright 2026 The DQGP Authors
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
/// Umbrella header for the whole library.
#pragma once

#include "baselines.hpp"
#include "config.hpp"
#include "consensus.hpp"
#include "datahub.hpp"
#include "encodings.hpp"
#include "errors.hpp"
#include "gp.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "qgrad.hpp"
#include "qkernels.hpp"
#include "selftest.hpp"
#include "statevec.hpp"
#include "torus.hpp"
