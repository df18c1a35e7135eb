//
// Copyright 2026 The DPFact Authors
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
//

#pragma once

#include "dpfact/baseline.hpp"
#include "dpfact/commands.hpp"
#include "dpfact/config.hpp"
#include "dpfact/cp.hpp"
#include "dpfact/data_io.hpp"
#include "dpfact/errors.hpp"
#include "dpfact/factor_matrix.hpp"
#include "dpfact/federation.hpp"
#include "dpfact/local_solver.hpp"
#include "dpfact/metrics.hpp"
#include "dpfact/partition.hpp"
#include "dpfact/privacy.hpp"
#include "dpfact/rng.hpp"
#include "dpfact/sparse_tensor.hpp"
