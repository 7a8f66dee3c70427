/*
 * Copyright 2026 The redist Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "redist/classifier.hpp"
#include "redist/embedding_store.hpp"
#include "redist/error.hpp"
#include "redist/geometry.hpp"
#include "redist/linalg.hpp"
#include "redist/metrics.hpp"
#include "redist/report.hpp"
#include "redist/sweep.hpp"
#include "redist/synth.hpp"
#include "redist/unlearning.hpp"
