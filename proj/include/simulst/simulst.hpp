// Copyright 2026 The simulst Authors
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

// Umbrella header.

#pragma once

#include "simulst/agents.hpp"
#include "simulst/corpus_tools.hpp"
#include "simulst/errors.hpp"
#include "simulst/external_agent.hpp"
#include "simulst/log_io.hpp"
#include "simulst/metrics.hpp"
#include "simulst/policy_alignatt.hpp"
#include "simulst/policy_la.hpp"
#include "simulst/protocol.hpp"
#include "simulst/s2s_cascade.hpp"
#include "simulst/simulator.hpp"
#include "simulst/timeline.hpp"
