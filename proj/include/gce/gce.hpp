// Copyright 2026 The GCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gce/contention.hpp"
#include "gce/error.hpp"
#include "gce/estimator.hpp"
#include "gce/gpu_model.hpp"
#include "gce/ingest.hpp"
#include "gce/json_io.hpp"
#include "gce/occupancy.hpp"
#include "gce/policy.hpp"
#include "gce/reference_data.hpp"
#include "gce/report.hpp"
#include "gce/scenarios.hpp"
