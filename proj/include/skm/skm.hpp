#pragma once

#include "skm/collision.hpp"
#include "skm/config.hpp"
#include "skm/core_types.hpp"
#include "skm/errors.hpp"
#include "skm/eval.hpp"
#include "skm/fastron.hpp"
#include "skm/kernel_model.hpp"
#include "skm/model_io.hpp"
#include "skm/navigation.hpp"
#include "skm/planner.hpp"
#include "skm/polynomial.hpp"
#include "skm/scan_log.hpp"
#include "skm/scan_pipeline.hpp"
#include "skm/sim_env.hpp"
#include "skm/spatial_index.hpp"
