#pragma once

// Everything: maps, motion and beam models, the filter, simulation,
// learning, evaluation, configuration and reports.

#include "sketchloc/beam_model.hpp"
#include "sketchloc/config.hpp"
#include "sketchloc/error.hpp"
#include "sketchloc/eval.hpp"
#include "sketchloc/experiment.hpp"
#include "sketchloc/image_io.hpp"
#include "sketchloc/localizer.hpp"
#include "sketchloc/map_metadata.hpp"
#include "sketchloc/parallel.hpp"
#include "sketchloc/param_learning.hpp"
#include "sketchloc/particle_filter.hpp"
#include "sketchloc/raster_map.hpp"
#include "sketchloc/render.hpp"
#include "sketchloc/report.hpp"
#include "sketchloc/scenarios.hpp"
#include "sketchloc/se2.hpp"
#include "sketchloc/sensor_log.hpp"
#include "sketchloc/sim2d.hpp"
#include "sketchloc/text.hpp"
