#pragma once

#include "cmpfill/cmp_model.hpp"
#include "cmpfill/config.hpp"
#include "cmpfill/density_engine.hpp"
#include "cmpfill/distance.hpp"
#include "cmpfill/dummy_fill.hpp"
#include "cmpfill/error.hpp"
#include "cmpfill/export.hpp"
#include "cmpfill/film.hpp"
#include "cmpfill/fixtures.hpp"
#include "cmpfill/gds.hpp"
#include "cmpfill/geometry.hpp"
#include "cmpfill/grid.hpp"
#include "cmpfill/layout_io.hpp"
#include "cmpfill/parallel.hpp"
#include "cmpfill/pipeline.hpp"
#include "cmpfill/raster.hpp"
#include "cmpfill/text_layout.hpp"
