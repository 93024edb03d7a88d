#pragma once

#include "geonet/flowmodel/arcs.hpp"
#include "geonet/flowmodel/evaluation.hpp"
#include "geonet/flowmodel/features.hpp"
#include "geonet/flowmodel/gbrt.hpp"
#include "geonet/flowmodel/hub.hpp"
#include "geonet/flowmodel/linear.hpp"
#include "geonet/flowmodel/model_io.hpp"
#include "geonet/flowmodel/report.hpp"
