#pragma once

#include "nocs/error.hpp"
#include "nocs/geometry.hpp"
#include "nocs/io.hpp"
#include "nocs/nocs_map.hpp"
#include "nocs/losses.hpp"
#include "nocs/solvers/lift.hpp"
#include "nocs/metrics/report.hpp"
#include "nocs/dataset/canonicalization.hpp"
#include "nocs/dataset/validate.hpp"
#include "nocs/synth/scene.hpp"
