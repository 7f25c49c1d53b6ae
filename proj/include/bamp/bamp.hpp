#pragma once

#include "baseline.hpp"
#include "config.hpp"
#include "harness.hpp"
#include "inference.hpp"
#include "priors.hpp"
#include "report_io.hpp"
#include "rng.hpp"
#include "scene.hpp"
#include "scene_io.hpp"
#include "types.hpp"
