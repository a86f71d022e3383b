#pragma once

#include "sketchpack/errors.hpp"
#include "sketchpack/rng.hpp"
#include "sketchpack/spectrum.hpp"
#include "sketchpack/linop.hpp"
#include "sketchpack/factor.hpp"
#include "sketchpack/approx.hpp"
#include "sketchpack/krylov.hpp"
#include "sketchpack/nystrom.hpp"
#include "sketchpack/metrics.hpp"
#include "sketchpack/theory.hpp"
#include "sketchpack/rmt.hpp"
#include "sketchpack/cluster.hpp"
#include "sketchpack/io.hpp"
#include "sketchpack/serialize.hpp"
