#pragma once

// Everything except PNG support (overlay.hpp, fixture_io.hpp), which needs libpng.

#include "headlens/aggregation.hpp"
#include "headlens/atnd.hpp"
#include "headlens/attention.hpp"
#include "headlens/error.hpp"
#include "headlens/hrv.hpp"
#include "headlens/image.hpp"
#include "headlens/manifest.hpp"
#include "headlens/mask_io.hpp"
#include "headlens/matrix.hpp"
#include "headlens/pipeline.hpp"
#include "headlens/resample.hpp"
#include "headlens/rng.hpp"
#include "headlens/seg_eval.hpp"
#include "headlens/synthetic.hpp"
#include "headlens/version.hpp"
