#pragma once

// Umbrella header for the relative-uncertainty misclassification detection
// toolkit.

#include "relu/conformal.hpp"
#include "relu/core.hpp"
#include "relu/detect.hpp"
#include "relu/matrix.hpp"
#include "relu/metrics.hpp"
#include "relu/model.hpp"
#include "relu/npy.hpp"
#include "relu/observer.hpp"
#include "relu/pgd.hpp"
#include "relu/rng.hpp"
#include "relu/scores.hpp"
#include "relu/serialize.hpp"
#include "relu/svg.hpp"
#include "relu/synth.hpp"
#include "relu/table_io.hpp"
#include "relu/tune.hpp"
