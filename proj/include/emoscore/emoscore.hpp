#pragma once

// Umbrella header for the emoscore library.

#include "emoscore/augment.hpp"
#include "emoscore/config.hpp"
#include "emoscore/dataio.hpp"
#include "emoscore/error.hpp"
#include "emoscore/eval.hpp"
#include "emoscore/experiment.hpp"
#include "emoscore/fusion.hpp"
#include "emoscore/matrix.hpp"
#include "emoscore/model.hpp"
#include "emoscore/parallel.hpp"
#include "emoscore/rng.hpp"
#include "emoscore/scores.hpp"
#include "emoscore/synthdata.hpp"
#include "emoscore/train.hpp"
