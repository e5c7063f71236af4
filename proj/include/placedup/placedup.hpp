#pragma once

// Umbrella header for the place-deduplication embedding toolkit.

#include "placedup/checkpoint.hpp"
#include "placedup/denoise.hpp"
#include "placedup/embedding.hpp"
#include "placedup/eval.hpp"
#include "placedup/mat.hpp"
#include "placedup/metric.hpp"
#include "placedup/metric_train.hpp"
#include "placedup/network.hpp"
#include "placedup/pipeline.hpp"
#include "placedup/place.hpp"
#include "placedup/rng.hpp"
#include "placedup/skipgram.hpp"
#include "placedup/smoothing.hpp"
#include "placedup/synthetic.hpp"
#include "placedup/text.hpp"
#include "placedup/util.hpp"
