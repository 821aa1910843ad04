#pragma once

#include "anomaly.hpp"
#include "crossfit.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "features.hpp"
#include "knn.hpp"
#include "metrics.hpp"
#include "mlp.hpp"
#include "pipeline.hpp"
#include "serialize.hpp"
#include "synth.hpp"
#include "timestamp.hpp"
