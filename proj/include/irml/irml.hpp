#pragma once

#include "irml/bench.hpp"
#include "irml/classifier.hpp"
#include "irml/core.hpp"
#include "irml/dataio.hpp"
#include "irml/dataset.hpp"
#include "irml/distance.hpp"
#include "irml/geometry.hpp"
#include "irml/gradcheck.hpp"
#include "irml/kmeans.hpp"
#include "irml/metrics.hpp"
#include "irml/model_io.hpp"
#include "irml/trainer.hpp"
