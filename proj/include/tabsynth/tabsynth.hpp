#pragma once

#include "boosting.hpp"
#include "csv.hpp"
#include "dataset.hpp"
#include "decoder.hpp"
#include "encoder.hpp"
#include "error.hpp"
#include "ica.hpp"
#include "kmeans.hpp"
#include "metrics.hpp"
#include "perturbation.hpp"
#include "rng.hpp"
#include "robustness.hpp"
#include "sampler.hpp"
#include "serialize.hpp"
#include "simulators.hpp"
