#pragma once

#include "gmg/checkpoint.hpp"
#include "gmg/config.hpp"
#include "gmg/datasets.hpp"
#include "gmg/harness.hpp"
#include "gmg/metrics.hpp"
#include "gmg/model.hpp"
#include "gmg/plots.hpp"
#include "gmg/sequence_io.hpp"
