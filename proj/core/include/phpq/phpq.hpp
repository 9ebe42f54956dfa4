#pragma once

#include "phpq/bitpack.hpp"
#include "phpq/checkpoint.hpp"
#include "phpq/error.hpp"
#include "phpq/feature_io.hpp"
#include "phpq/gradcheck.hpp"
#include "phpq/index_io.hpp"
#include "phpq/losses.hpp"
#include "phpq/manifest.hpp"
#include "phpq/metrics.hpp"
#include "phpq/model.hpp"
#include "phpq/numerics.hpp"
#include "phpq/optimizer.hpp"
#include "phpq/pooling.hpp"
#include "phpq/quantization.hpp"
#include "phpq/retrieval.hpp"
#include "phpq/synthetic.hpp"
#include "phpq/training.hpp"
