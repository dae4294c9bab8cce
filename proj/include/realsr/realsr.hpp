#pragma once

// Umbrella header.

#include "realsr/checkpoint.hpp"
#include "realsr/config.hpp"
#include "realsr/datasets.hpp"
#include "realsr/degrade.hpp"
#include "realsr/error.hpp"
#include "realsr/experiments.hpp"
#include "realsr/image.hpp"
#include "realsr/image_io.hpp"
#include "realsr/jpeg_codec.hpp"
#include "realsr/kernels.hpp"
#include "realsr/losses.hpp"
#include "realsr/metrics.hpp"
#include "realsr/models.hpp"
#include "realsr/nn.hpp"
#include "realsr/optim.hpp"
#include "realsr/parallel.hpp"
#include "realsr/resample.hpp"
#include "realsr/rng.hpp"
#include "realsr/tensor.hpp"
#include "realsr/toy.hpp"
#include "realsr/training.hpp"
