#pragma once

#include "rootseg/augment.hpp"
#include "rootseg/cmaes.hpp"
#include "rootseg/config.hpp"
#include "rootseg/dataio.hpp"
#include "rootseg/filters.hpp"
#include "rootseg/frangi.hpp"
#include "rootseg/frangi_tuning.hpp"
#include "rootseg/inference.hpp"
#include "rootseg/instances.hpp"
#include "rootseg/line_intersect.hpp"
#include "rootseg/loss.hpp"
#include "rootseg/metrics.hpp"
#include "rootseg/net/checkpoint.hpp"
#include "rootseg/net/layers.hpp"
#include "rootseg/net/unet.hpp"
#include "rootseg/optim.hpp"
#include "rootseg/png_io.hpp"
#include "rootseg/raster.hpp"
#include "rootseg/report.hpp"
#include "rootseg/rng.hpp"
#include "rootseg/skeleton.hpp"
#include "rootseg/split.hpp"
#include "rootseg/stats.hpp"
#include "rootseg/synth.hpp"
#include "rootseg/tiling.hpp"
#include "rootseg/train_config.hpp"
#include "rootseg/trainer.hpp"
