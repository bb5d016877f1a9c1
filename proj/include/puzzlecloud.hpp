#pragma once

#include "puzzlecloud/checkpoint.hpp"
#include "puzzlecloud/config.hpp"
#include "puzzlecloud/datagen.hpp"
#include "puzzlecloud/errors.hpp"
#include "puzzlecloud/experiment.hpp"
#include "puzzlecloud/io.hpp"
#include "puzzlecloud/metrics.hpp"
#include "puzzlecloud/model.hpp"
#include "puzzlecloud/numerics.hpp"
#include "puzzlecloud/pointcloud.hpp"
#include "puzzlecloud/puzzle.hpp"
#include "puzzlecloud/settings.hpp"
#include "puzzlecloud/training.hpp"
