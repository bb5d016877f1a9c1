#pragma once

#include "puzzlecloud/numerics/gradcheck.hpp"
#include "puzzlecloud/numerics/ops.hpp"
#include "puzzlecloud/numerics/optimizer.hpp"
#include "puzzlecloud/numerics/parameters.hpp"
#include "puzzlecloud/numerics/tensor.hpp"
