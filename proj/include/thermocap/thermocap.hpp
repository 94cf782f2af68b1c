#pragma once

#include "thermocap/capacity.hpp"
#include "thermocap/config.hpp"
#include "thermocap/dimension.hpp"
#include "thermocap/error.hpp"
#include "thermocap/experiment.hpp"
#include "thermocap/geometry.hpp"
#include "thermocap/hitting.hpp"
#include "thermocap/kappa.hpp"
#include "thermocap/parallel.hpp"
#include "thermocap/refinement.hpp"
#include "thermocap/rng.hpp"
#include "thermocap/sheet.hpp"
#include "thermocap/stable.hpp"
