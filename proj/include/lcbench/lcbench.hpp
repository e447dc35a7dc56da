#pragma once

// Umbrella header for the lane-change prediction benchmark library.

#include "lcbench/common.hpp"
#include "lcbench/linalg.hpp"
#include "lcbench/tracks.hpp"
#include "lcbench/features.hpp"
#include "lcbench/mobil.hpp"
#include "lcbench/classifiers.hpp"
#include "lcbench/ensemble.hpp"
#include "lcbench/evaluation.hpp"
#include "lcbench/descriptive.hpp"
#include "lcbench/simulator.hpp"
