#pragma once
#include <gsam/core.hpp>
#include <gsam/error.hpp>
#include <gsam/losses.hpp>
#include <gsam/model.hpp>
#include <gsam/optimizer.hpp>
#include <gsam/path_cv.hpp>
#include <gsam/penalty.hpp>
#include <gsam/prox/composite.hpp>
#include <gsam/prox/dual_norm.hpp>
#include <gsam/sim.hpp>
