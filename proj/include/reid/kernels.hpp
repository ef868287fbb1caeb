#pragma once

#include "reid/kernels/common.hpp"
#include "reid/kernels/gem.hpp"
#include "reid/kernels/losses.hpp"
#include "reid/kernels/nonlocal.hpp"
