#pragma once
// Umbrella header: the whole library in one include.

#include "pbvp/spectral.hpp"
#include "pbvp/linalg.hpp"
#include "pbvp/linear_bvp.hpp"
#include "pbvp/lyapunov_schmidt.hpp"
#include "pbvp/vdp.hpp"
#include "pbvp/io.hpp"
