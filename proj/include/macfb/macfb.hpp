// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "macfb/bf_codebook.hpp"
#include "macfb/channel.hpp"
#include "macfb/cov_codebook.hpp"
#include "macfb/experiment.hpp"
#include "macfb/numerics.hpp"
#include "macfb/rates.hpp"
#include "macfb/rng.hpp"
#include "macfb/serialize.hpp"
#include "macfb/waterfill.hpp"
