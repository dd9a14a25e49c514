#pragma once

// Umbrella header: the whole toolkit in one include.

#include "cassi/types.hpp"
#include "cassi/prng.hpp"
#include "cassi/phantom.hpp"
#include "cassi/container.hpp"
#include "cassi/optics.hpp"
#include "cassi/sampling.hpp"
#include "cassi/metrics.hpp"
#include "cassi/recon.hpp"
#include "cassi/config.hpp"
#include "cassi/pipeline.hpp"
