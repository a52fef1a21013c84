#pragma once

#include "graphssm/common.hpp"
#include "graphssm/discretize.hpp"
#include "graphssm/ghippo.hpp"
#include "graphssm/harness.hpp"
#include "graphssm/io.hpp"
#include "graphssm/layers.hpp"
#include "graphssm/rng.hpp"
#include "graphssm/scan.hpp"
#include "graphssm/tgraph.hpp"
#include "graphssm/verify.hpp"
