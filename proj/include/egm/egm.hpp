#pragma once

#include "egm/affinity.hpp"
#include "egm/detection.hpp"
#include "egm/error.hpp"
#include "egm/eval.hpp"
#include "egm/geometry.hpp"
#include "egm/graph.hpp"
#include "egm/io.hpp"
#include "egm/learn.hpp"
#include "egm/parallel.hpp"
#include "egm/rng.hpp"
#include "egm/scenegen.hpp"
#include "egm/solver.hpp"
#include "egm/svg.hpp"
