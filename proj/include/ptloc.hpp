#pragma once

#include "ptloc/core.hpp"
#include "ptloc/random.hpp"
#include "ptloc/geometry.hpp"
#include "ptloc/oracle.hpp"
#include "ptloc/margin_tools.hpp"
#include "ptloc/isotropy.hpp"
#include "ptloc/structure_search.hpp"
#include "ptloc/dim_reduce.hpp"
#include "ptloc/iso_learn.hpp"
#include "ptloc/learners.hpp"
#include "ptloc/verification.hpp"
#include "ptloc/harness.hpp"
