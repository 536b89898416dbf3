#pragma once

#include "tontine/approx.hpp"
#include "tontine/error.hpp"
#include "tontine/estimator.hpp"
#include "tontine/fund.hpp"
#include "tontine/lifetable.hpp"
#include "tontine/normal.hpp"
#include "tontine/orderstats.hpp"
#include "tontine/parallel.hpp"
#include "tontine/random.hpp"
