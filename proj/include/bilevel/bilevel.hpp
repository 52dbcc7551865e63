#pragma once

#include "bilevel/types.hpp"
#include "bilevel/affine_system.hpp"
#include "bilevel/lp.hpp"
#include "bilevel/qp.hpp"
#include "bilevel/value_function.hpp"
#include "bilevel/quadratic.hpp"
#include "bilevel/instance.hpp"
#include "bilevel/dc.hpp"
#include "bilevel/min_subdifferential.hpp"
#include "bilevel/mpcc.hpp"
#include "bilevel/stationarity.hpp"
#include "bilevel/penalty.hpp"
#include "bilevel/bench.hpp"
#include "bilevel/profile.hpp"
#include "bilevel/report.hpp"
