#pragma once

#include "searchlight/allocation.hpp"
#include "searchlight/allocator.hpp"
#include "searchlight/alternative_plans.hpp"
#include "searchlight/composite.hpp"
#include "searchlight/config.hpp"
#include "searchlight/detection.hpp"
#include "searchlight/errors.hpp"
#include "searchlight/evaluator.hpp"
#include "searchlight/oracle.hpp"
#include "searchlight/plan.hpp"
#include "searchlight/prior.hpp"
#include "searchlight/schedule.hpp"
#include "searchlight/space.hpp"
#include "searchlight/validate.hpp"
