#pragma once

#include "mhla/certificate.hpp"
#include "mhla/errors.hpp"
#include "mhla/features.hpp"
#include "mhla/io.hpp"
#include "mhla/learner.hpp"
#include "mhla/matrix.hpp"
#include "mhla/model.hpp"
#include "mhla/numerics.hpp"
#include "mhla/program.hpp"
#include "mhla/rng.hpp"
#include "mhla/tasks.hpp"
