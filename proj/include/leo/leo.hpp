#pragma once

#include "leo/error.hpp"
#include "leo/linalg.hpp"
#include "leo/rng.hpp"
#include "leo/lti.hpp"
#include "leo/observer.hpp"
#include "leo/local_lti.hpp"
#include "leo/learning.hpp"
#include "leo/stats.hpp"
#include "leo/experiments.hpp"
#include "leo/theory_check.hpp"
#include "leo/io.hpp"
#include "leo/demo.hpp"
