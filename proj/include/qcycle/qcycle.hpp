#pragma once

// Convenience umbrella for the whole library.

#include "qstate.hpp"
#include "rng.hpp"
#include "dynamics.hpp"
#include "entropic.hpp"
#include "measurement.hpp"
#include "inference.hpp"
#include "scenarios.hpp"
