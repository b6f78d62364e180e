#pragma once

#include "ablatron/ablation.hpp"
#include "ablatron/beam.hpp"
#include "ablatron/config.hpp"
#include "ablatron/config_io.hpp"
#include "ablatron/diagnostics.hpp"
#include "ablatron/engine.hpp"
#include "ablatron/error.hpp"
#include "ablatron/fit.hpp"
#include "ablatron/io.hpp"
#include "ablatron/photoionization.hpp"
#include "ablatron/rng.hpp"
#include "ablatron/trap.hpp"
#include "ablatron/units.hpp"
#include "ablatron/version.hpp"
