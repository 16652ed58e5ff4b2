#pragma once

#include "quasispec/config.hpp"
#include "quasispec/core.hpp"
#include "quasispec/errors.hpp"
#include "quasispec/experiments.hpp"
#include "quasispec/fft.hpp"
#include "quasispec/io.hpp"
#include "quasispec/manufactured.hpp"
#include "quasispec/norms.hpp"
#include "quasispec/solver.hpp"
#include "quasispec/transform.hpp"
