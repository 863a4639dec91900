#pragma once

#include "constants.hpp"
#include "field.hpp"
#include "fft.hpp"
#include "stationary.hpp"
#include "dynamics.hpp"
#include "ensemble.hpp"
#include "fitting.hpp"
#include "protocols.hpp"
#include "io.hpp"
