#pragma once

#include "epdyn/version.hpp"
#include "epdyn/errors.hpp"
#include "epdyn/model.hpp"
#include "epdyn/linalg.hpp"
#include "epdyn/quadrature.hpp"
#include "epdyn/time_series.hpp"
#include "epdyn/heisenberg.hpp"
#include "epdyn/lindblad.hpp"
#include "epdyn/chains.hpp"
#include "epdyn/bathsim.hpp"
#include "epdyn/analysis.hpp"
#include "epdyn/config.hpp"
#include "epdyn/io.hpp"
#include "epdyn/cli.hpp"
