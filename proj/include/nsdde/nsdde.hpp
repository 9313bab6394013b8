#pragma once

#include "nsdde/builtin.hpp"
#include "nsdde/common.hpp"
#include "nsdde/config.hpp"
#include "nsdde/experiment.hpp"
#include "nsdde/grid.hpp"
#include "nsdde/model.hpp"
#include "nsdde/scheme.hpp"
#include "nsdde/selftest.hpp"
#include "nsdde/stability.hpp"
