// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ude_grid/adam.hpp"
#include "ude_grid/dynamics.hpp"
#include "ude_grid/errors.hpp"
#include "ude_grid/io.hpp"
#include "ude_grid/mlp.hpp"
#include "ude_grid/signals.hpp"
#include "ude_grid/trainer.hpp"
#include "ude_grid/ude.hpp"
