#pragma once

#include "choiforge/channel.hpp"
#include "choiforge/datagen.hpp"
#include "choiforge/error.hpp"
#include "choiforge/experiments.hpp"
#include "choiforge/fidelity.hpp"
#include "choiforge/io.hpp"
#include "choiforge/linalg.hpp"
#include "choiforge/lowrank.hpp"
#include "choiforge/rng.hpp"
#include "choiforge/sdp.hpp"
