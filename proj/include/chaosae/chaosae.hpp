#pragma once

#include "chaosae/csv.hpp"
#include "chaosae/datapipe.hpp"
#include "chaosae/dynamics.hpp"
#include "chaosae/error.hpp"
#include "chaosae/harness.hpp"
#include "chaosae/latent.hpp"
#include "chaosae/lyapunov.hpp"
#include "chaosae/neuralnet.hpp"
#include "chaosae/plot.hpp"
#include "chaosae/types.hpp"
