#pragma once

#include "hmsh/distributions.hpp"
#include "hmsh/error.hpp"
#include "hmsh/forecast.hpp"
#include "hmsh/gibbs.hpp"
#include "hmsh/inference.hpp"
#include "hmsh/io.hpp"
#include "hmsh/linalg.hpp"
#include "hmsh/markov.hpp"
#include "hmsh/model.hpp"
#include "hmsh/parallel.hpp"
#include "hmsh/rng.hpp"
#include "hmsh/simulate.hpp"
