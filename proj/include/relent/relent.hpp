#pragma once

#include "relent/code.hpp"
#include "relent/errors.hpp"
#include "relent/experiment.hpp"
#include "relent/io.hpp"
#include "relent/joining.hpp"
#include "relent/markov.hpp"
#include "relent/mmre.hpp"
#include "relent/parallel.hpp"
#include "relent/product_coding.hpp"
#include "relent/rng.hpp"
#include "relent/sft.hpp"
#include "relent/skew_standard.hpp"
