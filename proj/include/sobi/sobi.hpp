#pragma once

#include "sobi/error.hpp"
#include "sobi/evaluate.hpp"
#include "sobi/givens.hpp"
#include "sobi/io.hpp"
#include "sobi/matrix.hpp"
#include "sobi/model.hpp"
#include "sobi/random.hpp"
#include "sobi/schur.hpp"
#include "sobi/whitening.hpp"
