#pragma once

#include "votrans/csv.hpp"
#include "votrans/dataset.hpp"
#include "votrans/fit.hpp"
#include "votrans/goodman.hpp"
#include "votrans/ipf.hpp"
#include "votrans/likelihood.hpp"
#include "votrans/mc_study.hpp"
#include "votrans/model.hpp"
#include "votrans/moments.hpp"
#include "votrans/report.hpp"
#include "votrans/rng.hpp"
#include "votrans/simulate.hpp"
