#pragma once

#include "citerank/corpus.hpp"
#include "citerank/error.hpp"
#include "citerank/experiments.hpp"
#include "citerank/features.hpp"
#include "citerank/metrics.hpp"
#include "citerank/random.hpp"
#include "citerank/ranksvm.hpp"
#include "citerank/synthetic.hpp"
#include "citerank/textsim.hpp"
