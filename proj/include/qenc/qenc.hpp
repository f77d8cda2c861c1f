#pragma once

#include "qenc/core.hpp"
#include "qenc/csv.hpp"
#include "qenc/embeddings.hpp"
#include "qenc/strategies.hpp"
#include "qenc/readout.hpp"
#include "qenc/preprocess.hpp"
#include "qenc/classifiers.hpp"
#include "qenc/synthetic.hpp"
#include "qenc/bench.hpp"
