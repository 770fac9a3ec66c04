#pragma once

#include "psyfit/bundle.hpp"
#include "psyfit/commands.hpp"
#include "psyfit/config.hpp"
#include "psyfit/corpus.hpp"
#include "psyfit/error.hpp"
#include "psyfit/experiments.hpp"
#include "psyfit/features.hpp"
#include "psyfit/hash.hpp"
#include "psyfit/hrf.hpp"
#include "psyfit/models.hpp"
#include "psyfit/parallel.hpp"
#include "psyfit/preprocess.hpp"
#include "psyfit/regression.hpp"
#include "psyfit/report.hpp"
#include "psyfit/scaling.hpp"
#include "psyfit/synth.hpp"
#include "psyfit/tsv.hpp"
