#pragma once

#include "tcnn/autoencoder.hpp"
#include "tcnn/convnet.hpp"
#include "tcnn/dataset.hpp"
#include "tcnn/decode.hpp"
#include "tcnn/errors.hpp"
#include "tcnn/experiment.hpp"
#include "tcnn/hrf.hpp"
#include "tcnn/hyperopt.hpp"
#include "tcnn/matrix.hpp"
#include "tcnn/stats.hpp"
